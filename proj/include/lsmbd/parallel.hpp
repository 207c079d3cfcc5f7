#ifndef LSMBD_PARALLEL_HPP
#define LSMBD_PARALLEL_HPP

#include <cstddef>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace lsmbd {

// Worker count: LSMBD_WORKERS caps it, hardware concurrency is the default.
inline std::size_t worker_count() {
  std::size_t n = std::thread::hardware_concurrency();
  if (n == 0) n = 1;
  if (const char* env = std::getenv("LSMBD_WORKERS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v >= 1 && static_cast<std::size_t>(v) < n) n = static_cast<std::size_t>(v);
  }
  return n;
}

// Runs fn(i) for i in [0, n). Each index writes only its own output slot, so
// results are independent of the worker count; callers reduce the slots in
// index order to keep floating-point sums deterministic.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn) {
  const std::size_t workers = std::min(worker_count(), n == 0 ? std::size_t{1} : n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += workers) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace lsmbd

#endif  // LSMBD_PARALLEL_HPP
