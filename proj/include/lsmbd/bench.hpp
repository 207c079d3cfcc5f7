#ifndef LSMBD_BENCH_HPP
#define LSMBD_BENCH_HPP

#include <chrono>
#include <cmath>
#include <cstdint>
#include <vector>

#include "lsmbd/matrix.hpp"
#include "lsmbd/metrics.hpp"
#include "lsmbd/operators.hpp"
#include "lsmbd/rng.hpp"

namespace lsmbd {

struct BenchRow {
  std::size_t m_y = 0, m_z = 0, m_h = 0;
  double structured_ns = 0.0;  // FFT-path apply, ns per operation
  double dense_ns = 0.0;       // materialized matrix apply, ns per operation
  std::size_t mem_structured = 0;  // stored coefficients: M_h
  std::size_t mem_dense = 0;       // stored entries: M_y * M_z
  double agree_err = 0.0;          // max |structured - dense| on the timed input
};

namespace detail {

template <typename Fn>
double time_mean_ns(Fn&& fn, int repeats) {
  using clock = std::chrono::steady_clock;
  // warm-up also takes FFT planning out of the timed region
  fn();
  // size the inner loop so one measurement is comfortably above timer noise
  std::size_t inner = 1;
  for (;;) {
    const auto t0 = clock::now();
    for (std::size_t i = 0; i < inner; ++i) fn();
    const auto dt = std::chrono::duration_cast<std::chrono::nanoseconds>(clock::now() - t0);
    if (dt.count() >= 1000000 || inner >= (1u << 20)) break;
    inner *= 4;
  }
  double total = 0.0;
  for (int r = 0; r < repeats; ++r) {
    const auto t0 = clock::now();
    for (std::size_t i = 0; i < inner; ++i) fn();
    const auto dt = std::chrono::duration_cast<std::chrono::nanoseconds>(clock::now() - t0);
    total += static_cast<double>(dt.count()) / static_cast<double>(inner);
  }
  return total / repeats;
}

}  // namespace detail

// Times structured (FFT) against dense application of the same operator over
// a ladder of M_y sizes at fixed CR. Numeric agreement is checked on every
// point before anything is timed.
inline std::vector<BenchRow> bench_operator(const std::vector<std::size_t>& my_ladder,
                                            double cr = 0.5, int repeats = 20,
                                            std::uint64_t seed = 1234) {
  std::vector<BenchRow> rows;
  for (std::size_t my : my_ladder) {
    const auto mz = static_cast<std::size_t>(std::llround(cr * static_cast<double>(my)));
    Philox rng(seed, my);
    Signal h(my + mz - 1);
    for (double& v : h) v = rng.next_normal();
    const double nrm = norm2(h);
    for (double& v : h) v /= nrm;
    CompressionFilter hf(std::move(h), my, mz);
    Signal y(my);
    for (double& v : y) v = rng.next_normal();

    const Matrix phi = build_toeplitz(hf);
    const Signal z_fast = apply_compression(hf, y);
    const Signal z_dense = matvec(phi, y);
    double err = 0.0;
    for (std::size_t i = 0; i < mz; ++i)
      err = std::max(err, std::abs(z_fast[i] - z_dense[i]));

    BenchRow row;
    row.m_y = my;
    row.m_z = mz;
    row.m_h = hf.m_h();
    row.mem_structured = hf.m_h();
    row.mem_dense = my * mz;
    row.agree_err = err;
    row.structured_ns = detail::time_mean_ns(
        [&] {
          volatile double sink = apply_compression(hf, y)[0];
          (void)sink;
        },
        repeats);
    row.dense_ns = detail::time_mean_ns(
        [&] {
          volatile double sink = matvec(phi, y)[0];
          (void)sink;
        },
        repeats);
    rows.push_back(row);
  }
  return rows;
}

// Least-squares slope of log2(time) against log2(M_y).
inline double fit_growth_exponent(const std::vector<BenchRow>& rows, bool structured) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(rows.size());
  for (const auto& r : rows) {
    const double x = std::log2(static_cast<double>(r.m_y));
    const double y = std::log2(structured ? r.structured_ns : r.dense_ns);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace lsmbd

#endif  // LSMBD_BENCH_HPP
