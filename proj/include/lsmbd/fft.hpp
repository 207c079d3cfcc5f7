#ifndef LSMBD_FFT_HPP
#define LSMBD_FFT_HPP

#include <fftw3.h>

#include <complex>
#include <cstddef>
#include <map>
#include <mutex>
#include <vector>

namespace lsmbd::fft {

inline std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

namespace detail {

// FFTW plan creation is not thread-safe; execution is. Plans are cached per
// transform size, created once under a mutex with FFTW_ESTIMATE (deterministic
// planning) and FFTW_UNALIGNED (valid for any caller buffer).
struct PlanCache {
  std::mutex mu;
  std::map<std::size_t, fftw_plan> fwd;   // r2c
  std::map<std::size_t, fftw_plan> bwd;   // c2r
};

inline PlanCache& plan_cache() {
  static PlanCache cache;
  return cache;
}

inline fftw_plan get_plan(std::size_t n, bool forward) {
  PlanCache& cache = plan_cache();
  std::lock_guard<std::mutex> lock(cache.mu);
  auto& table = forward ? cache.fwd : cache.bwd;
  auto it = table.find(n);
  if (it != table.end()) return it->second;
  std::vector<double> re(n, 0.0);
  std::vector<std::complex<double>> cx(n / 2 + 1);
  fftw_plan plan =
      forward
          ? fftw_plan_dft_r2c_1d(static_cast<int>(n), re.data(),
                                 reinterpret_cast<fftw_complex*>(cx.data()),
                                 FFTW_ESTIMATE | FFTW_UNALIGNED)
          : fftw_plan_dft_c2r_1d(static_cast<int>(n),
                                 reinterpret_cast<fftw_complex*>(cx.data()),
                                 re.data(), FFTW_ESTIMATE | FFTW_UNALIGNED);
  table.emplace(n, plan);
  return plan;
}

}  // namespace detail

// Real-to-complex DFT of length n; out must hold n/2 + 1 bins. The input
// buffer is read-only in effect but FFTW's signature wants it mutable.
inline void rfft(double* in, std::size_t n, std::complex<double>* out) {
  fftw_execute_dft_r2c(detail::get_plan(n, true), in,
                       reinterpret_cast<fftw_complex*>(out));
}

// Inverse of rfft, scaled by 1/n so that irfft(rfft(x)) == x. Destroys `in`.
inline void irfft(std::complex<double>* in, std::size_t n, double* out) {
  fftw_execute_dft_c2r(detail::get_plan(n, false),
                       reinterpret_cast<fftw_complex*>(in), out);
  const double scale = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) out[i] *= scale;
}

// Magnitude of the full-length DFT of a real signal, all n bins. Used for
// spectrum plot data; O(n log n) via the half-spectrum plus symmetry.
inline std::vector<double> dft_magnitude(const std::vector<double>& x) {
  const std::size_t n = x.size();
  std::vector<double> in(x);
  std::vector<std::complex<double>> half(n / 2 + 1);
  rfft(in.data(), n, half.data());
  std::vector<double> mag(n);
  for (std::size_t k = 0; k < half.size(); ++k) mag[k] = std::abs(half[k]);
  for (std::size_t k = half.size(); k < n; ++k) mag[k] = mag[n - k];
  return mag;
}

}  // namespace lsmbd::fft

#endif  // LSMBD_FFT_HPP
