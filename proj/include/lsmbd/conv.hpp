#ifndef LSMBD_CONV_HPP
#define LSMBD_CONV_HPP

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <vector>

#include "lsmbd/errors.hpp"
#include "lsmbd/fft.hpp"

namespace lsmbd {

using Signal = std::vector<double>;

// Full-convolution lengths at or above this use the FFT path.
inline constexpr std::size_t kFftCrossover = 128;

inline bool all_finite(const Signal& v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

inline double dot(const Signal& a, const Signal& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

inline double norm2(const Signal& v) { return std::sqrt(dot(v, v)); }

namespace detail {

// Scratch buffers for the FFT convolution path. thread_local so concurrent
// workers never share; grown on demand.
struct ConvScratch {
  std::vector<double> a, b;
  std::vector<std::complex<double>> fa, fb;
};

inline ConvScratch& conv_scratch() {
  thread_local ConvScratch scratch;
  return scratch;
}

// Full linear convolution into out (length P+Q-1), direct summation.
inline void convolve_direct_into(const double* a, std::size_t p, const double* b,
                                 std::size_t q, double* out) {
  const std::size_t n = p + q - 1;
  std::fill(out, out + n, 0.0);
  for (std::size_t i = 0; i < p; ++i) {
    const double ai = a[i];
    for (std::size_t j = 0; j < q; ++j) out[i + j] += ai * b[j];
  }
}

// Slice [offset, offset+len) of the full linear convolution, via FFT.
inline void convolve_fft_slice_into(const double* a, std::size_t p, const double* b,
                                    std::size_t q, std::size_t offset,
                                    std::size_t len, double* out) {
  const std::size_t full = p + q - 1;
  const std::size_t n = fft::next_pow2(full);
  ConvScratch& s = conv_scratch();
  s.a.assign(n, 0.0);
  s.b.assign(n, 0.0);
  std::copy(a, a + p, s.a.begin());
  std::copy(b, b + q, s.b.begin());
  s.fa.resize(n / 2 + 1);
  s.fb.resize(n / 2 + 1);
  fft::rfft(s.a.data(), n, s.fa.data());
  fft::rfft(s.b.data(), n, s.fb.data());
  for (std::size_t k = 0; k < s.fa.size(); ++k) s.fa[k] *= s.fb[k];
  fft::irfft(s.fa.data(), n, s.a.data());
  std::copy(s.a.begin() + static_cast<std::ptrdiff_t>(offset),
            s.a.begin() + static_cast<std::ptrdiff_t>(offset + len), out);
}

}  // namespace detail

// Full linear convolution, direct summation path.
inline Signal convolve_direct(const Signal& a, const Signal& b) {
  if (a.empty() || b.empty()) throw DimensionError("convolve: empty input");
  Signal out(a.size() + b.size() - 1);
  detail::convolve_direct_into(a.data(), a.size(), b.data(), b.size(), out.data());
  return out;
}

// Full linear convolution, FFT path.
inline Signal convolve_fft(const Signal& a, const Signal& b) {
  if (a.empty() || b.empty()) throw DimensionError("convolve: empty input");
  const std::size_t n = a.size() + b.size() - 1;
  Signal out(n);
  detail::convolve_fft_slice_into(a.data(), a.size(), b.data(), b.size(), 0, n,
                                  out.data());
  return out;
}

// Full linear convolution; output length is always P+Q-1.
inline Signal linear_convolve(const Signal& a, const Signal& b) {
  if (a.empty() || b.empty()) throw DimensionError("linear_convolve: empty input");
  if (a.size() + b.size() - 1 >= kFftCrossover) return convolve_fft(a, b);
  return convolve_direct(a, b);
}

// out[k] = sum_j v[k + j] * kernel[j] for k = 0 .. out_len-1 (valid-mode
// cross-correlation). Requires out_len + kernel.size() - 1 <= v.size().
inline void valid_correlation_into(const Signal& v, const Signal& kernel,
                                   std::size_t out_len, double* out) {
  const std::size_t kq = kernel.size();
  if (out_len + kq - 1 > v.size())
    throw DimensionError("valid_correlation: window exceeds signal length");
  if (v.size() + kq - 1 >= kFftCrossover) {
    // slice of conv(v, reverse(kernel)) starting at kq-1
    thread_local std::vector<double> rev;
    rev.assign(kernel.rbegin(), kernel.rend());
    detail::convolve_fft_slice_into(v.data(), v.size(), rev.data(), kq, kq - 1,
                                    out_len, out);
    return;
  }
  for (std::size_t k = 0; k < out_len; ++k) {
    double acc = 0.0;
    const double* base = v.data() + k;
    for (std::size_t j = 0; j < kq; ++j) acc += base[j] * kernel[j];
    out[k] = acc;
  }
}

inline Signal valid_correlation(const Signal& v, const Signal& kernel,
                                std::size_t out_len) {
  Signal out(out_len);
  valid_correlation_into(v, kernel, out_len, out.data());
  return out;
}

}  // namespace lsmbd

#endif  // LSMBD_CONV_HPP
