#ifndef LSMBD_OPERATORS_HPP
#define LSMBD_OPERATORS_HPP

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>

#include "lsmbd/conv.hpp"
#include "lsmbd/errors.hpp"
#include "lsmbd/matrix.hpp"
#include "lsmbd/rng.hpp"

namespace lsmbd {

// Common source signal s. Unit norm is maintained by the projection step of
// the training loop, not enforced at construction (random inits arrive here
// before their first projection).
struct Source {
  Signal s;

  Source() = default;
  explicit Source(Signal v) : s(std::move(v)) {
    if (s.empty()) throw DimensionError("Source: empty signal");
    if (!all_finite(s)) throw ParameterError("Source: non-finite entries");
  }
  std::size_t length() const { return s.size(); }
};

// Compression filter h of length M_h = M_y + M_z - 1 defining the Toeplitz
// operator that keeps the M_z complete-overlap convolution samples.
struct CompressionFilter {
  Signal h;
  std::size_t m_y = 0;
  std::size_t m_z = 0;

  CompressionFilter() = default;
  CompressionFilter(Signal filt, std::size_t my, std::size_t mz)
      : h(std::move(filt)), m_y(my), m_z(mz) {
    if (my == 0 || mz == 0) throw DimensionError("CompressionFilter: zero dimension");
    if (mz > my) throw DimensionError("CompressionFilter: M_z must not exceed M_y");
    if (h.size() != my + mz - 1)
      throw DimensionError("CompressionFilter: filter length must be M_y + M_z - 1, got " +
                           std::to_string(h.size()));
    if (!all_finite(h)) throw ParameterError("CompressionFilter: non-finite entries");
  }
  std::size_t m_h() const { return h.size(); }
};

struct ProblemDims {
  std::size_t m_s = 0, m_x = 0, m_y = 0, m_z = 0, n = 0, l = 0;

  ProblemDims() = default;
  ProblemDims(std::size_t ms, std::size_t mx, std::size_t mz, std::size_t count,
              std::size_t sparsity)
      : m_s(ms), m_x(mx), m_y(mx + ms - 1), m_z(mz), n(count), l(sparsity) {
    if (ms == 0 || mx == 0 || mz == 0 || count == 0 || sparsity == 0)
      throw ParameterError("ProblemDims: all dimensions must be positive");
    if (sparsity > mx) throw ParameterError("ProblemDims: L exceeds M_x");
    if (mz > m_y) throw ParameterError("ProblemDims: M_z exceeds M_y");
  }
  double compression_ratio() const {
    return static_cast<double>(m_z) / static_cast<double>(m_y);
  }
};

// y = s * x (full linear convolution), length M_y = M_x + M_s - 1.
inline Signal apply_source(const Source& src, const Signal& x) {
  if (x.empty()) throw DimensionError("apply_source: empty input");
  return linear_convolve(src.s, x);
}

// C_s^T v: valid-mode correlation of v with s, length M_x = M_y - M_s + 1.
inline Signal apply_source_adjoint(const Source& src, const Signal& v) {
  if (v.size() < src.length())
    throw DimensionError("apply_source_adjoint: input shorter than source");
  return valid_correlation(v, src.s, v.size() - src.length() + 1);
}

// z[i] = sum_l y[l] h[M_y-1+i-l]: the M_z convolution samples where h and y
// overlap completely.
inline Signal apply_compression(const CompressionFilter& hf, const Signal& y) {
  if (y.size() != hf.m_y) throw DimensionError("apply_compression: length mismatch");
  const std::size_t my = hf.m_y, mz = hf.m_z;
  Signal z(mz);
  if (my + hf.m_h() - 1 >= kFftCrossover) {
    detail::convolve_fft_slice_into(y.data(), my, hf.h.data(), hf.m_h(), my - 1,
                                    mz, z.data());
    return z;
  }
  thread_local std::vector<double> yrev;
  yrev.assign(y.rbegin(), y.rend());
  for (std::size_t i = 0; i < mz; ++i) {
    const double* hw = hf.h.data() + i;
    double acc = 0.0;
    for (std::size_t l = 0; l < my; ++l) acc += yrev[l] * hw[l];
    z[i] = acc;
  }
  return z;
}

// (Phi^T z)[j] = sum_i h[M_y-1+i-j] z[i] = sliding dot of z against h.
inline Signal apply_compression_adjoint(const CompressionFilter& hf, const Signal& z) {
  if (z.size() != hf.m_z) throw DimensionError("apply_compression_adjoint: length mismatch");
  const std::size_t my = hf.m_y, mz = hf.m_z;
  Signal out(my);
  if (mz + hf.m_h() - 1 >= kFftCrossover) {
    thread_local std::vector<double> rev;
    rev.assign(hf.h.rbegin(), hf.h.rend());
    detail::convolve_fft_slice_into(z.data(), mz, rev.data(), hf.m_h(), mz - 1,
                                    my, out.data());
    return out;
  }
  for (std::size_t j = 0; j < my; ++j) {
    const double* hw = hf.h.data() + (my - 1 - j);
    double acc = 0.0;
    for (std::size_t i = 0; i < mz; ++i) acc += z[i] * hw[i];
    out[j] = acc;
  }
  return out;
}

// Dense M_z x M_y Toeplitz matrix with entries Phi(i, j) = h[M_y-1+i-j].
// Test oracle and unstructured-baseline path only; training never forms it.
inline Matrix build_toeplitz(const CompressionFilter& hf) {
  Matrix phi(hf.m_z, hf.m_y);
  for (std::size_t i = 0; i < hf.m_z; ++i)
    for (std::size_t j = 0; j < hf.m_y; ++j)
      phi.at(i, j) = hf.h[hf.m_y - 1 + i - j];
  return phi;
}

// Compression operator as used by the encoder: identity (stage 1), the
// structured Toeplitz filter, or a dense matrix (unstructured baseline).
struct CompressOp {
  enum class Kind { identity, structured, dense };

  Kind kind = Kind::identity;
  std::size_t my = 0, mz = 0;
  CompressionFilter filt;  // structured
  Matrix mat;              // dense

  static CompressOp identity(std::size_t m) {
    CompressOp op;
    op.kind = Kind::identity;
    op.my = op.mz = m;
    return op;
  }
  static CompressOp structured(CompressionFilter hf) {
    CompressOp op;
    op.kind = Kind::structured;
    op.my = hf.m_y;
    op.mz = hf.m_z;
    op.filt = std::move(hf);
    return op;
  }
  static CompressOp dense(Matrix m) {
    CompressOp op;
    op.kind = Kind::dense;
    op.my = m.cols;
    op.mz = m.rows;
    op.mat = std::move(m);
    return op;
  }

  Signal apply(const Signal& y) const {
    switch (kind) {
      case Kind::identity:
        if (y.size() != my) throw DimensionError("CompressOp::apply: length mismatch");
        return y;
      case Kind::structured:
        return apply_compression(filt, y);
      case Kind::dense:
        return matvec(mat, y);
    }
    throw StateError("CompressOp: invalid kind");
  }

  Signal adjoint(const Signal& z) const {
    switch (kind) {
      case Kind::identity:
        if (z.size() != mz) throw DimensionError("CompressOp::adjoint: length mismatch");
        return z;
      case Kind::structured:
        return apply_compression_adjoint(filt, z);
      case Kind::dense:
        return matvec_transpose(mat, z);
    }
    throw StateError("CompressOp: invalid kind");
  }
};

struct PowerIterOptions {
  std::size_t max_iters = 500;
  double tol = 1e-8;  // relative change of the Ritz estimate
};

namespace detail {

// Largest eigenvalue of a symmetric tridiagonal matrix by Sturm bisection.
inline double tridiag_lambda_max(const std::vector<double>& diag,
                                 const std::vector<double>& off) {
  const std::size_t n = diag.size();
  double lo = diag[0], hi = diag[0];
  for (std::size_t i = 0; i < n; ++i) {
    double r = 0.0;
    if (i > 0) r += std::abs(off[i - 1]);
    if (i + 1 < n) r += std::abs(off[i]);
    lo = std::min(lo, diag[i] - r);
    hi = std::max(hi, diag[i] + r);
  }
  const double scale = std::max({std::abs(lo), std::abs(hi), 1.0});
  auto count_below = [&](double x) {
    std::size_t cnt = 0;
    double d = diag[0] - x;
    if (d == 0.0) d = -1e-300;
    if (d < 0.0) ++cnt;
    for (std::size_t i = 1; i < n; ++i) {
      d = (diag[i] - x) - off[i - 1] * off[i - 1] / d;
      if (d == 0.0) d = -1e-300;
      if (d < 0.0) ++cnt;
    }
    return cnt;
  };
  for (int it = 0; it < 200 && hi - lo > 1e-15 * scale; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (count_below(mid) >= n)
      hi = mid;
    else
      lo = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace detail

// Largest singular value of Phi * C_s. Krylov (Lanczos) iteration on the
// composed normal operator v -> C_s^T Phi^T Phi C_s v with full
// reorthogonalization; this is the power method's subspace accelerated so
// that clustered spectra (the near-delta source makes the normal operator
// almost the identity) still settle within the iteration cap. Exact once the
// Krylov space exhausts the code dimension.
inline double operator_spectral_norm(const Source& src, const CompressOp& phi,
                                     const PowerIterOptions& opts = {}) {
  if (phi.my < src.length())
    throw DimensionError("operator_spectral_norm: M_y shorter than source");
  const std::size_t mx = phi.my - src.length() + 1;
  const std::size_t max_steps = std::min(opts.max_iters, mx);

  auto normal_op = [&](const Signal& v) {
    return apply_source_adjoint(src, phi.adjoint(phi.apply(apply_source(src, v))));
  };

  Philox rng(0x5eed0fULL);
  Signal v(mx);
  for (double& e : v) e = rng.next_normal();
  {
    const double nv = norm2(v);
    for (double& e : v) e /= nv;
  }

  std::vector<Signal> basis{v};
  std::vector<double> diag, off;
  double prev = -1.0;
  for (std::size_t j = 0; j < max_steps; ++j) {
    Signal w = normal_op(basis[j]);
    diag.push_back(dot(w, basis[j]));
    // full reorthogonalization, twice for numerical safety
    for (int pass = 0; pass < 2; ++pass)
      for (const Signal& b : basis) {
        const double c = dot(w, b);
        for (std::size_t i = 0; i < mx; ++i) w[i] -= c * b[i];
      }
    const double lam = detail::tridiag_lambda_max(diag, off);
    const bool exhausted = j + 1 == mx;
    const double beta = norm2(w);
    if (prev >= 0.0 && std::abs(lam - prev) <= opts.tol * std::max(std::abs(lam), 1e-300))
      return std::sqrt(std::max(lam, 0.0));
    if (beta <= 1e-14 * std::max(1.0, std::abs(lam)) || exhausted)
      return std::sqrt(std::max(lam, 0.0));  // invariant subspace: estimate is exact
    prev = lam;
    off.push_back(beta);
    for (double& e : w) e /= beta;
    basis.push_back(std::move(w));
  }
  throw NumericError("operator_spectral_norm: Krylov iteration did not converge in " +
                     std::to_string(max_steps) + " steps");
}

// --- gradient accumulation kernels -----------------------------------------
//
// d/ds <v, s * g> for v of length M_y and g of length M_x is the valid
// correlation of v with g truncated to M_s entries; valid_correlation covers
// it directly.

// d/dh <w, Phi_h v> with w of length M_z and v of length M_y: a full
// cross-correlation reversed into filter-index order, length M_h.
inline Signal filter_grad_kernel(const CompressionFilter& hf, const Signal& w,
                                 const Signal& v) {
  if (w.size() != hf.m_z || v.size() != hf.m_y)
    throw DimensionError("filter_grad_kernel: dimension mismatch");
  thread_local std::vector<double> rev;
  rev.assign(w.rbegin(), w.rend());
  Signal c = linear_convolve(v, rev);  // length M_h
  std::reverse(c.begin(), c.end());
  return c;
}

}  // namespace lsmbd

#endif  // LSMBD_OPERATORS_HPP
