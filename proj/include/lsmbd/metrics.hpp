#ifndef LSMBD_METRICS_HPP
#define LSMBD_METRICS_HPP

#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "lsmbd/encoder.hpp"
#include "lsmbd/lista.hpp"
#include "lsmbd/matrix.hpp"
#include "lsmbd/operators.hpp"
#include "lsmbd/parallel.hpp"
#include "lsmbd/rng.hpp"

namespace lsmbd {

inline constexpr double kSuccessThresholdDb = -50.0;

// 20 log10(||X - Xhat||_F / ||X||_F); -inf on an exact match.
inline double nmse_db(const Matrix& x, const Matrix& xhat) {
  if (x.rows != xhat.rows || x.cols != xhat.cols)
    throw DimensionError("nmse_db: shape mismatch");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < x.data.size(); ++i) {
    const double d = x.data[i] - xhat.data[i];
    num += d * d;
    den += x.data[i] * x.data[i];
  }
  if (den == 0.0) throw ParameterError("nmse_db: reference is identically zero");
  if (num == 0.0) return -std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(num / den);
}

inline double nmse_db(const Signal& x, const Signal& xhat) {
  Matrix a(x.size(), 1), b(xhat.size(), 1);
  a.data = x;
  b.data = xhat;
  return nmse_db(a, b);
}

inline bool nmse_success(double db) { return db < kSuccessThresholdDb; }

// sqrt(1 - <s, shat>) for unit-norm sources; 0 is exact recovery. With
// align=true the inner product is maximized over sign flips and circular
// shifts of shat (the blind-deconvolution ambiguities). The reported value
// is clamped into the documented [0, 1] range; `clamped` (when supplied)
// flags that the unclamped value fell outside it, which also absorbs
// rounding that pushes <s, shat> past 1.
inline double source_error(const Source& s, const Source& shat, bool align,
                           bool* clamped = nullptr) {
  if (s.length() != shat.length()) throw DimensionError("source_error: length mismatch");
  const double tol = 1e-6;
  if (std::abs(norm2(s.s) - 1.0) > tol || std::abs(norm2(shat.s) - 1.0) > tol)
    throw ParameterError("source_error: inputs must be unit norm");
  const std::size_t m = s.length();
  double best = 0.0;
  if (!align) {
    best = dot(s.s, shat.s);
  } else {
    best = -std::numeric_limits<double>::infinity();
    for (std::size_t shift = 0; shift < m; ++shift) {
      double ip = 0.0;
      for (std::size_t k = 0; k < m; ++k) ip += s.s[k] * shat.s[(k + shift) % m];
      best = std::max(best, std::max(ip, -ip));
    }
  }
  if (clamped != nullptr) *clamped = best < 0.0 || best > 1.0;
  const double ip = std::min(std::max(best, 0.0), 1.0);
  return std::sqrt(1.0 - ip);
}

// Random-operator baselines. Structured draws a unit-norm Gaussian filter;
// unstructured draws a dense i.i.d. Gaussian matrix used through the dense
// application path.
inline CompressOp make_gaussian_compressor(std::size_t m_y, std::size_t m_z,
                                           bool structured, Philox& rng) {
  if (structured) {
    Signal h(m_y + m_z - 1);
    for (double& v : h) v = rng.next_normal();
    const double nrm = norm2(h);
    for (double& v : h) v /= nrm;
    return CompressOp::structured(CompressionFilter(std::move(h), m_y, m_z));
  }
  Matrix m(m_z, m_y);
  for (double& v : m.data) v = rng.next_normal();
  return CompressOp::dense(std::move(m));
}

struct MetricReport {
  std::string method;
  double cr_pct = 0.0;
  std::size_t m_z = 0;
  int trial = 0;  // -1 for deterministic single-run methods
  double nmse = 0.0;
  bool success = false;
  double p10_db = 0.0, p50_db = 0.0, p90_db = 0.0;  // per-example percentiles
  std::size_t n_below_threshold = 0;                // per-example successes
};

struct EvaluationInput {
  const Matrix* test_x = nullptr;  // ground truth
  const Matrix* test_y = nullptr;  // full measurements (compressed on the fly)
};

namespace detail {

inline double percentile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(pos);
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return v[lo] * (1.0 - frac) + v[hi] * frac;
}

}  // namespace detail

// Runs the deep encoder over every test column and scores recovery.
inline MetricReport evaluate_encoder(const std::string& method, const Source& src,
                                     const CompressOp& phi, const EncoderConfig& cfg,
                                     const EvaluationInput& in, double cr_pct,
                                     int trial = -1) {
  const Matrix& tx = *in.test_x;
  const Matrix& ty = *in.test_y;
  Matrix xhat(tx.rows, tx.cols);
  parallel_for(ty.cols, [&](std::size_t n) {
    const Signal z = phi.apply(ty.col_vec(n));
    ForwardTrace tr = encoder_forward(z, src, phi, cfg);
    xhat.set_col(n, tr.xhat);
  });

  MetricReport rep;
  rep.method = method;
  rep.cr_pct = cr_pct;
  rep.m_z = phi.mz;
  rep.trial = trial;
  rep.nmse = nmse_db(tx, xhat);
  rep.success = nmse_success(rep.nmse);
  std::vector<double> per(tx.cols);
  for (std::size_t n = 0; n < tx.cols; ++n) {
    per[n] = nmse_db(tx.col_vec(n), xhat.col_vec(n));
    if (nmse_success(per[n])) ++rep.n_below_threshold;
  }
  rep.p10_db = detail::percentile(per, 0.10);
  rep.p50_db = detail::percentile(per, 0.50);
  rep.p90_db = detail::percentile(per, 0.90);
  return rep;
}

// Same scoring for the shallow learned encoder.
inline MetricReport evaluate_lista(const std::string& method, const ListaParams& par,
                                   const CompressionFilter& hf, const EvaluationInput& in,
                                   double cr_pct) {
  const Matrix& tx = *in.test_x;
  const Matrix& ty = *in.test_y;
  const CompressOp phi = CompressOp::structured(hf);
  Matrix xhat(tx.rows, tx.cols);
  parallel_for(ty.cols, [&](std::size_t n) {
    const Signal z = phi.apply(ty.col_vec(n));
    ListaTrace tr = lista_forward(z, par, phi);
    xhat.set_col(n, tr.xhat);
  });

  MetricReport rep;
  rep.method = method;
  rep.cr_pct = cr_pct;
  rep.m_z = hf.m_z;
  rep.trial = -1;
  rep.nmse = nmse_db(tx, xhat);
  rep.success = nmse_success(rep.nmse);
  std::vector<double> per(tx.cols);
  for (std::size_t n = 0; n < tx.cols; ++n) {
    per[n] = nmse_db(tx.col_vec(n), xhat.col_vec(n));
    if (nmse_success(per[n])) ++rep.n_below_threshold;
  }
  rep.p10_db = detail::percentile(per, 0.10);
  rep.p50_db = detail::percentile(per, 0.50);
  rep.p90_db = detail::percentile(per, 0.90);
  return rep;
}

// Step size actually used when evaluating an arbitrary operator: the
// configured alpha, capped at safety/sigma_max^2 so random baselines with
// large spectral norm stay inside the stable region.
inline double stable_alpha(const Source& src, const CompressOp& phi, double alpha,
                           double safety = 0.95) {
  const double sigma = operator_spectral_norm(src, phi);
  if (sigma <= 0.0) return alpha;
  return std::min(alpha, safety / (sigma * sigma));
}

}  // namespace lsmbd

#endif  // LSMBD_METRICS_HPP
