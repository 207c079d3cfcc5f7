#ifndef LSMBD_ENCODER_HPP
#define LSMBD_ENCODER_HPP

#include <cassert>
#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "lsmbd/operators.hpp"

namespace lsmbd {

struct EncoderConfig {
  std::size_t iters = 0;     // T, unrolling depth
  double alpha = 0.0;        // gradient step size
  double lambda = 0.0;       // initial sparsity level
  double decay = 1.0;        // c, per-iteration threshold decay in (0, 1]
  bool nonneg = true;        // one-sided (ReLU) thresholding
  std::size_t backprop = 1;  // K, truncated-backprop window

  void validate() const {
    if (iters < 1) throw ParameterError("EncoderConfig: T must be >= 1");
    if (!(alpha > 0.0)) throw ParameterError("EncoderConfig: alpha must be positive");
    if (lambda < 0.0) throw ParameterError("EncoderConfig: lambda must be nonnegative");
    if (!(decay > 0.0 && decay <= 1.0))
      throw ParameterError("EncoderConfig: c must lie in (0, 1]");
    if (backprop < 1 || backprop > iters)
      throw ParameterError("EncoderConfig: K must satisfy 1 <= K <= T");
  }
};

// Soft threshold: two-sided shrinkage, or its one-sided ReLU variant when
// only nonnegative codes are admissible.
inline Signal shrink(Signal v, double b, bool nonneg) {
  if (b < 0.0) throw ParameterError("shrink: threshold must be nonnegative");
  if (nonneg) {
    for (double& x : v) x = x > b ? x - b : 0.0;
  } else {
    for (double& x : v) {
      if (x > b)
        x -= b;
      else if (x < -b)
        x += b;
      else
        x = 0.0;
    }
  }
  return v;
}

// b_t = alpha * c^t * lambda. Strictly decreasing in t when c < 1, lambda > 0.
inline double bias_schedule(const EncoderConfig& cfg, std::size_t t) {
  return cfg.alpha * std::pow(cfg.decay, static_cast<double>(t)) * cfg.lambda;
}

// FISTA momentum scalars: s_1 = 1, s_{t+1} = (1 + sqrt(1 + 4 s_t^2)) / 2.
// Returns (s_t, s_{t+1}).
inline std::pair<double, double> momentum(std::size_t t) {
  if (t < 1) throw ParameterError("momentum: t must be >= 1");
  double s = 1.0;
  for (std::size_t i = 1; i < t; ++i) s = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * s * s));
  const double s_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * s * s));
  return {s, s_next};
}

// Iterate history needed for truncated backprop. tail[i] is iterate
// x_{first_index + i}; indices -1 and 0 are the all-zero starting iterates.
struct ForwardTrace {
  Signal xhat;               // x_T
  std::vector<Signal> tail;  // x_{T-K-1} .. x_T (clamped below at index -1)
  long first_index = 0;
  double residual_rel_var = 0.0;  // spread of ||z - Phi C_s x_t|| over the
                                  // last <=100 iterations, when tracked
  bool residual_tracked = false;
};

namespace detail {

inline void check_finite_iterate(const Signal& x, std::size_t t) {
  for (double v : x)
    if (!std::isfinite(v))
      throw NumericError("encoder_forward: non-finite iterate at iteration " +
                         std::to_string(t) + " (step size too large?)");
}

// Elementwise pass-through derivative of the soft threshold, read off the
// stored post-threshold iterate (the kink maps to 0).
inline void gate_in_place(Signal& delta, const Signal& x, bool nonneg) {
  for (std::size_t i = 0; i < delta.size(); ++i) {
    const bool open = nonneg ? x[i] > 0.0 : x[i] != 0.0;
    if (!open) delta[i] = 0.0;
  }
}

}  // namespace detail

// T unrolled FISTA iterations with tied weights:
//   x_t = S_{b_t}( (I - a C_s^T Phi^T Phi C_s) u_t + a C_s^T Phi^T z ),
//   u_t = x_{t-1} + w_t (x_{t-1} - x_{t-2}),
// with the standard momentum alignment w_t = (s_{t-1} - 1)/s_t (zero for the
// first step), so that with c = 1 the loop is exactly FISTA on the lasso.
inline ForwardTrace encoder_forward(const Signal& z, const Source& src,
                                    const CompressOp& phi, const EncoderConfig& cfg,
                                    bool track_residual = false) {
  cfg.validate();
  if (z.size() != phi.mz) throw DimensionError("encoder_forward: z length mismatch");
  if (phi.my < src.length())
    throw DimensionError("encoder_forward: M_y shorter than source");
  const std::size_t mx = phi.my - src.length() + 1;
  const std::size_t T = cfg.iters, K = cfg.backprop;

  // a * C_s^T Phi^T z is shared by every layer
  Signal r = apply_source_adjoint(src, phi.adjoint(z));
  for (double& v : r) v *= cfg.alpha;

  ForwardTrace trace;
  trace.first_index = static_cast<long>(T) - static_cast<long>(K) - 1;
  if (trace.first_index < -1) trace.first_index = -1;
  trace.tail.resize(static_cast<std::size_t>(static_cast<long>(T) - trace.first_index) + 1);
  auto tail_slot = [&](long idx) -> Signal* {
    return idx >= trace.first_index ? &trace.tail[static_cast<std::size_t>(idx - trace.first_index)]
                                    : nullptr;
  };
  if (Signal* slot = tail_slot(-1)) *slot = Signal(mx, 0.0);
  if (Signal* slot = tail_slot(0)) *slot = Signal(mx, 0.0);

  Signal x_prev(mx, 0.0);  // x_{t-1}
  Signal u(mx, 0.0);       // extrapolated point y_t; equals x_0 for t = 1
  double s_cur = 1.0;      // s_t of the *previous* layer (s_1 initially)

  double res_min = 0.0, res_max = 0.0, res_last = 0.0;
  const std::size_t res_window = T > 100 ? T - 100 : 0;
  bool res_seen = false;

  for (std::size_t t = 1; t <= T; ++t) {
    // p = u - a A^T A u + r
    Signal au = phi.apply(apply_source(src, u));
    Signal gr = apply_source_adjoint(src, phi.adjoint(au));
    Signal p(mx);
    for (std::size_t i = 0; i < mx; ++i) p[i] = u[i] - cfg.alpha * gr[i] + r[i];
    Signal x = shrink(std::move(p), bias_schedule(cfg, t), cfg.nonneg);
    detail::check_finite_iterate(x, t);
    assert(!cfg.nonneg || *std::min_element(x.begin(), x.end()) >= 0.0);

    if (Signal* slot = tail_slot(static_cast<long>(t))) *slot = x;

    if (track_residual && t > res_window) {
      Signal ax = phi.apply(apply_source(src, x));
      double acc = 0.0;
      for (std::size_t i = 0; i < ax.size(); ++i) {
        const double d = ax[i] - z[i];
        acc += d * d;
      }
      const double res = std::sqrt(acc);
      if (!res_seen) {
        res_min = res_max = res;
        res_seen = true;
      } else {
        res_min = std::min(res_min, res);
        res_max = std::max(res_max, res);
      }
      res_last = res;
    }

    const double s_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * s_cur * s_cur));
    const double w = (s_cur - 1.0) / s_next;
    for (std::size_t i = 0; i < mx; ++i) u[i] = x[i] + w * (x[i] - x_prev[i]);
    x_prev = std::move(x);
    s_cur = s_next;
  }

  if (track_residual && res_seen) {
    trace.residual_tracked = true;
    trace.residual_rel_var =
        res_last > 0.0 ? (res_max - res_min) / res_last : (res_max - res_min);
  }
  trace.xhat = std::move(x_prev);
  return trace;
}

// The decoder reconstructs full measurements from a code with C_s.
inline Signal decoder(const Source& src, const Signal& xhat) {
  return apply_source(src, xhat);
}

struct StabilityReport {
  double sigma_max = 0.0;
  double inv_sigma = 0.0;     // 1 / sigma_max
  double inv_sigma_sq = 0.0;  // 1 / sigma_max^2 (classical step bound)
  double alpha = 0.0;
  bool warn = false;  // alpha exceeds the classical bound
};

// Advisory step-size check against the spectral norm of Phi C_s. Both
// reciprocal forms are reported; the warning triggers on the classical
// 1/sigma^2 bound.
inline StabilityReport stability_check(const Source& src, const CompressOp& phi,
                                       double alpha) {
  StabilityReport rep;
  rep.alpha = alpha;
  rep.sigma_max = operator_spectral_norm(src, phi);
  if (rep.sigma_max > 0.0) {
    rep.inv_sigma = 1.0 / rep.sigma_max;
    rep.inv_sigma_sq = 1.0 / (rep.sigma_max * rep.sigma_max);
    rep.warn = alpha > rep.inv_sigma_sq;
  }
  return rep;
}

}  // namespace lsmbd

#endif  // LSMBD_ENCODER_HPP
