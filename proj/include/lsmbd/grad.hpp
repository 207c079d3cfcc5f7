#ifndef LSMBD_GRAD_HPP
#define LSMBD_GRAD_HPP

#include <cstddef>
#include <vector>

#include "lsmbd/encoder.hpp"
#include "lsmbd/operators.hpp"

namespace lsmbd {

// Reverse-mode gradients through the unrolled encoder, truncated to the last
// K layers: x_{T-K} (and everything older) is treated as a constant. All
// adjoint propagation goes through convolution/correlation kernels; no dense
// operator is ever formed.

struct ExampleGrad {
  Signal grad;   // parameter-shaped: M_s (stage 1) or M_h (stage 2)
  double loss = 0.0;
  Signal xhat;   // encoder output, reused by the training loop for metrics
};

namespace detail {

// Extrapolation weights w_t for u_t = x_{t-1} + w_t (x_{t-1} - x_{t-2}),
// t = 1..T; w_1 = w_2 = 0 under the standard FISTA alignment.
inline std::vector<double> extrapolation_weights(std::size_t T) {
  std::vector<double> w(T + 1, 0.0);
  double s_cur = 1.0;
  for (std::size_t t = 1; t <= T; ++t) {
    const double s_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * s_cur * s_cur));
    if (t + 1 <= T) w[t + 1] = (s_cur - 1.0) / s_next;
    s_cur = s_next;
  }
  return w;
}

inline bool all_zero(const Signal& v) {
  for (double x : v)
    if (x != 0.0) return false;
  return true;
}

}  // namespace detail

// Stage 1: Phi = I, loss = 1/2 ||y - C_s x_T||^2, gradient with respect to
// the (unnormalized) source.
inline ExampleGrad grad_stage1_example(const Signal& y, const Source& src,
                                       const EncoderConfig& cfg) {
  const CompressOp phi = CompressOp::identity(y.size());
  ForwardTrace trace = encoder_forward(y, src, phi, cfg);
  const std::size_t ms = src.length();
  const std::size_t T = cfg.iters, K = cfg.backprop;

  ExampleGrad out;
  out.grad.assign(ms, 0.0);

  // decoder residual e = yhat - y
  Signal e = decoder(src, trace.xhat);
  double loss = 0.0;
  for (std::size_t i = 0; i < e.size(); ++i) {
    e[i] -= y[i];
    loss += e[i] * e[i];
  }
  out.loss = 0.5 * loss;

  // direct decoder term d/ds <e, s * x_T>
  {
    Signal g = valid_correlation(e, trace.xhat, ms);
    for (std::size_t i = 0; i < ms; ++i) out.grad[i] += g[i];
  }

  const auto weights = detail::extrapolation_weights(T);
  auto tail_at = [&](long idx) -> const Signal& {
    return trace.tail[static_cast<std::size_t>(idx - trace.first_index)];
  };

  // adjoints of iterates x_{T-K-1} .. x_T
  std::vector<Signal> deltas(trace.tail.size());
  const std::size_t mx = trace.xhat.size();
  for (auto& d : deltas) d.assign(mx, 0.0);
  deltas.back() = apply_source_adjoint(src, e);  // dloss/dx_T

  const long t_lo = static_cast<long>(T) - static_cast<long>(K) + 1;
  for (long t = static_cast<long>(T); t >= t_lo; --t) {
    Signal gamma = deltas[static_cast<std::size_t>(t - trace.first_index)];
    detail::gate_in_place(gamma, tail_at(t), cfg.nonneg);
    if (detail::all_zero(gamma)) continue;

    // delta_u = gamma - a C_s^T C_s gamma  (Phi = I)
    Signal a = apply_source(src, gamma);
    Signal back = apply_source_adjoint(src, a);

    const double w = weights[static_cast<std::size_t>(t)];
    const Signal& xm1 = tail_at(t - 1);
    const Signal& xm2 = tail_at(t - 2 >= trace.first_index ? t - 2 : trace.first_index);
    // u_t = (1+w) x_{t-1} - w x_{t-2}
    Signal u(mx);
    if (w == 0.0) {
      u = xm1;
    } else {
      for (std::size_t i = 0; i < mx; ++i)
        u[i] = (1.0 + w) * xm1[i] - w * xm2[i];
    }

    // parameter terms: a * [ corr(y, gamma) - corr(C_s u, gamma) - corr(C_s^T C_s gamma -> a, u) ]
    {
      Signal cu = apply_source(src, u);
      Signal g1 = valid_correlation(y, gamma, ms);
      Signal g2 = valid_correlation(cu, gamma, ms);
      Signal g3 = valid_correlation(a, u, ms);
      for (std::size_t i = 0; i < ms; ++i)
        out.grad[i] += cfg.alpha * (g1[i] - g2[i] - g3[i]);
    }

    // chain through the extrapolation into x_{t-1}, x_{t-2}
    Signal du(mx);
    for (std::size_t i = 0; i < mx; ++i) du[i] = gamma[i] - cfg.alpha * back[i];
    {
      Signal& dm1 = deltas[static_cast<std::size_t>(t - 1 - trace.first_index)];
      for (std::size_t i = 0; i < mx; ++i) dm1[i] += (1.0 + w) * du[i];
    }
    if (t - 2 >= trace.first_index && w != 0.0) {
      Signal& dm2 = deltas[static_cast<std::size_t>(t - 2 - trace.first_index)];
      for (std::size_t i = 0; i < mx; ++i) dm2[i] -= w * du[i];
    }
  }

  out.xhat = std::move(trace.xhat);
  return out;
}

// Stage 2: z = Phi y is recomputed from the current filter inside the
// differentiated graph, loss = 1/2 ||x_T - xtilde||^2, gradient with respect
// to the (unnormalized) filter h. The source is frozen.
inline ExampleGrad grad_stage2_example(const Signal& y, const Signal& xtilde,
                                       const Source& src, const CompressionFilter& hf,
                                       const EncoderConfig& cfg) {
  if (y.size() != hf.m_y) throw DimensionError("grad_stage2_example: y length mismatch");
  const CompressOp phi = CompressOp::structured(hf);
  const Signal z = apply_compression(hf, y);
  ForwardTrace trace = encoder_forward(z, src, phi, cfg);
  const std::size_t T = cfg.iters, K = cfg.backprop;
  const std::size_t mx = trace.xhat.size();
  if (xtilde.size() != mx) throw DimensionError("grad_stage2_example: target length mismatch");

  ExampleGrad out;
  out.grad.assign(hf.m_h(), 0.0);

  Signal dT(mx);
  double loss = 0.0;
  for (std::size_t i = 0; i < mx; ++i) {
    dT[i] = trace.xhat[i] - xtilde[i];
    loss += dT[i] * dT[i];
  }
  out.loss = 0.5 * loss;

  const auto weights = detail::extrapolation_weights(T);
  auto tail_at = [&](long idx) -> const Signal& {
    return trace.tail[static_cast<std::size_t>(idx - trace.first_index)];
  };

  std::vector<Signal> deltas(trace.tail.size());
  for (auto& d : deltas) d.assign(mx, 0.0);
  deltas.back() = std::move(dT);

  const long t_lo = static_cast<long>(T) - static_cast<long>(K) + 1;
  for (long t = static_cast<long>(T); t >= t_lo; --t) {
    Signal gamma = deltas[static_cast<std::size_t>(t - trace.first_index)];
    detail::gate_in_place(gamma, tail_at(t), cfg.nonneg);
    if (detail::all_zero(gamma)) continue;

    Signal a = apply_source(src, gamma);           // C_s gamma
    Signal aphi = apply_compression(hf, a);        // Phi C_s gamma
    Signal aphiphi = apply_compression_adjoint(hf, aphi);
    Signal back = apply_source_adjoint(src, aphiphi);

    const double w = weights[static_cast<std::size_t>(t)];
    const Signal& xm1 = tail_at(t - 1);
    const Signal& xm2 = tail_at(t - 2 >= trace.first_index ? t - 2 : trace.first_index);
    Signal u(mx);
    if (w == 0.0) {
      u = xm1;
    } else {
      for (std::size_t i = 0; i < mx; ++i)
        u[i] = (1.0 + w) * xm1[i] - w * xm2[i];
    }

    {
      Signal cu = apply_source(src, u);            // C_s u
      Signal phicu = apply_compression(hf, cu);    // Phi C_s u
      // from -a <gamma, C_s^T Phi^T Phi C_s u>
      Signal g1 = filter_grad_kernel(hf, phicu, a);
      Signal g2 = filter_grad_kernel(hf, aphi, cu);
      // from +a <gamma, C_s^T Phi^T Phi y>: both Phi factors carry h
      Signal g3 = filter_grad_kernel(hf, z, a);
      Signal g4 = filter_grad_kernel(hf, aphi, y);
      for (std::size_t i = 0; i < out.grad.size(); ++i)
        out.grad[i] += cfg.alpha * (g3[i] + g4[i] - g1[i] - g2[i]);
    }

    Signal du(mx);
    for (std::size_t i = 0; i < mx; ++i) du[i] = gamma[i] - cfg.alpha * back[i];
    {
      Signal& dm1 = deltas[static_cast<std::size_t>(t - 1 - trace.first_index)];
      for (std::size_t i = 0; i < mx; ++i) dm1[i] += (1.0 + w) * du[i];
    }
    if (t - 2 >= trace.first_index && w != 0.0) {
      Signal& dm2 = deltas[static_cast<std::size_t>(t - 2 - trace.first_index)];
      for (std::size_t i = 0; i < mx; ++i) dm2[i] -= w * du[i];
    }
  }

  out.xhat = std::move(trace.xhat);
  return out;
}

}  // namespace lsmbd

#endif  // LSMBD_GRAD_HPP
