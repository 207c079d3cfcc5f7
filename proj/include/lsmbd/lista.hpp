#ifndef LSMBD_LISTA_HPP
#define LSMBD_LISTA_HPP

#include <cmath>
#include <cstddef>
#include <vector>

#include "lsmbd/encoder.hpp"
#include "lsmbd/operators.hpp"

namespace lsmbd {

// Shallow learned encoder: T_l proximal-gradient steps
//   x_t = S_b( (I - W_e Phi^T Phi W_d) x_{t-1} + P Phi^T z )
// with a single shared scalar bias. W_d acts as a convolution with kernel
// w_d (M_x -> M_y); W_e and P act as valid correlations with kernels w_e, p
// (M_y -> M_x). All kernels share the source's support length.
struct ListaParams {
  Signal w_d, w_e, p;  // length M_s
  double b = 0.0;      // used as |b|, keeping the effective bias nonnegative
  std::size_t layers = 20;
  bool nonneg = true;

  void validate() const {
    if (w_d.empty() || w_d.size() != w_e.size() || w_d.size() != p.size())
      throw DimensionError("ListaParams: kernels must share one length");
    if (layers < 1) throw ParameterError("ListaParams: layers must be >= 1");
    if (!all_finite(w_d) || !all_finite(w_e) || !all_finite(p) || !std::isfinite(b))
      throw ParameterError("ListaParams: non-finite parameters");
  }
};

struct ListaTrace {
  Signal xhat;
  std::vector<Signal> iters;  // x_0 .. x_T, all layers kept (T is small)
};

inline ListaTrace lista_forward(const Signal& z, const ListaParams& par,
                                const CompressOp& phi) {
  par.validate();
  if (z.size() != phi.mz) throw DimensionError("lista_forward: z length mismatch");
  const std::size_t ms = par.w_d.size();
  if (phi.my < ms) throw DimensionError("lista_forward: M_y shorter than kernels");
  const std::size_t mx = phi.my - ms + 1;
  const double bias = std::abs(par.b);

  Signal r = valid_correlation(phi.adjoint(z), par.p, mx);

  ListaTrace trace;
  trace.iters.reserve(par.layers + 1);
  trace.iters.emplace_back(mx, 0.0);
  Signal x(mx, 0.0);
  for (std::size_t t = 1; t <= par.layers; ++t) {
    Signal q = linear_convolve(par.w_d, x);               // W_d x
    Signal qc = phi.adjoint(phi.apply(q));                // Phi^T Phi W_d x
    Signal wq = valid_correlation(qc, par.w_e, mx);       // W_e ...
    Signal pre(mx);
    for (std::size_t i = 0; i < mx; ++i) pre[i] = x[i] - wq[i] + r[i];
    x = shrink(std::move(pre), bias, par.nonneg);
    detail::check_finite_iterate(x, t);
    trace.iters.push_back(x);
  }
  trace.xhat = std::move(x);
  return trace;
}

struct ListaGrad {
  Signal g_wd, g_we, g_p, g_h;
  double g_b = 0.0;
  double loss = 0.0;
  Signal xhat;
};

// Full backprop through all layers (T_l is small, no truncation); the
// compressed input z = Phi y is part of the differentiated graph, as in the
// stage-2 training of the deep encoder.
inline ListaGrad lista_grad_example(const Signal& y, const Signal& xtilde,
                                    const ListaParams& par, const CompressionFilter& hf) {
  if (y.size() != hf.m_y) throw DimensionError("lista_grad_example: y length mismatch");
  const CompressOp phi = CompressOp::structured(hf);
  const Signal z = apply_compression(hf, y);
  ListaTrace trace = lista_forward(z, par, phi);
  const std::size_t ms = par.w_d.size();
  const std::size_t mx = trace.xhat.size();
  if (xtilde.size() != mx) throw DimensionError("lista_grad_example: target length mismatch");

  ListaGrad out;
  out.g_wd.assign(ms, 0.0);
  out.g_we.assign(ms, 0.0);
  out.g_p.assign(ms, 0.0);
  out.g_h.assign(hf.m_h(), 0.0);

  Signal delta(mx);
  double loss = 0.0;
  for (std::size_t i = 0; i < mx; ++i) {
    delta[i] = trace.xhat[i] - xtilde[i];
    loss += delta[i] * delta[i];
  }
  out.loss = 0.5 * loss;

  const Signal phiT_z = apply_compression_adjoint(hf, z);
  const double bsign = par.b >= 0.0 ? 1.0 : -1.0;

  for (std::size_t t = par.layers; t >= 1; --t) {
    const Signal& xt = trace.iters[t];
    const Signal& xin = trace.iters[t - 1];

    Signal gamma = delta;
    detail::gate_in_place(gamma, xt, par.nonneg);

    // bias: d S_{|b|}(pre) / d b = -gate * (nonneg ? 1 : sign(x)) * sign(b)
    double gb = 0.0;
    for (std::size_t i = 0; i < mx; ++i) {
      if (gamma[i] == 0.0) continue;
      const double dir = par.nonneg ? 1.0 : (xt[i] > 0.0 ? 1.0 : -1.0);
      gb -= gamma[i] * dir;
    }
    out.g_b += gb * bsign;

    bool active = false;
    for (double g : gamma)
      if (g != 0.0) { active = true; break; }
    if (!active) {
      delta.assign(mx, 0.0);
      continue;
    }

    // recompute the forward intermediates of this layer
    Signal q = linear_convolve(par.w_d, xin);      // W_d x_{t-1}
    Signal qphi = apply_compression(hf, q);        // Phi W_d x
    Signal qc = apply_compression_adjoint(hf, qphi);

    Signal v1 = linear_convolve(par.w_e, gamma);   // W_e^T gamma
    Signal v1phi = apply_compression(hf, v1);
    Signal v1c = apply_compression_adjoint(hf, v1phi);

    // parameter gradients of <gamma, pre_t>
    {
      Signal g = valid_correlation(qc, gamma, ms);  // d/d w_e
      for (std::size_t i = 0; i < ms; ++i) out.g_we[i] -= g[i];
    }
    {
      Signal g = valid_correlation(v1c, xin, ms);   // d/d w_d
      for (std::size_t i = 0; i < ms; ++i) out.g_wd[i] -= g[i];
    }
    {
      Signal g = valid_correlation(phiT_z, gamma, ms);  // d/d p
      for (std::size_t i = 0; i < ms; ++i) out.g_p[i] += g[i];
    }
    {
      Signal g1 = filter_grad_kernel(hf, qphi, v1);   // -<W_e^T gamma, Phi^T Phi W_d x>
      Signal g2 = filter_grad_kernel(hf, v1phi, q);
      Signal pg = linear_convolve(par.p, gamma);      // P^T gamma
      Signal pgphi = apply_compression(hf, pg);
      Signal g3 = filter_grad_kernel(hf, z, pg);      // +<P^T gamma, Phi^T Phi y>
      Signal g4 = filter_grad_kernel(hf, pgphi, y);
      for (std::size_t i = 0; i < out.g_h.size(); ++i)
        out.g_h[i] += g3[i] + g4[i] - g1[i] - g2[i];
    }

    // delta_{t-1} = gamma - W_d^T Phi^T Phi W_e^T gamma
    Signal wback = valid_correlation(v1c, par.w_d, mx);
    for (std::size_t i = 0; i < mx; ++i) delta[i] = gamma[i] - wback[i];
  }

  out.xhat = std::move(trace.xhat);
  return out;
}

}  // namespace lsmbd

#endif  // LSMBD_LISTA_HPP
