#ifndef LSMBD_ADAM_HPP
#define LSMBD_ADAM_HPP

#include <cmath>
#include <cstddef>

#include "lsmbd/conv.hpp"
#include "lsmbd/errors.hpp"

namespace lsmbd {

// Standard bias-corrected ADAM. The learning rate is passed per step so the
// schedule stays outside the optimizer state.
struct AdamState {
  Signal m;  // first moment
  Signal v;  // second moment
  std::size_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  explicit AdamState(std::size_t dim, double epsilon = 1e-8)
      : m(dim, 0.0), v(dim, 0.0), eps(epsilon) {}
};

inline void adam_step(AdamState& st, const Signal& grad, Signal& param, double lr) {
  if (grad.size() != param.size() || st.m.size() != param.size())
    throw DimensionError("adam_step: shape mismatch");
  st.step += 1;
  const double bc1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step));
  const double bc2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step));
  for (std::size_t i = 0; i < param.size(); ++i) {
    st.m[i] = st.beta1 * st.m[i] + (1.0 - st.beta1) * grad[i];
    st.v[i] = st.beta2 * st.v[i] + (1.0 - st.beta2) * grad[i] * grad[i];
    const double mhat = st.m[i] / bc1;
    const double vhat = st.v[i] / bc2;
    param[i] -= lr * mhat / (std::sqrt(vhat) + st.eps);
  }
}

}  // namespace lsmbd

#endif  // LSMBD_ADAM_HPP
