#ifndef LSMBD_TESTS_ORACLES_HPP
#define LSMBD_TESTS_ORACLES_HPP

// Independent reference implementations used only to check the library.
// Everything here is written from the mathematical definitions with plain
// loops (or Eigen), deliberately not sharing code with the library paths
// under test.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

namespace oracle {

using Vec = std::vector<double>;

// c[m] = sum_k a[k] b[m-k], written as the plain double loop.
inline Vec conv_full(const Vec& a, const Vec& b) {
  Vec c(a.size() + b.size() - 1, 0.0);
  for (std::size_t m = 0; m < c.size(); ++m)
    for (std::size_t k = 0; k < a.size(); ++k) {
      if (m < k) continue;
      const std::size_t j = m - k;
      if (j < b.size()) c[m] += a[k] * b[j];
    }
  return c;
}

// Dense convolution matrix: (C_s)[m][j] = s[m - j].
inline Eigen::MatrixXd conv_matrix(const Vec& s, std::size_t m_x) {
  const std::size_t m_y = m_x + s.size() - 1;
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m_y),
                                            static_cast<Eigen::Index>(m_x));
  for (std::size_t m = 0; m < m_y; ++m)
    for (std::size_t j = 0; j < m_x; ++j) {
      if (m < j) continue;
      const std::size_t k = m - j;
      if (k < s.size()) c(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(j)) = s[k];
    }
  return c;
}

// Dense compression matrix straight from the displayed entries
// Phi[i][j] = h[M_y - 1 + i - j].
inline Eigen::MatrixXd toeplitz_matrix(const Vec& h, std::size_t m_y, std::size_t m_z) {
  Eigen::MatrixXd phi(static_cast<Eigen::Index>(m_z), static_cast<Eigen::Index>(m_y));
  for (std::size_t i = 0; i < m_z; ++i)
    for (std::size_t j = 0; j < m_y; ++j)
      phi(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = h[m_y - 1 + i - j];
  return phi;
}

inline Eigen::VectorXd to_eigen(const Vec& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline Vec from_eigen(const Eigen::VectorXd& v) {
  return Vec(v.data(), v.data() + v.size());
}

// Textbook FISTA with constant step on 1/2 ||b - A x||^2 + lambda ||x||_1,
// dense algebra throughout. Records every iterate x_1 .. x_T.
// one_sided selects max(v - t, 0) in place of the two-sided shrink.
inline std::vector<Vec> fista_dense(const Eigen::MatrixXd& a, const Eigen::VectorXd& b,
                                    double step, double lambda, std::size_t iters,
                                    bool one_sided) {
  const Eigen::Index n = a.cols();
  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd y = x;
  double t = 1.0;
  std::vector<Vec> iterates;
  auto shrink = [&](Eigen::VectorXd v) {
    const double thr = step * lambda;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      if (one_sided)
        v[i] = v[i] > thr ? v[i] - thr : 0.0;
      else if (v[i] > thr)
        v[i] -= thr;
      else if (v[i] < -thr)
        v[i] += thr;
      else
        v[i] = 0.0;
    }
    return v;
  };
  for (std::size_t k = 1; k <= iters; ++k) {
    const Eigen::VectorXd grad = a.transpose() * (a * y - b);
    const Eigen::VectorXd x_new = shrink(y - step * grad);
    const double t_new = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    y = x_new + ((t - 1.0) / t_new) * (x_new - x);
    x = x_new;
    t = t_new;
    iterates.push_back(from_eigen(x));
  }
  return iterates;
}

// Dense re-implementation of the unrolled iteration
//   x_t = S_{b_t}( (I - a A^T A) u_t + a A^T z ),  A = Phi C_s,
//   u_t = x_{t-1} + w_t (x_{t-1} - x_{t-2}),  w_t = (s_{t-1}-1)/s_t,
//   b_t = a c^t lambda,
// with an arbitrary starting layer so truncated-backprop semantics (older
// iterates frozen) can be finite-differenced directly.
inline Eigen::VectorXd dense_unrolled(const Eigen::MatrixXd& a, const Eigen::VectorXd& z,
                                      double alpha, double lambda, double c, bool nonneg,
                                      std::size_t iters, std::size_t t_start = 1,
                                      Eigen::VectorXd xm1 = Eigen::VectorXd(),
                                      Eigen::VectorXd xm2 = Eigen::VectorXd()) {
  const Eigen::Index n = a.cols();
  if (xm1.size() == 0) xm1 = Eigen::VectorXd::Zero(n);
  if (xm2.size() == 0) xm2 = Eigen::VectorXd::Zero(n);
  // momentum scalars up to the final layer
  std::vector<double> w(iters + 2, 0.0);
  {
    double s = 1.0;
    for (std::size_t t = 1; t <= iters; ++t) {
      const double s_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * s * s));
      if (t + 1 <= iters) w[t + 1] = (s - 1.0) / s_next;
      s = s_next;
    }
  }
  const Eigen::VectorXd atz = a.transpose() * z;
  for (std::size_t t = t_start; t <= iters; ++t) {
    const Eigen::VectorXd u = xm1 + w[t] * (xm1 - xm2);
    Eigen::VectorXd p = u - alpha * (a.transpose() * (a * u)) + alpha * atz;
    const double b = alpha * std::pow(c, static_cast<double>(t)) * lambda;
    for (Eigen::Index i = 0; i < p.size(); ++i) {
      if (nonneg)
        p[i] = p[i] > b ? p[i] - b : 0.0;
      else if (p[i] > b)
        p[i] -= b;
      else if (p[i] < -b)
        p[i] += b;
      else
        p[i] = 0.0;
    }
    xm2 = xm1;
    xm1 = p;
  }
  return xm1;
}

// Central finite differences of a scalar function of a vector parameter.
inline Vec finite_difference(const std::function<double(const Vec&)>& f, Vec theta,
                             double step) {
  Vec g(theta.size());
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double keep = theta[i];
    theta[i] = keep + step;
    const double fp = f(theta);
    theta[i] = keep - step;
    const double fm = f(theta);
    theta[i] = keep;
    g[i] = (fp - fm) / (2.0 * step);
  }
  return g;
}

inline double rel_error(const Vec& a, const Vec& b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += b[i] * b[i];
  }
  return std::sqrt(num) / std::sqrt(den);
}

}  // namespace oracle

#endif  // LSMBD_TESTS_ORACLES_HPP
