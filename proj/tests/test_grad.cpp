#include <catch_amalgamated.hpp>

#include <Eigen/Dense>

#include "lsmbd/grad.hpp"
#include "lsmbd/lista.hpp"
#include "lsmbd/rng.hpp"
#include "lsmbd/synthdata.hpp"
#include "oracles.hpp"

using namespace lsmbd;

namespace {

constexpr std::size_t kMs = 7, kMx = 10, kMz = 9;
constexpr std::size_t kMy = kMs + kMx - 1;  // 16

Signal random_signal(std::size_t n, Philox& rng) {
  Signal v(n);
  for (double& x : v) x = rng.next_normal();
  return v;
}

Signal unit(Signal v) {
  const double n = norm2(v);
  for (double& x : v) x /= n;
  return v;
}

// One synthetic example on the tiny instance.
Signal tiny_measurement(Philox& rng) {
  const ProblemDims dims(kMs, kMx, kMz, 1, 3);
  Matrix x = gen_sparse_filters(dims, 1, rng);
  Source s_true = gen_source(kMs);
  return apply_source(s_true, x.col_vec(0));
}

}  // namespace

TEST_CASE("stage-1 gradient matches finite differences on the dense oracle") {
  EncoderConfig cfg{.iters = 20, .alpha = 0.04, .lambda = 0.05, .decay = 0.97,
                    .nonneg = true, .backprop = 20};
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    Philox rng(seed);
    const Signal y = tiny_measurement(rng);
    const Signal s0 = unit(random_signal(kMs, rng));

    const auto got = grad_stage1_example(y, Source(s0), cfg);

    const auto f = [&](const oracle::Vec& s_raw) {
      const Eigen::MatrixXd cs = oracle::conv_matrix(s_raw, kMx);
      const Eigen::VectorXd xT =
          oracle::dense_unrolled(cs, oracle::to_eigen(y), cfg.alpha, cfg.lambda,
                                 cfg.decay, cfg.nonneg, cfg.iters);
      const Eigen::VectorXd res = oracle::to_eigen(y) - cs * xT;
      return 0.5 * res.squaredNorm();
    };
    REQUIRE(std::abs(f(s0) - got.loss) <= 1e-9 * std::max(1.0, got.loss));
    const auto fd = oracle::finite_difference(f, s0, 1e-6);
    REQUIRE(oracle::rel_error(got.grad, fd) < 1e-6);
  }
}

TEST_CASE("stage-2 gradient matches finite differences, z inside the graph") {
  EncoderConfig cfg{.iters = 20, .alpha = 0.03, .lambda = 0.05, .decay = 0.97,
                    .nonneg = true, .backprop = 20};
  for (std::uint64_t seed : {11u, 12u, 13u}) {
    Philox rng(seed);
    const Signal y = tiny_measurement(rng);
    const Source s(unit(random_signal(kMs, rng)));
    const Signal h0 = unit(random_signal(kMy + kMz - 1, rng));
    const Signal xtilde = random_signal(kMx, rng);

    const CompressionFilter hf(h0, kMy, kMz);
    const auto got = grad_stage2_example(y, xtilde, s, hf, cfg);

    const Eigen::MatrixXd cs = oracle::conv_matrix(s.s, kMx);
    const auto f = [&](const oracle::Vec& h_raw) {
      const Eigen::MatrixXd phi = oracle::toeplitz_matrix(h_raw, kMy, kMz);
      const Eigen::VectorXd z = phi * oracle::to_eigen(y);  // z moves with h
      const Eigen::MatrixXd a = phi * cs;
      const Eigen::VectorXd xT = oracle::dense_unrolled(
          a, z, cfg.alpha, cfg.lambda, cfg.decay, cfg.nonneg, cfg.iters);
      return 0.5 * (xT - oracle::to_eigen(xtilde)).squaredNorm();
    };
    REQUIRE(std::abs(f(h0) - got.loss) <= 1e-9 * std::max(1.0, got.loss));
    const auto fd = oracle::finite_difference(f, h0, 1e-6);
    REQUIRE(oracle::rel_error(got.grad, fd) < 1e-6);
  }
}

TEST_CASE("truncation freezes older iterates (K < T)") {
  EncoderConfig cfg{.iters = 20, .alpha = 0.03, .lambda = 0.05, .decay = 0.97,
                    .nonneg = true, .backprop = 6};
  Philox rng(21);
  const Signal y = tiny_measurement(rng);
  const Source s(unit(random_signal(kMs, rng)));
  const Signal h0 = unit(random_signal(kMy + kMz - 1, rng));
  const Signal xtilde = random_signal(kMx, rng);

  const CompressionFilter hf(h0, kMy, kMz);
  const auto got = grad_stage2_example(y, xtilde, s, hf, cfg);

  // freeze x_{T-K} and x_{T-K-1} from the unperturbed run, then resume with
  // the perturbed filter: the finite difference of that restricted function
  // is exactly the truncated gradient.
  const Eigen::MatrixXd cs = oracle::conv_matrix(s.s, kMx);
  const std::size_t t_resume = cfg.iters - cfg.backprop + 1;  // 15
  Eigen::VectorXd frozen_m1, frozen_m2;
  {
    const Eigen::MatrixXd phi0 = oracle::toeplitz_matrix(h0, kMy, kMz);
    const Eigen::VectorXd z0 = phi0 * oracle::to_eigen(y);
    const Eigen::MatrixXd a0 = phi0 * cs;
    frozen_m1 = oracle::dense_unrolled(a0, z0, cfg.alpha, cfg.lambda, cfg.decay,
                                       cfg.nonneg, cfg.iters - cfg.backprop);
    frozen_m2 = oracle::dense_unrolled(a0, z0, cfg.alpha, cfg.lambda, cfg.decay,
                                       cfg.nonneg, cfg.iters - cfg.backprop - 1);
  }
  const auto f = [&](const oracle::Vec& h_raw) {
    const Eigen::MatrixXd phi = oracle::toeplitz_matrix(h_raw, kMy, kMz);
    const Eigen::VectorXd z = phi * oracle::to_eigen(y);
    const Eigen::MatrixXd a = phi * cs;
    const Eigen::VectorXd xT =
        oracle::dense_unrolled(a, z, cfg.alpha, cfg.lambda, cfg.decay, cfg.nonneg,
                               cfg.iters, t_resume, frozen_m1, frozen_m2);
    return 0.5 * (xT - oracle::to_eigen(xtilde)).squaredNorm();
  };
  const auto fd = oracle::finite_difference(f, h0, 1e-6);
  REQUIRE(oracle::rel_error(got.grad, fd) < 1e-6);
}

TEST_CASE("hand-derived one-layer gradient (K = T = 1)") {
  // x_1 = S_b(a C_s^T Phi^T Phi y), loss = 1/2 ||x_1 - xtilde||^2; chain rule
  // written out against the dense indicator matrices dPhi/dh_q.
  EncoderConfig cfg{.iters = 1, .alpha = 0.05, .lambda = 0.02, .decay = 1.0,
                    .nonneg = true, .backprop = 1};
  Philox rng(31);
  const Signal y = tiny_measurement(rng);
  const Source s(unit(random_signal(kMs, rng)));
  const Signal h0 = unit(random_signal(kMy + kMz - 1, rng));
  const Signal xtilde = random_signal(kMx, rng);
  const CompressionFilter hf(h0, kMy, kMz);

  const auto got = grad_stage2_example(y, xtilde, s, hf, cfg);

  const Eigen::MatrixXd cs = oracle::conv_matrix(s.s, kMx);
  const Eigen::MatrixXd phi = oracle::toeplitz_matrix(h0, kMy, kMz);
  const Eigen::VectorXd ye = oracle::to_eigen(y);
  const Eigen::VectorXd pre = cfg.alpha * cs.transpose() * phi.transpose() * (phi * ye);
  const double b = cfg.alpha * cfg.decay * cfg.lambda;
  Eigen::VectorXd x1(kMx), gate(kMx);
  for (Eigen::Index i = 0; i < pre.size(); ++i) {
    x1[i] = pre[i] > b ? pre[i] - b : 0.0;
    gate[i] = pre[i] > b ? 1.0 : 0.0;
  }
  const Eigen::VectorXd delta =
      gate.cwiseProduct(x1 - oracle::to_eigen(xtilde));
  Signal expect(kMy + kMz - 1, 0.0);
  for (std::size_t q = 0; q < expect.size(); ++q) {
    Eigen::MatrixXd dphi = Eigen::MatrixXd::Zero(kMz, kMy);
    for (std::size_t i = 0; i < kMz; ++i)
      for (std::size_t j = 0; j < kMy; ++j)
        if (kMy - 1 + i - j == q) dphi(static_cast<Eigen::Index>(i),
                                       static_cast<Eigen::Index>(j)) = 1.0;
    const Eigen::VectorXd dpre =
        cfg.alpha * cs.transpose() *
        (dphi.transpose() * (phi * ye) + phi.transpose() * (dphi * ye));
    expect[q] = delta.dot(dpre);
  }
  REQUIRE(oracle::rel_error(got.grad, expect) < 1e-10);
}

TEST_CASE("huge threshold kills every unit and the gradient is exactly zero") {
  EncoderConfig cfg{.iters = 8, .alpha = 0.03, .lambda = 1e6, .decay = 1.0,
                    .nonneg = true, .backprop = 8};
  Philox rng(41);
  const Signal y = tiny_measurement(rng);
  const Source s(unit(random_signal(kMs, rng)));
  const Signal h0 = unit(random_signal(kMy + kMz - 1, rng));
  const Signal xtilde = random_signal(kMx, rng);
  const auto got =
      grad_stage2_example(y, xtilde, s, CompressionFilter(h0, kMy, kMz), cfg);
  for (double g : got.grad) REQUIRE(g == 0.0);
  for (double v : got.xhat) REQUIRE(v == 0.0);
}

TEST_CASE("lista gradients match finite differences for every parameter") {
  Philox rng(51);
  const Signal y = tiny_measurement(rng);
  const Signal xtilde = random_signal(kMx, rng);
  const Signal h0 = unit(random_signal(kMy + kMz - 1, rng));
  const CompressionFilter hf(h0, kMy, kMz);

  ListaParams par;
  par.layers = 7;
  par.nonneg = true;
  par.w_d = random_signal(kMs, rng);
  par.w_e = random_signal(kMs, rng);
  par.p = random_signal(kMs, rng);
  for (double& v : par.w_d) v *= 0.3;
  for (double& v : par.w_e) v *= 0.3;
  for (double& v : par.p) v *= 0.3;
  par.b = 0.01;

  const auto got = lista_grad_example(y, xtilde, par, hf);

  auto loss_with = [&](const ListaParams& pp, const Signal& hh) {
    const CompressionFilter hfp(hh, kMy, kMz);
    const CompressOp phi = CompressOp::structured(hfp);
    const Signal z = apply_compression(hfp, y);
    const auto tr = lista_forward(z, pp, phi);
    double acc = 0.0;
    for (std::size_t i = 0; i < tr.xhat.size(); ++i) {
      const double d = tr.xhat[i] - xtilde[i];
      acc += d * d;
    }
    return 0.5 * acc;
  };
  REQUIRE(std::abs(loss_with(par, h0) - got.loss) <= 1e-12);

  SECTION("w_d") {
    const auto fd = oracle::finite_difference(
        [&](const oracle::Vec& v) {
          ListaParams pp = par;
          pp.w_d = v;
          return loss_with(pp, h0);
        },
        par.w_d, 1e-6);
    REQUIRE(oracle::rel_error(got.g_wd, fd) < 1e-6);
  }
  SECTION("w_e") {
    const auto fd = oracle::finite_difference(
        [&](const oracle::Vec& v) {
          ListaParams pp = par;
          pp.w_e = v;
          return loss_with(pp, h0);
        },
        par.w_e, 1e-6);
    REQUIRE(oracle::rel_error(got.g_we, fd) < 1e-6);
  }
  SECTION("p") {
    const auto fd = oracle::finite_difference(
        [&](const oracle::Vec& v) {
          ListaParams pp = par;
          pp.p = v;
          return loss_with(pp, h0);
        },
        par.p, 1e-6);
    REQUIRE(oracle::rel_error(got.g_p, fd) < 1e-6);
  }
  SECTION("h") {
    const auto fd = oracle::finite_difference(
        [&](const oracle::Vec& v) { return loss_with(par, v); }, h0, 1e-6);
    REQUIRE(oracle::rel_error(got.g_h, fd) < 1e-6);
  }
  SECTION("b") {
    const double step = 1e-6;
    ListaParams pp = par;
    pp.b = par.b + step;
    const double fp = loss_with(pp, h0);
    pp.b = par.b - step;
    const double fm = loss_with(pp, h0);
    const double fd = (fp - fm) / (2.0 * step);
    REQUIRE(got.g_b == Catch::Approx(fd).margin(1e-6 * std::max(1.0, std::abs(fd))));
  }
}
