#include <catch_amalgamated.hpp>

#include <cmath>

#include "lsmbd/metrics.hpp"
#include "lsmbd/synthdata.hpp"
#include "lsmbd/training.hpp"
#include "oracles.hpp"

using namespace lsmbd;

namespace {
Signal random_signal(std::size_t n, Philox& rng) {
  Signal v(n);
  for (double& x : v) x = rng.next_normal();
  return v;
}
}  // namespace

TEST_CASE("nmse_db") {
  Philox rng(3);
  Matrix x(10, 4);
  for (double& v : x.data) v = rng.next_normal();

  SECTION("exact match returns the -inf sentinel") {
    REQUIRE(nmse_db(x, x) == -std::numeric_limits<double>::infinity());
    REQUIRE(nmse_success(nmse_db(x, x)));
  }
  SECTION("relative error 1e-3 is -60 dB") {
    const double xn = frobenius_norm(x);
    Matrix noise(10, 4);
    for (double& v : noise.data) v = rng.next_normal();
    const double scale = 1e-3 * xn / frobenius_norm(noise);
    Matrix xhat = x;
    for (std::size_t i = 0; i < x.data.size(); ++i)
      xhat.data[i] += scale * noise.data[i];
    REQUIRE(nmse_db(x, xhat) == Catch::Approx(-60.0).margin(1e-9));
  }
  SECTION("relative Frobenius 0.00316 sits at about -50 dB") {
    const double xn = frobenius_norm(x);
    Matrix noise(10, 4);
    for (double& v : noise.data) v = rng.next_normal();
    const double scale = 0.00316 * xn / frobenius_norm(noise);
    Matrix xhat = x;
    for (std::size_t i = 0; i < x.data.size(); ++i)
      xhat.data[i] += scale * noise.data[i];
    REQUIRE(nmse_db(x, xhat) == Catch::Approx(-50.0).margin(0.1));
  }
  SECTION("zero reference is rejected") {
    const Matrix z(3, 3);
    REQUIRE_THROWS_AS(nmse_db(z, z), ParameterError);
  }
  SECTION("success flag is exactly the -50 dB cut") {
    REQUIRE(nmse_success(-50.0000001));
    REQUIRE_FALSE(nmse_success(-50.0));
    REQUIRE_FALSE(nmse_success(-49.9999999));
  }
}

TEST_CASE("source_error") {
  const Source s = gen_source(21);
  SECTION("identical sources give zero") {
    REQUIRE(source_error(s, s, false) == 0.0);
    REQUIRE(source_error(s, s, true) <= 1e-12);
  }
  SECTION("orthogonal unit sources give one") {
    Signal a(4, 0.0), b(4, 0.0);
    a[0] = 1.0;
    b[2] = 1.0;
    REQUIRE(source_error(Source(a), Source(b), false) == 1.0);
  }
  SECTION("sign flip: aligned recovers zero, raw clamps to one with a flag") {
    Signal neg = s.s;
    for (double& v : neg) v = -v;
    const Source sneg(neg);
    REQUIRE(source_error(s, sneg, true) <= 1e-12);
    bool clamped = false;
    REQUIRE(source_error(s, sneg, false, &clamped) == 1.0);
    REQUIRE(clamped);
    REQUIRE(source_error(s, s, false, &clamped) == 0.0);
    REQUIRE_FALSE(clamped);
  }
  SECTION("circular shift: aligned recovers zero") {
    Signal shifted(s.s.size());
    for (std::size_t k = 0; k < shifted.size(); ++k)
      shifted[k] = s.s[(k + 5) % shifted.size()];
    REQUIRE(source_error(s, Source(shifted), true) <= 1e-12);
    REQUIRE(source_error(s, Source(shifted), false) > 0.5);
  }
  SECTION("aligned never exceeds raw") {
    Philox rng(5);
    for (int rep = 0; rep < 50; ++rep) {
      const Source a(project_unit_norm(random_signal(13, rng)));
      const Source b(project_unit_norm(random_signal(13, rng)));
      REQUIRE(source_error(a, b, true) <= source_error(a, b, false) + 1e-15);
    }
  }
  SECTION("non-unit inputs are rejected") {
    Signal big(5, 1.0);
    REQUIRE_THROWS_AS(source_error(Source(big), s, false), DimensionError);
    Signal bad(21, 0.3);
    REQUIRE_THROWS_AS(source_error(Source(bad), s, false), ParameterError);
  }
}

TEST_CASE("gaussian compressors") {
  const std::size_t my = 30, mz = 12;
  SECTION("structured draw obeys the filter invariants") {
    Philox rng(7);
    const CompressOp op = make_gaussian_compressor(my, mz, true, rng);
    REQUIRE(op.kind == CompressOp::Kind::structured);
    REQUIRE(op.filt.m_h() == my + mz - 1);
    REQUIRE(std::abs(norm2(op.filt.h) - 1.0) <= 1e-12);
  }
  SECTION("unstructured draw fills a dense matrix") {
    Philox rng(8);
    const CompressOp op = make_gaussian_compressor(my, mz, false, rng);
    REQUIRE(op.kind == CompressOp::Kind::dense);
    REQUIRE(op.mat.rows == mz);
    REQUIRE(op.mat.cols == my);
  }
  SECTION("same seed reproduces the operator") {
    Philox a(9), b(9);
    const CompressOp oa = make_gaussian_compressor(my, mz, false, a);
    const CompressOp ob = make_gaussian_compressor(my, mz, false, b);
    REQUIRE(oa.mat.data == ob.mat.data);
  }
  SECTION("mutual coherence statistic over 20 draws is well defined") {
    // Note: with random unit-norm filters the dense draw's worst pairwise
    // coherence measures consistently *above* the structured draw's at
    // matched dims (more independent column pairs), so no direction is
    // asserted here; the G/GS recovery comparison itself is covered by the
    // evaluation pipeline tests.
    auto mean_coherence = [&](bool structured, std::uint64_t seed) {
      double acc = 0.0;
      for (std::uint64_t d = 0; d < 20; ++d) {
        Philox rng(seed + d);
        const CompressOp op = make_gaussian_compressor(my, mz, structured, rng);
        const Matrix m = structured ? build_toeplitz(op.filt) : op.mat;
        double worst = 0.0;
        for (std::size_t i = 0; i < m.cols; ++i)
          for (std::size_t j = i + 1; j < m.cols; ++j) {
            double ip = 0.0, ni = 0.0, nj = 0.0;
            for (std::size_t r = 0; r < m.rows; ++r) {
              ip += m.at(r, i) * m.at(r, j);
              ni += m.at(r, i) * m.at(r, i);
              nj += m.at(r, j) * m.at(r, j);
            }
            if (ni > 0.0 && nj > 0.0)
              worst = std::max(worst, std::abs(ip) / std::sqrt(ni * nj));
          }
        acc += worst;
      }
      return acc / 20.0;
    };
    const double g = mean_coherence(false, 100);
    const double s_coh = mean_coherence(true, 200);
    REQUIRE(g > 0.0);
    REQUIRE(g < 1.0);
    REQUIRE(s_coh > 0.0);
    REQUIRE(s_coh < 1.0);
    REQUIRE(mean_coherence(false, 100) == g);  // deterministic given seeds
  }
}

TEST_CASE("evaluate_encoder scores recovery") {
  const Source s = gen_source(11);
  DataGenSpec spec{ProblemDims(11, 20, 30, 8, 2), 21};
  const Dataset ds = gen_dataset(spec, s);
  EncoderConfig enc{.iters = 400, .alpha = 0.05, .lambda = 0.1, .decay = 0.98,
                    .nonneg = true, .backprop = 10};
  EvaluationInput in{&ds.x, &ds.y};
  const auto rep = evaluate_encoder("ls-mbd", s, CompressOp::identity(30), enc, in, 100.0);
  REQUIRE(rep.method == "ls-mbd");
  REQUIRE(rep.m_z == 30);
  REQUIRE(rep.nmse < -50.0);  // full measurements, true source: easy recovery
  REQUIRE(rep.success);
  REQUIRE(rep.n_below_threshold == 8);
  REQUIRE(rep.p10_db <= rep.p50_db);
  REQUIRE(rep.p50_db <= rep.p90_db);
}

TEST_CASE("stable_alpha caps the step for wild operators") {
  const Source s = gen_source(11);
  Philox rng(31);
  const CompressOp dense = make_gaussian_compressor(30, 12, false, rng);
  const double capped = stable_alpha(s, dense, 0.05);
  const double sigma = operator_spectral_norm(s, dense);
  REQUIRE(capped <= 0.05);
  REQUIRE(capped <= 0.95 / (sigma * sigma) + 1e-12);
  REQUIRE(stable_alpha(s, CompressOp::identity(30), 0.05) == 0.05);
}
