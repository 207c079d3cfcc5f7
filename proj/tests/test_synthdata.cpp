#include <catch_amalgamated.hpp>

#include <cmath>

#include "lsmbd/synthdata.hpp"
#include "oracles.hpp"

using namespace lsmbd;

TEST_CASE("gen_source shape and normalization") {
  SECTION("M_s = 99 peaks at the center with the stated profile") {
    const Source s = gen_source(99);
    REQUIRE(s.length() == 99);
    REQUIRE(std::abs(norm2(s.s) - 1.0) <= 1e-12);
    // the normalized samples keep the ratios exp(-6 (k-49)^2) / exp(0)
    for (std::size_t k : {47u, 48u, 49u, 50u, 51u}) {
      const double d = static_cast<double>(k) - 49.0;
      REQUIRE(s.s[k] / s.s[49] == Catch::Approx(std::exp(-6.0 * d * d)).epsilon(1e-12));
    }
    // peak is the max
    for (double v : s.s) REQUIRE(v <= s.s[49]);
  }
  SECTION("M_s = 1 collapses to [1]") {
    const Source s = gen_source(1);
    REQUIRE(s.s == Signal{1.0});
  }
}

TEST_CASE("gen_sparse_filters support and amplitudes") {
  SECTION("L = M_x forces a dense column") {
    const ProblemDims full(5, 6, 5, 10, 6);
    Philox r2(3);
    const Matrix x = gen_sparse_filters(full, 4, r2);
    for (std::size_t n = 0; n < 4; ++n)
      for (std::size_t i = 0; i < 6; ++i) REQUIRE(x.at(i, n) != 0.0);
  }
  SECTION("every column has exactly L nonzeros in [0,1)") {
    const ProblemDims paper(99, 100, 99, 100, 6);
    Philox r3(5);
    const Matrix x = gen_sparse_filters(paper, 100, r3);
    for (std::size_t n = 0; n < 100; ++n) {
      std::size_t nnz = 0;
      for (std::size_t i = 0; i < 100; ++i) {
        const double v = x.at(i, n);
        if (v != 0.0) {
          ++nnz;
          REQUIRE(v > 0.0);
          REQUIRE(v < 1.0);
        }
      }
      REQUIRE(nnz == 6);
    }
  }
  SECTION("support is uniform (chi-square over 1e5 draws)") {
    Philox r4(99);
    std::vector<double> counts(100, 0.0);
    const std::size_t draws = 100000;
    for (std::size_t rep = 0; rep < draws; ++rep) {
      const auto idx = r4.sample_without_replacement(100, 6);
      for (std::size_t i : idx) counts[i] += 1.0;
    }
    const double expect = 6.0 * static_cast<double>(draws) / 100.0;
    double stat = 0.0;
    for (double c : counts) stat += (c - expect) * (c - expect) / expect;
    // chi-square(99) 0.99 quantile: a larger statistic would reject at p < 0.01
    REQUIRE(stat < 134.65);
  }
  SECTION("L > M_x rejected") {
    REQUIRE_THROWS_AS(ProblemDims(5, 4, 3, 1, 5), ParameterError);
  }
}

TEST_CASE("gen_dataset") {
  const Source s = gen_source(99);
  SECTION("paper dims give 198 x 100 measurements") {
    DataGenSpec spec{ProblemDims(99, 100, 99, 100, 6), 7};
    const Dataset ds = gen_dataset(spec, s);
    REQUIRE(ds.y.rows == 198);
    REQUIRE(ds.y.cols == 100);
    REQUIRE_FALSE(ds.z.has_value());
  }
  SECTION("measurements follow the model exactly") {
    DataGenSpec spec{ProblemDims(99, 100, 99, 20, 6), 8};
    const Dataset ds = gen_dataset(spec, s);
    for (std::size_t n = 0; n < 20; ++n) {
      const auto expect = oracle::conv_full(s.s, ds.x.col_vec(n));
      const Signal got = ds.y.col_vec(n);
      for (std::size_t i = 0; i < got.size(); ++i)
        REQUIRE(got[i] == Catch::Approx(expect[i]).margin(1e-12));
    }
  }
  SECTION("compression filter adds Z") {
    DataGenSpec spec{ProblemDims(99, 100, 47, 10, 6), 9};
    Philox rng(1);
    Signal h(198 + 47 - 1);
    for (double& v : h) v = rng.next_normal();
    const CompressionFilter hf(h, 198, 47);
    const Dataset ds = gen_dataset(spec, s, &hf);
    REQUIRE(ds.z.has_value());
    REQUIRE(ds.z->rows == 47);
    for (std::size_t n = 0; n < 10; ++n) {
      const Signal expect = apply_compression(hf, ds.y.col_vec(n));
      for (std::size_t i = 0; i < 47; ++i)
        REQUIRE(ds.z->at(i, n) == expect[i]);
    }
  }
  SECTION("same seed reproduces bitwise, different seed does not") {
    DataGenSpec spec{ProblemDims(21, 40, 20, 50, 3), 1234};
    const Source s2 = gen_source(21);
    const Dataset a = gen_dataset(spec, s2);
    const Dataset b = gen_dataset(spec, s2);
    REQUIRE(a.x.data == b.x.data);
    REQUIRE(a.y.data == b.y.data);
    spec.seed = 1235;
    const Dataset c = gen_dataset(spec, s2);
    REQUIRE(a.x.data != c.x.data);
  }
}
