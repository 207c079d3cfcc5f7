#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "lsmbd/checkpoint.hpp"
#include "lsmbd/io.hpp"
#include "lsmbd/rng.hpp"

using namespace lsmbd;
namespace fs = std::filesystem;

namespace {
std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(is), {});
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("lsmbd_test_" + std::to_string(Catch::rngSeed()) + "_" +
            std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};
}  // namespace

TEST_CASE("array container round trip is bitwise stable") {
  TempDir tmp;
  Philox rng(1);
  ArrayFile f;
  f.set_meta("purpose", "test");
  f.set_meta("rng_algorithm", Philox::algorithm_name());
  Matrix m(7, 3);
  for (double& v : m.data) v = rng.next_normal();
  f.add_matrix("payload", m);
  f.add_vector("vec", {1.0, -2.5, 1e-300, 0.0});

  const fs::path p1 = tmp.path / "a.arr";
  const fs::path p2 = tmp.path / "b.arr";
  f.save(p1);
  const ArrayFile g = ArrayFile::load(p1);
  REQUIRE(g.meta_or_throw("purpose") == "test");
  REQUIRE(g.get_matrix("payload").data == m.data);
  REQUIRE(g.get_vector("vec") == std::vector<double>{1.0, -2.5, 1e-300, 0.0});
  g.save(p2);
  REQUIRE(slurp(p1) == slurp(p2));
}

TEST_CASE("array container rejects foreign and truncated files") {
  TempDir tmp;
  const fs::path p = tmp.path / "bad.arr";
  {
    std::ofstream os(p, std::ios::binary);
    os << "NOTANARRAYFILE";
  }
  REQUIRE_THROWS_AS(ArrayFile::load(p), IoError);
  REQUIRE_THROWS_AS(ArrayFile::load(tmp.path / "missing.arr"), IoError);

  ArrayFile f;
  f.add_vector("v", {1.0, 2.0});
  const fs::path q = tmp.path / "ok.arr";
  f.save(q);
  const auto full = slurp(q);
  {
    std::ofstream os(q, std::ios::binary | std::ios::trunc);
    os.write(full.data(), static_cast<std::streamsize>(full.size() - 5));
  }
  REQUIRE_THROWS_AS(ArrayFile::load(q), IoError);
}

TEST_CASE("stage-1 checkpoint round trip and dim validation") {
  TempDir tmp;
  Stage1Checkpoint c;
  c.dims = ProblemDims(21, 40, 21, 1, 3);
  c.enc = {.iters = 2000, .alpha = 0.05, .lambda = 0.1, .decay = 0.9953,
           .nonneg = true, .backprop = 100};
  c.seed = 777;
  c.final_train_loss = 0.125;
  c.final_source_err_aligned = 0.01;
  Philox rng(5);
  Signal s(21);
  for (double& v : s) v = rng.next_normal();
  c.source = Source(s);

  const fs::path p = tmp.path / "s1.arr";
  c.save(p);
  const auto d = Stage1Checkpoint::load(p);
  REQUIRE(d.source.s == c.source.s);
  REQUIRE(d.dims.m_s == 21);
  REQUIRE(d.enc.iters == 2000);
  REQUIRE(d.enc.decay == 0.9953);
  REQUIRE(d.seed == 777);

  // bitwise round trip
  const fs::path p2 = tmp.path / "s1b.arr";
  d.save(p2);
  REQUIRE(slurp(p) == slurp(p2));

  SECTION("corrupted dims fail loudly") {
    ArrayFile f = ArrayFile::load(p);
    f.set_meta("M_s", "20");
    const fs::path p3 = tmp.path / "s1c.arr";
    f.save(p3);
    REQUIRE_THROWS_AS(Stage1Checkpoint::load(p3), IoError);
  }
  SECTION("version mismatch is a hard error") {
    ArrayFile f = ArrayFile::load(p);
    f.set_meta("format_version", "999");
    const fs::path p4 = tmp.path / "s1d.arr";
    f.save(p4);
    REQUIRE_THROWS_AS(Stage1Checkpoint::load(p4), IoError);
  }
  SECTION("wrong stage tag is rejected") {
    REQUIRE_THROWS_AS(Stage2Checkpoint::load(p), IoError);
  }
}

TEST_CASE("stage-2 and shallow-encoder checkpoints round trip") {
  TempDir tmp;
  Philox rng(6);
  const std::size_t my = 60, mz = 21;

  Stage2Checkpoint c2;
  c2.dims = ProblemDims(21, 40, mz, 1, 3);
  c2.enc = {.iters = 2000, .alpha = 0.05, .lambda = 0.1, .decay = 0.9953,
            .nonneg = true, .backprop = 100};
  c2.seed = 8;
  c2.cr_pct = 35.0;
  c2.warm_started = true;
  Signal h(my + mz - 1);
  for (double& v : h) v = rng.next_normal();
  c2.filter = CompressionFilter(h, my, mz);
  const fs::path p = tmp.path / "s2.arr";
  c2.save(p);
  const auto d2 = Stage2Checkpoint::load(p);
  REQUIRE(d2.filter.h == c2.filter.h);
  REQUIRE(d2.filter.m_z == mz);
  REQUIRE(d2.cr_pct == 35.0);
  REQUIRE(d2.warm_started);

  ListaCheckpoint c3;
  c3.dims = c2.dims;
  c3.seed = 9;
  c3.cr_pct = 35.0;
  c3.params.layers = 20;
  c3.params.nonneg = true;
  c3.params.b = 0.005;
  c3.params.w_d = Signal(21, 0.1);
  c3.params.w_e = Signal(21, 0.2);
  c3.params.p = Signal(21, 0.3);
  c3.filter = c2.filter;
  const fs::path q = tmp.path / "s3.arr";
  c3.save(q);
  const auto d3 = ListaCheckpoint::load(q);
  REQUIRE(d3.params.w_d == c3.params.w_d);
  REQUIRE(d3.params.b == 0.005);
  REQUIRE(d3.params.layers == 20);
  REQUIRE(d3.filter.h == c3.filter.h);
}

TEST_CASE("csv writer emits fixed schemas with blank NaNs") {
  TempDir tmp;
  const fs::path p = tmp.path / "t.csv";
  {
    CsvWriter csv(p, {"a", "b", "c"});
    csv.field(std::size_t{1}).field(0.5).field(kNoValue);
    csv.field(std::size_t{2}).field(-60.0).field(std::string("x"));
  }
  std::ifstream is(p);
  std::string line;
  std::getline(is, line);
  REQUIRE(line == "a,b,c");
  std::getline(is, line);
  REQUIRE(line == "1,0.5,");
  std::getline(is, line);
  REQUIRE(line == "2,-60,x");
}

TEST_CASE("format_double round trips exactly") {
  Philox rng(7);
  for (int i = 0; i < 1000; ++i) {
    double v = rng.next_normal() * std::pow(10.0, static_cast<double>(rng.next_below(60)) - 30.0);
    REQUIRE(std::strtod(format_double(v).c_str(), nullptr) == v);
  }
  REQUIRE(format_double(0.1) == "0.1");
  REQUIRE(format_double(-60.0) == "-60");
}

TEST_CASE("history csv has one row per epoch") {
  TempDir tmp;
  std::vector<EpochRecord> hist(5);
  for (std::size_t i = 0; i < 5; ++i) {
    hist[i].epoch = i;
    hist[i].lr = 0.03;
    hist[i].train_loss = 1.0 / static_cast<double>(i + 1);
  }
  const fs::path p = tmp.path / "h.csv";
  write_history_csv(p, hist);
  std::ifstream is(p);
  std::string line;
  std::size_t rows = 0;
  std::getline(is, line);  // header
  while (std::getline(is, line)) ++rows;
  REQUIRE(rows == 5);
}
