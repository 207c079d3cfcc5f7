#ifndef LSMBD_CHECKPOINT_HPP
#define LSMBD_CHECKPOINT_HPP

#include <cstdint>
#include <filesystem>
#include <string>

#include "lsmbd/encoder.hpp"
#include "lsmbd/io.hpp"
#include "lsmbd/lista.hpp"
#include "lsmbd/operators.hpp"
#include "lsmbd/rng.hpp"
#include "lsmbd/training.hpp"

namespace lsmbd {

// Checkpoints reuse the array container. Format version, RNG provenance,
// dimensions, and the encoder configuration travel as metadata; learned
// parameters are float64 arrays. Loading validates dimensions loudly.

inline constexpr const char* kCheckpointFormat = "lsmbd-checkpoint";
inline constexpr const char* kCheckpointVersion = "1";

namespace detail {

inline void put_common_meta(ArrayFile& f, int stage, const ProblemDims& dims,
                            const EncoderConfig& enc, std::uint64_t seed) {
  f.set_meta("format", kCheckpointFormat);
  f.set_meta("format_version", kCheckpointVersion);
  f.set_meta("stage", std::to_string(stage));
  f.set_meta("rng_algorithm", Philox::algorithm_name());
  f.set_meta("rng_seed", std::to_string(seed));
  f.set_meta("M_s", std::to_string(dims.m_s));
  f.set_meta("M_x", std::to_string(dims.m_x));
  f.set_meta("M_y", std::to_string(dims.m_y));
  f.set_meta("M_z", std::to_string(dims.m_z));
  f.set_meta("L", std::to_string(dims.l));
  f.set_meta("enc_T", std::to_string(enc.iters));
  f.set_meta("enc_alpha", format_double(enc.alpha));
  f.set_meta("enc_lambda", format_double(enc.lambda));
  f.set_meta("enc_c", format_double(enc.decay));
  f.set_meta("enc_nonneg", enc.nonneg ? "1" : "0");
  f.set_meta("enc_K", std::to_string(enc.backprop));
}

inline void check_format(const ArrayFile& f) {
  if (f.meta_or_throw("format") != kCheckpointFormat)
    throw IoError("checkpoint: unexpected format tag");
  if (f.meta_or_throw("format_version") != kCheckpointVersion)
    throw IoError("checkpoint: unsupported format version " +
                  f.meta_or_throw("format_version"));
}

inline std::size_t meta_size(const ArrayFile& f, const std::string& key) {
  return static_cast<std::size_t>(std::stoull(f.meta_or_throw(key)));
}

inline EncoderConfig read_enc(const ArrayFile& f) {
  EncoderConfig enc;
  enc.iters = meta_size(f, "enc_T");
  enc.alpha = std::stod(f.meta_or_throw("enc_alpha"));
  enc.lambda = std::stod(f.meta_or_throw("enc_lambda"));
  enc.decay = std::stod(f.meta_or_throw("enc_c"));
  enc.nonneg = f.meta_or_throw("enc_nonneg") == "1";
  enc.backprop = meta_size(f, "enc_K");
  return enc;
}

}  // namespace detail

struct Stage1Checkpoint {
  Source source;
  ProblemDims dims;
  EncoderConfig enc;
  std::uint64_t seed = 0;
  double final_train_loss = kNoValue;
  double final_source_err_aligned = kNoValue;

  void save(const std::filesystem::path& path) const {
    ArrayFile f;
    detail::put_common_meta(f, 1, dims, enc, seed);
    f.set_meta("final_train_loss", format_double(final_train_loss));
    f.set_meta("final_source_err_aligned", format_double(final_source_err_aligned));
    f.add_vector("s", source.s);
    f.save(path);
  }

  static Stage1Checkpoint load(const std::filesystem::path& path) {
    ArrayFile f = ArrayFile::load(path);
    detail::check_format(f);
    if (f.meta_or_throw("stage") != "1")
      throw IoError("checkpoint: expected a stage-1 checkpoint: " + path.string());
    Stage1Checkpoint c;
    c.dims = ProblemDims(detail::meta_size(f, "M_s"), detail::meta_size(f, "M_x"),
                         detail::meta_size(f, "M_z"), 1, detail::meta_size(f, "L"));
    c.enc = detail::read_enc(f);
    c.seed = std::stoull(f.meta_or_throw("rng_seed"));
    c.final_train_loss = std::stod(f.meta_or_throw("final_train_loss"));
    c.final_source_err_aligned = std::stod(f.meta_or_throw("final_source_err_aligned"));
    Signal s = f.get_vector("s");
    if (s.size() != c.dims.m_s)
      throw IoError("checkpoint: source length disagrees with recorded dims");
    c.source = Source(std::move(s));
    return c;
  }
};

struct Stage2Checkpoint {
  CompressionFilter filter;
  ProblemDims dims;
  EncoderConfig enc;
  std::uint64_t seed = 0;
  double cr_pct = 0.0;
  bool warm_started = false;
  double final_val_loss = kNoValue;
  double final_test_nmse_db = kNoValue;

  void save(const std::filesystem::path& path) const {
    ArrayFile f;
    detail::put_common_meta(f, 2, dims, enc, seed);
    f.set_meta("cr_pct", format_double(cr_pct));
    f.set_meta("warm_started", warm_started ? "1" : "0");
    f.set_meta("final_val_loss", format_double(final_val_loss));
    f.set_meta("final_test_nmse_db", format_double(final_test_nmse_db));
    f.add_vector("h", filter.h);
    f.save(path);
  }

  static Stage2Checkpoint load(const std::filesystem::path& path) {
    ArrayFile f = ArrayFile::load(path);
    detail::check_format(f);
    if (f.meta_or_throw("stage") != "2")
      throw IoError("checkpoint: expected a stage-2 checkpoint: " + path.string());
    Stage2Checkpoint c;
    c.dims = ProblemDims(detail::meta_size(f, "M_s"), detail::meta_size(f, "M_x"),
                         detail::meta_size(f, "M_z"), 1, detail::meta_size(f, "L"));
    c.enc = detail::read_enc(f);
    c.seed = std::stoull(f.meta_or_throw("rng_seed"));
    c.cr_pct = std::stod(f.meta_or_throw("cr_pct"));
    c.warm_started = f.meta_or_throw("warm_started") == "1";
    c.final_val_loss = std::stod(f.meta_or_throw("final_val_loss"));
    c.final_test_nmse_db = std::stod(f.meta_or_throw("final_test_nmse_db"));
    Signal h = f.get_vector("h");
    if (h.size() != c.dims.m_y + c.dims.m_z - 1)
      throw IoError("checkpoint: filter length disagrees with recorded dims");
    c.filter = CompressionFilter(std::move(h), c.dims.m_y, c.dims.m_z);
    return c;
  }
};

struct ListaCheckpoint {
  ListaParams params;
  CompressionFilter filter;
  ProblemDims dims;
  std::uint64_t seed = 0;
  double cr_pct = 0.0;
  double final_test_nmse_db = kNoValue;

  void save(const std::filesystem::path& path) const {
    ArrayFile f;
    EncoderConfig pseudo;  // the shallow encoder reuses the metadata slots
    pseudo.iters = params.layers;
    pseudo.alpha = 1.0;
    pseudo.lambda = 0.0;
    pseudo.decay = 1.0;
    pseudo.nonneg = params.nonneg;
    pseudo.backprop = params.layers;
    detail::put_common_meta(f, 3, dims, pseudo, seed);
    f.set_meta("cr_pct", format_double(cr_pct));
    f.set_meta("final_test_nmse_db", format_double(final_test_nmse_db));
    f.set_meta("lista_b", format_double(params.b));
    f.add_vector("w_d", params.w_d);
    f.add_vector("w_e", params.w_e);
    f.add_vector("p", params.p);
    f.add_vector("h", filter.h);
    f.save(path);
  }

  static ListaCheckpoint load(const std::filesystem::path& path) {
    ArrayFile f = ArrayFile::load(path);
    detail::check_format(f);
    if (f.meta_or_throw("stage") != "3")
      throw IoError("checkpoint: expected a shallow-encoder checkpoint: " + path.string());
    ListaCheckpoint c;
    c.dims = ProblemDims(detail::meta_size(f, "M_s"), detail::meta_size(f, "M_x"),
                         detail::meta_size(f, "M_z"), 1, detail::meta_size(f, "L"));
    c.seed = std::stoull(f.meta_or_throw("rng_seed"));
    c.cr_pct = std::stod(f.meta_or_throw("cr_pct"));
    c.final_test_nmse_db = std::stod(f.meta_or_throw("final_test_nmse_db"));
    c.params.layers = detail::meta_size(f, "enc_T");
    c.params.nonneg = f.meta_or_throw("enc_nonneg") == "1";
    c.params.b = std::stod(f.meta_or_throw("lista_b"));
    c.params.w_d = f.get_vector("w_d");
    c.params.w_e = f.get_vector("w_e");
    c.params.p = f.get_vector("p");
    if (c.params.w_d.size() != c.dims.m_s)
      throw IoError("checkpoint: kernel length disagrees with recorded dims");
    Signal h = f.get_vector("h");
    if (h.size() != c.dims.m_y + c.dims.m_z - 1)
      throw IoError("checkpoint: filter length disagrees with recorded dims");
    c.filter = CompressionFilter(std::move(h), c.dims.m_y, c.dims.m_z);
    return c;
  }
};

// Per-epoch history rows, one CSV schema across stages; absent metrics stay
// blank.
inline void write_history_csv(const std::filesystem::path& path,
                              const std::vector<EpochRecord>& history) {
  CsvWriter csv(path, {"epoch", "lr", "train_loss", "val_loss", "source_err_raw",
                       "source_err_aligned", "train_nmse_db", "test_nmse_db"});
  for (const auto& r : history) {
    csv.field(r.epoch)
        .field(r.lr)
        .field(r.train_loss)
        .field(r.val_loss)
        .field(r.source_err_raw)
        .field(r.source_err_aligned)
        .field(r.train_nmse_db)
        .field(r.test_nmse_db);
  }
}

}  // namespace lsmbd

#endif  // LSMBD_CHECKPOINT_HPP
