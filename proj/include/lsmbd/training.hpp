#ifndef LSMBD_TRAINING_HPP
#define LSMBD_TRAINING_HPP

#include <cassert>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "lsmbd/adam.hpp"
#include "lsmbd/grad.hpp"
#include "lsmbd/lista.hpp"
#include "lsmbd/metrics.hpp"
#include "lsmbd/parallel.hpp"
#include "lsmbd/synthdata.hpp"

namespace lsmbd {

// 1/2 ||y - yhat||^2. Batch losses are these summed over the batch.
inline double loss_stage1(const Signal& y, const Signal& yhat) {
  if (y.size() != yhat.size()) throw DimensionError("loss_stage1: length mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double d = y[i] - yhat[i];
    acc += d * d;
  }
  return 0.5 * acc;
}

// Same distance in code space.
inline double loss_stage2(const Signal& xtilde, const Signal& xhat) {
  return loss_stage1(xtilde, xhat);
}

inline Signal project_unit_norm(Signal v) {
  const double nrm = norm2(v);
  if (nrm == 0.0) throw ParameterError("project_unit_norm: zero vector");
  for (double& x : v) x /= nrm;
  return v;
}

// base * factor^floor(epoch / period)
inline double lr_schedule(double base, std::size_t epoch, double factor,
                          std::size_t period) {
  if (period < 1) throw ParameterError("lr_schedule: period must be >= 1");
  return base * std::pow(factor, static_cast<double>(epoch / period));
}

struct StageConfig {
  int stage = 1;
  std::size_t epochs = 1;
  std::size_t batch_size = 0;  // 0 = full batch
  double lr = 0.03;
  double lr_decay_factor = 0.9;
  std::size_t lr_decay_period = 100;
  double adam_eps = 1e-2;
  EncoderConfig enc;
  std::uint64_t init_seed = 0;
  std::size_t eval_every = 1;  // cadence of test-NMSE rows (stage 2)

  void validate() const {
    enc.validate();
    if (epochs < 1) throw ParameterError("StageConfig: epochs must be >= 1");
    if (lr < 0.0) throw ParameterError("StageConfig: negative learning rate");
    if (lr_decay_period < 1) throw ParameterError("StageConfig: decay period must be >= 1");
  }
};

constexpr double kNoValue = std::numeric_limits<double>::quiet_NaN();

struct EpochRecord {
  std::size_t epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;        // at the parameters entering the epoch
  double val_loss = kNoValue;     // after the epoch's updates (stage 2)
  double source_err_raw = kNoValue;
  double source_err_aligned = kNoValue;
  double train_nmse_db = kNoValue;  // filter recovery on the training set
  double test_nmse_db = kNoValue;   // stage 2, every eval_every epochs
};

// Divergence aborts carry the history accumulated so far.
struct TrainAbort : NumericError {
  std::vector<EpochRecord> history;
  TrainAbort(const std::string& what, std::vector<EpochRecord> h)
      : NumericError(what), history(std::move(h)) {}
};

struct Stage1Result {
  Source source;
  Matrix targets;  // xtilde on the training measurements, M_x x N
  std::vector<EpochRecord> history;
  StabilityReport stability;   // at initialization
  double max_norm_dev = 0.0;   // max | ||s||_2 - 1 | seen after any update
};

// Encoder codes for a set of full measurements with Phi = I; used both for
// the stage-2 targets and for per-epoch recovery metrics.
inline Matrix compute_targets(const Source& src, const Matrix& y,
                              const EncoderConfig& enc) {
  const std::size_t mx = y.rows - src.length() + 1;
  Matrix out(mx, y.cols);
  const CompressOp phi = CompressOp::identity(y.rows);
  parallel_for(y.cols, [&](std::size_t n) {
    ForwardTrace tr = encoder_forward(y.col_vec(n), src, phi, enc);
    out.set_col(n, tr.xhat);
  });
  return out;
}

// Stage 1: learn the source from full measurements (Phi = I), full-batch
// ADAM with unit-norm projection after every step. The dataset's ground
// truth (when present) is only read for monitoring columns.
inline Stage1Result train_stage1(const Dataset& ds, const StageConfig& cfg,
                                 const Source* true_source = nullptr,
                                 std::optional<Signal> init = std::nullopt) {
  cfg.validate();
  const std::size_t n = ds.y.cols;
  const std::size_t ms = ds.y.rows - ds.x.rows + 1;

  Signal s0;
  if (init.has_value()) {
    s0 = *init;
    if (s0.size() != ms) throw DimensionError("train_stage1: init length mismatch");
  } else {
    Philox rng(cfg.init_seed, /*stream=*/1);
    s0.resize(ms);
    for (double& v : s0) v = rng.next_normal();
  }
  Source src(project_unit_norm(std::move(s0)));

  Stage1Result res;
  res.stability = stability_check(src, CompressOp::identity(ds.y.rows), cfg.enc.alpha);

  AdamState adam(ms, cfg.adam_eps);
  std::vector<ExampleGrad> slots(n);
  const std::size_t batch = cfg.batch_size == 0 ? n : cfg.batch_size;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = lr_schedule(cfg.lr, epoch, cfg.lr_decay_factor, cfg.lr_decay_period);
    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = lr;

    Matrix xhat(ds.x.rows, n);
    double epoch_loss = 0.0;
    try {
      for (std::size_t start = 0; start < n; start += batch) {
        const std::size_t stop = std::min(start + batch, n);
        parallel_for(stop - start, [&](std::size_t k) {
          slots[start + k] = grad_stage1_example(ds.y.col_vec(start + k), src, cfg.enc);
        });
        Signal grad(ms, 0.0);
        for (std::size_t i = start; i < stop; ++i) {
          epoch_loss += slots[i].loss;
          for (std::size_t j = 0; j < ms; ++j) grad[j] += slots[i].grad[j];
          xhat.set_col(i, slots[i].xhat);
        }
        adam_step(adam, grad, src.s, lr);
        src.s = project_unit_norm(std::move(src.s));
        const double dev = std::abs(norm2(src.s) - 1.0);
        res.max_norm_dev = std::max(res.max_norm_dev, dev);
        assert(dev < 1e-12);
      }
    } catch (const NumericError& e) {
      throw TrainAbort(std::string("train_stage1: ") + e.what(), std::move(res.history));
    }

    rec.train_loss = epoch_loss;
    if (true_source != nullptr) {
      rec.source_err_raw = source_error(*true_source, src, false);
      rec.source_err_aligned = source_error(*true_source, src, true);
    }
    rec.train_nmse_db = nmse_db(ds.x, xhat);
    res.history.push_back(rec);
  }

  res.targets = compute_targets(src, ds.y, cfg.enc);
  res.source = std::move(src);
  return res;
}

struct Stage2Data {
  const Matrix* train_y = nullptr;
  const Matrix* train_targets = nullptr;
  const Matrix* val_y = nullptr;       // optional
  const Matrix* val_targets = nullptr;
  const Matrix* test_y = nullptr;      // optional, for NMSE monitoring
  const Matrix* test_x = nullptr;
};

struct Stage2Result {
  CompressionFilter filter;
  std::vector<EpochRecord> history;
  StabilityReport stability;
  double max_norm_dev = 0.0;
  double final_val_loss = kNoValue;
  double final_test_nmse_db = kNoValue;
};

namespace detail {

inline std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed,
                                                 std::uint64_t epoch) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  Philox rng(seed, /*stream=*/0xe90c0000ULL + epoch);
  for (std::size_t i = n; i > 1; --i) {
    const std::uint32_t j = rng.next_below(static_cast<std::uint32_t>(i));
    std::swap(idx[i - 1], idx[j]);
  }
  return idx;
}

inline double dataset_loss_stage2(const Matrix& y, const Matrix& targets,
                                  const Source& src, const CompressionFilter& hf,
                                  const EncoderConfig& enc) {
  const CompressOp phi = CompressOp::structured(hf);
  std::vector<double> losses(y.cols);
  parallel_for(y.cols, [&](std::size_t n) {
    const Signal z = apply_compression(hf, y.col_vec(n));
    ForwardTrace tr = encoder_forward(z, src, phi, enc);
    losses[n] = loss_stage2(targets.col_vec(n), tr.xhat);
  });
  double acc = 0.0;
  for (double l : losses) acc += l;
  return acc;
}

inline double dataset_nmse_stage2(const Matrix& y, const Matrix& x, const Source& src,
                                  const CompressionFilter& hf, const EncoderConfig& enc) {
  const CompressOp phi = CompressOp::structured(hf);
  Matrix xhat(x.rows, x.cols);
  parallel_for(y.cols, [&](std::size_t n) {
    const Signal z = apply_compression(hf, y.col_vec(n));
    ForwardTrace tr = encoder_forward(z, src, phi, enc);
    xhat.set_col(n, tr.xhat);
  });
  return nmse_db(x, xhat);
}

}  // namespace detail

// Stage 2: the source is frozen; the compression filter is learned against
// the stage-1 codes. z = Phi y is recomputed from the current filter inside
// every forward/backward pass.
inline Stage2Result train_stage2(const Stage2Data& data, const Source& src,
                                 std::size_t m_z, const StageConfig& cfg,
                                 std::optional<CompressionFilter> warm = std::nullopt) {
  cfg.validate();
  if (data.train_y == nullptr || data.train_targets == nullptr)
    throw StateError("train_stage2: training measurements and targets are required");
  const Matrix& ty = *data.train_y;
  const Matrix& tt = *data.train_targets;
  if (tt.cols != ty.cols) throw DimensionError("train_stage2: target count mismatch");
  const std::size_t my = ty.rows;
  const std::size_t mh = my + m_z - 1;
  const std::size_t n = ty.cols;

  CompressionFilter hf;
  if (warm.has_value()) {
    if (warm->m_y != my || warm->m_z != m_z)
      throw DimensionError("train_stage2: warm-start filter dims mismatch");
    hf = std::move(*warm);
    hf.h = project_unit_norm(std::move(hf.h));
  } else {
    Philox rng(cfg.init_seed, /*stream=*/2);
    Signal h0(mh);
    for (double& v : h0) v = rng.next_normal();
    hf = CompressionFilter(project_unit_norm(std::move(h0)), my, m_z);
  }

  Stage2Result res{.filter = hf};
  res.stability = stability_check(src, CompressOp::structured(hf), cfg.enc.alpha);

  AdamState adam(mh, cfg.adam_eps);
  std::vector<ExampleGrad> slots(n);
  const std::size_t batch = cfg.batch_size == 0 ? n : cfg.batch_size;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = lr_schedule(cfg.lr, epoch, cfg.lr_decay_factor, cfg.lr_decay_period);
    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = lr;

    const auto order = detail::shuffled_indices(n, cfg.init_seed, epoch);
    double epoch_loss = 0.0;
    try {
      for (std::size_t start = 0; start < n; start += batch) {
        const std::size_t stop = std::min(start + batch, n);
        parallel_for(stop - start, [&](std::size_t k) {
          const std::size_t ex = order[start + k];
          slots[start + k] = grad_stage2_example(ty.col_vec(ex), tt.col_vec(ex), src,
                                                 res.filter, cfg.enc);
        });
        Signal grad(mh, 0.0);
        for (std::size_t i = start; i < stop; ++i) {
          epoch_loss += slots[i].loss;
          for (std::size_t j = 0; j < mh; ++j) grad[j] += slots[i].grad[j];
        }
        adam_step(adam, grad, res.filter.h, lr);
        res.filter.h = project_unit_norm(std::move(res.filter.h));
        const double dev = std::abs(norm2(res.filter.h) - 1.0);
        res.max_norm_dev = std::max(res.max_norm_dev, dev);
        assert(dev < 1e-12);
      }

      rec.train_loss = epoch_loss;
      if (data.val_y != nullptr && data.val_targets != nullptr)
        rec.val_loss = detail::dataset_loss_stage2(*data.val_y, *data.val_targets, src,
                                                   res.filter, cfg.enc);
      const bool eval_now = (epoch % cfg.eval_every == 0) || (epoch + 1 == cfg.epochs);
      if (eval_now && data.test_y != nullptr && data.test_x != nullptr)
        rec.test_nmse_db = detail::dataset_nmse_stage2(*data.test_y, *data.test_x, src,
                                                       res.filter, cfg.enc);
    } catch (const NumericError& e) {
      throw TrainAbort(std::string("train_stage2: ") + e.what(), std::move(res.history));
    }
    res.history.push_back(rec);
  }

  res.final_val_loss = res.history.back().val_loss;
  res.final_test_nmse_db = res.history.back().test_nmse_db;
  return res;
}

// Shortened warm start: keep the trailing coefficients of a learned filter,
// renormalize, and rebuild for the smaller M_z at the same M_y.
inline CompressionFilter warm_start_filter(const CompressionFilter& src_filter,
                                           std::size_t new_m_z) {
  const std::size_t new_mh = src_filter.m_y + new_m_z - 1;
  if (new_mh > src_filter.m_h())
    throw ParameterError("warm_start_filter: target filter longer than source");
  Signal h(src_filter.h.end() - static_cast<std::ptrdiff_t>(new_mh), src_filter.h.end());
  const double nrm = norm2(h);
  if (nrm == 0.0) throw ParameterError("warm_start_filter: truncation left a zero filter");
  if (std::abs(nrm - 1.0) > 1e-12)
    for (double& v : h) v /= nrm;
  return CompressionFilter(std::move(h), src_filter.m_y, new_m_z);
}

struct ListaTrainResult {
  ListaParams params;
  CompressionFilter filter;
  std::vector<EpochRecord> history;
  double max_norm_dev = 0.0;
  double final_test_nmse_db = kNoValue;
};

// Joint ADAM over (w_d, w_e, p, b, h) against the stage-2 loss; the filter
// keeps its unit-norm projection, the kernels are unconstrained.
inline ListaTrainResult train_lista(const Stage2Data& data, const Source& src,
                                    std::size_t m_z, const StageConfig& cfg,
                                    const ListaParams& init_params,
                                    std::optional<CompressionFilter> init_filter = std::nullopt) {
  cfg.validate();
  if (data.train_y == nullptr || data.train_targets == nullptr)
    throw StateError("train_lista: training measurements and targets are required");
  const Matrix& ty = *data.train_y;
  const Matrix& tt = *data.train_targets;
  const std::size_t my = ty.rows;
  const std::size_t mh = my + m_z - 1;
  const std::size_t ms = init_params.w_d.size();
  const std::size_t n = ty.cols;

  ListaTrainResult res;
  res.params = init_params;
  if (init_filter.has_value()) {
    res.filter = std::move(*init_filter);
    res.filter.h = project_unit_norm(std::move(res.filter.h));
  } else {
    Philox rng(cfg.init_seed, /*stream=*/3);
    Signal h0(mh);
    for (double& v : h0) v = rng.next_normal();
    res.filter = CompressionFilter(project_unit_norm(std::move(h0)), my, m_z);
  }

  AdamState ad_wd(ms, cfg.adam_eps), ad_we(ms, cfg.adam_eps), ad_p(ms, cfg.adam_eps);
  AdamState ad_h(mh, cfg.adam_eps), ad_b(1, cfg.adam_eps);
  std::vector<ListaGrad> slots(n);
  const std::size_t batch = cfg.batch_size == 0 ? n : cfg.batch_size;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = lr_schedule(cfg.lr, epoch, cfg.lr_decay_factor, cfg.lr_decay_period);
    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = lr;

    const auto order = detail::shuffled_indices(n, cfg.init_seed, epoch);
    double epoch_loss = 0.0;
    try {
      for (std::size_t start = 0; start < n; start += batch) {
        const std::size_t stop = std::min(start + batch, n);
        parallel_for(stop - start, [&](std::size_t k) {
          const std::size_t ex = order[start + k];
          slots[start + k] =
              lista_grad_example(ty.col_vec(ex), tt.col_vec(ex), res.params, res.filter);
        });
        Signal gwd(ms, 0.0), gwe(ms, 0.0), gp(ms, 0.0), gh(mh, 0.0);
        Signal gb(1, 0.0);
        for (std::size_t i = start; i < stop; ++i) {
          epoch_loss += slots[i].loss;
          for (std::size_t j = 0; j < ms; ++j) {
            gwd[j] += slots[i].g_wd[j];
            gwe[j] += slots[i].g_we[j];
            gp[j] += slots[i].g_p[j];
          }
          for (std::size_t j = 0; j < mh; ++j) gh[j] += slots[i].g_h[j];
          gb[0] += slots[i].g_b;
        }
        adam_step(ad_wd, gwd, res.params.w_d, lr);
        adam_step(ad_we, gwe, res.params.w_e, lr);
        adam_step(ad_p, gp, res.params.p, lr);
        Signal bvec{res.params.b};
        adam_step(ad_b, gb, bvec, lr);
        res.params.b = bvec[0];
        adam_step(ad_h, gh, res.filter.h, lr);
        res.filter.h = project_unit_norm(std::move(res.filter.h));
        const double dev = std::abs(norm2(res.filter.h) - 1.0);
        res.max_norm_dev = std::max(res.max_norm_dev, dev);
        assert(dev < 1e-12);
      }

      rec.train_loss = epoch_loss;
      if (data.val_y != nullptr && data.val_targets != nullptr) {
        const CompressOp phi = CompressOp::structured(res.filter);
        std::vector<double> losses(data.val_y->cols);
        parallel_for(data.val_y->cols, [&](std::size_t v) {
          const Signal z = apply_compression(res.filter, data.val_y->col_vec(v));
          ListaTrace tr = lista_forward(z, res.params, phi);
          losses[v] = loss_stage2(data.val_targets->col_vec(v), tr.xhat);
        });
        double acc = 0.0;
        for (double l : losses) acc += l;
        rec.val_loss = acc;
      }
      const bool eval_now = (epoch % cfg.eval_every == 0) || (epoch + 1 == cfg.epochs);
      if (eval_now && data.test_y != nullptr && data.test_x != nullptr) {
        const CompressOp phi = CompressOp::structured(res.filter);
        Matrix xhat(data.test_x->rows, data.test_x->cols);
        parallel_for(data.test_y->cols, [&](std::size_t v) {
          const Signal z = apply_compression(res.filter, data.test_y->col_vec(v));
          ListaTrace tr = lista_forward(z, res.params, phi);
          xhat.set_col(v, tr.xhat);
        });
        rec.test_nmse_db = nmse_db(*data.test_x, xhat);
      }
    } catch (const NumericError& e) {
      throw TrainAbort(std::string("train_lista: ") + e.what(), std::move(res.history));
    }
    res.history.push_back(rec);
  }

  res.final_test_nmse_db = res.history.back().test_nmse_db;
  return res;
}

}  // namespace lsmbd

#endif  // LSMBD_TRAINING_HPP
