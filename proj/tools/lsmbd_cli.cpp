// Command-line harness for the learned structured compressive S-MBD
// pipeline: data generation, two-stage training, baseline evaluation, plot
// data, and the operator complexity benchmark.

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "lsmbd/pipeline.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitDependency = 3;
constexpr int kExitNumeric = 4;

struct CommonOpts {
  std::string config_path;
  std::string out_dir = "runs/default";
  std::string preset = "desk";
  std::uint64_t seed = 0;
  bool seed_set = false;
  bool overwrite = false;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--config", opts.config_path, "configuration file (key = value sections)")
      ->check(CLI::ExistingFile);
  cmd->add_option("--out", opts.out_dir, "run directory for inputs/outputs");
  cmd->add_option("--preset", opts.preset, "base preset: desk or paper")
      ->check(CLI::IsMember({"desk", "paper"}));
  cmd->add_option("--seed", opts.seed, "override the data seed")
      ->each([&opts](const std::string&) { opts.seed_set = true; });
  cmd->add_flag("--overwrite", opts.overwrite, "allow replacing existing outputs");
}

lsmbd::RunConfig resolve(const CommonOpts& opts) {
  lsmbd::RunConfig cfg =
      opts.preset == "paper" ? lsmbd::preset_paper() : lsmbd::preset_desk();
  if (!opts.config_path.empty())
    cfg = lsmbd::apply_config(cfg, lsmbd::ConfigText::parse_file(opts.config_path));
  if (opts.seed_set) cfg.data_seed = opts.seed;
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"learned structured compressive sparse multichannel blind deconvolution"};
  app.require_subcommand(1);

  CommonOpts o_gen, o_s1, o_s2, o_eval, o_plots, o_bench, o_sweep;
  std::vector<std::size_t> ladder = {512, 1024, 2048, 4096, 8192, 16384};

  CLI::App* c_gen = app.add_subcommand("generate", "write train/val/test datasets");
  add_common(c_gen, o_gen);
  CLI::App* c_s1 = app.add_subcommand("train-stage1", "learn the source from full measurements");
  add_common(c_s1, o_s1);
  CLI::App* c_s2 = app.add_subcommand("train-stage2",
                                      "learn compression filters for every configured CR");
  add_common(c_s2, o_s2);
  CLI::App* c_eval = app.add_subcommand("evaluate", "score methods on the test set");
  add_common(c_eval, o_eval);
  CLI::App* c_plots = app.add_subcommand("emit-plots", "write columnar plot data files");
  add_common(c_plots, o_plots);
  CLI::App* c_bench =
      app.add_subcommand("bench-operator", "time structured vs dense compression");
  add_common(c_bench, o_bench);
  c_bench->add_option("--ladder", ladder, "M_y sizes to time");
  CLI::App* c_sweep =
      app.add_subcommand("sweep", "train-stage2 followed by evaluate over the CR list");
  add_common(c_sweep, o_sweep);

  CLI11_PARSE(app, argc, argv);

  try {
    if (c_gen->parsed()) {
      lsmbd::pipeline::cmd_generate(resolve(o_gen), o_gen.out_dir, o_gen.overwrite);
    } else if (c_s1->parsed()) {
      lsmbd::pipeline::cmd_train_stage1(resolve(o_s1), o_s1.out_dir);
    } else if (c_s2->parsed()) {
      lsmbd::pipeline::cmd_train_stage2(resolve(o_s2), o_s2.out_dir);
    } else if (c_eval->parsed()) {
      lsmbd::pipeline::cmd_evaluate(resolve(o_eval), o_eval.out_dir);
    } else if (c_plots->parsed()) {
      lsmbd::pipeline::cmd_emit_plots(resolve(o_plots), o_plots.out_dir);
    } else if (c_bench->parsed()) {
      const auto rows =
          lsmbd::pipeline::cmd_bench_operator(resolve(o_bench), o_bench.out_dir, ladder);
      for (const auto& r : rows)
        std::cout << "my=" << r.m_y << " structured_ns=" << r.structured_ns
                  << " dense_ns=" << r.dense_ns << "\n";
      std::cout << "exponent structured=" << lsmbd::fit_growth_exponent(rows, true)
                << " dense=" << lsmbd::fit_growth_exponent(rows, false) << "\n";
    } else if (c_sweep->parsed()) {
      lsmbd::pipeline::cmd_sweep(resolve(o_sweep), o_sweep.out_dir);
    }
  } catch (const lsmbd::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const lsmbd::ParameterError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const lsmbd::DependencyError& e) {
    std::cerr << "dependency error: " << e.what() << "\n";
    return kExitDependency;
  } catch (const lsmbd::TrainAbort& e) {
    std::cerr << "numeric divergence: " << e.what()
              << " (partial history written)\n";
    return kExitNumeric;
  } catch (const lsmbd::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const lsmbd::IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kExitDependency;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kExitOk;
}
