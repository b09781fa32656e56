// supermask: train, evaluate, ablate and benchmark mask-only training of
// frozen networks.
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "supermask/harness.hpp"
#include "supermask/verification.hpp"

using namespace supermask;

namespace {

/// --config plus one --key=value option per config key on a subcommand.
struct ConfigOptions {
  std::string config_file;
  std::map<std::string, std::string> values;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_file, "flat key=value config file")->check(CLI::ExistingFile);
    for (const auto& key : RunConfig::keys()) cmd->add_option("--" + key, values[key]);
  }

  /// Config file first, then flags; returns the keys that were given as flags.
  RunConfig resolve(const CLI::App* cmd, std::vector<std::string>* given = nullptr) const {
    RunConfig cfg = config_file.empty() ? RunConfig{} : RunConfig::load(config_file);
    for (const auto& [key, value] : values)
      if (cmd->count("--" + key)) {
        cfg.set(key, value);
        if (given) given->push_back(key);
      }
    return cfg;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mask-only training of frozen random networks"};
  app.require_subcommand(1);

  ConfigOptions train_opts, eval_opts, ablate_opts, bench_opts;
  auto* train = app.add_subcommand("train", "train masks and write metrics, summary and checkpoint to --out-dir");
  train_opts.attach(train);

  auto* eval = app.add_subcommand("eval", "score a checkpoint on the test split");
  std::string checkpoint;
  eval->add_option("checkpoint,--checkpoint", checkpoint, "model.smck written by train")->required();
  eval_opts.attach(eval);

  auto* ablate = app.add_subcommand("ablate", "run the rescale x signed-constant x augmentation grid");
  int parallel = 1;
  std::string csv_path;
  ablate->add_option("--parallel", parallel, "cells run concurrently")->check(CLI::PositiveNumber);
  ablate->add_option("--csv", csv_path, "output CSV (default <out-dir>/ablation.csv)");
  ablate_opts.attach(ablate);

  auto* bench = app.add_subcommand("bench", "time rescale overhead of none, SR and DWR");
  int epochs = 10;
  bench->add_option("--epochs", epochs, "timed epochs per variant (at least 10)");
  bench_opts.attach(bench);

  auto* verify = app.add_subcommand("verify", "run the oracle self-checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return e.get_exit_code() == 0 ? exit_ok : exit_usage;
  }

  try {
    if (*train) return cmd_train(train_opts.resolve(train), std::cout);

    if (*eval) {
      std::vector<std::string> given;
      const RunConfig overrides = eval_opts.resolve(eval, &given);
      const EvalReport r = cmd_eval(checkpoint, overrides, given);
      std::cout << "mode " << to_string(r.mode) << " accuracy " << r.accuracy;
      if (r.mode == EvalMode::averaging) std::cout << " variance " << r.variance;
      std::cout << " pruning rate " << r.pruning_rate << " examples " << r.examples << '\n';
      return exit_ok;
    }

    if (*ablate) {
      const RunConfig cfg = ablate_opts.resolve(ablate);
      const auto rows = run_ablation(cfg, parallel);
      const std::filesystem::path path = csv_path.empty() ? std::filesystem::path(cfg.out_dir) / "ablation.csv"
                                                          : std::filesystem::path(csv_path);
      if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
      std::ofstream out(path, std::ios::binary);
      write_ablation_csv(out, rows);
      print_ablation_table(std::cout, rows);
      std::cout << "wrote " << path.string() << '\n';
      return exit_ok;
    }

    if (*bench) {
      RunConfig cfg = bench_opts.resolve(bench);
      if (!bench->count("--arch") && bench_opts.config_file.empty()) cfg.arch = ArchKind::conv4;
      print_bench(std::cout, run_bench(cfg, epochs));
      return exit_ok;
    }

    if (*verify) {
      const auto results = verification::run_oracle_suite();
      verification::print_table(std::cout, results);
      for (const auto& r : results)
        if (!r.passed) return exit_numerical;
      return exit_ok;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e);
  }
  return exit_usage;
}
