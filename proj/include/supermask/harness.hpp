#pragma once

#include <exception>
#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "supermask/config.hpp"
#include "supermask/data.hpp"
#include "supermask/trainer.hpp"

namespace supermask {

enum ExitCode : int { exit_ok = 0, exit_usage = 1, exit_data = 2, exit_numerical = 3 };

/// Maps an exception escaping a command to its process exit code.
int exit_code_for(const std::exception& e);

/// CIFAR files are looked up in the data root and in its conventional
/// subdirectory (cifar-10-batches-bin, cifar-100-binary). Synthetic data is
/// generated from the seed: 2-d blobs for the MLP, image blobs for convs.
DatasetSplits load_data(const RunConfig& cfg);

/// Network for the configured architecture, sized from the data.
Network<Real> build_network(const RunConfig& cfg, const DatasetSplits& data);

struct ExperimentResult {
  TrainRecord record;
  double test_threshold = 0.0;
  double test_averaging = 0.0;
  double final_pruning_rate = 0.0;
};

/// Trains, then scores the test split at the best-validation parameters.
ExperimentResult run_experiment(const RunConfig& cfg, const DatasetSplits& data, Network<Real>& net,
                                const EpochCallback& on_epoch = {});

/// Writes metrics.csv, summary.json and model.smck into cfg.out_dir.
int cmd_train(const RunConfig& cfg, std::ostream& log);

struct EvalReport {
  EvalMode mode = EvalMode::threshold;
  double accuracy = 0.0;
  double variance = 0.0;  // across sampled topologies; 0 for thresholding
  double pruning_rate = 0.0;
  Index examples = 0;
};

/// Rebuilds the network from the checkpoint's config echo and scores the
/// test split of the dataset selected by `overrides` (dataset, data-dir, eval,
/// avg-samples, seed; other keys come from the checkpoint).
EvalReport cmd_eval(const std::filesystem::path& checkpoint, const RunConfig& overrides,
                    const std::vector<std::string>& overridden_keys);

/// Column order of the ablation CSV. One row per (arch, augment, cell).
inline constexpr const char* kAblationHeader =
    "arch,augment,cell,rescale,weights,status,best_epoch,epochs_run,best_val_acc,test_threshold,test_averaging,"
    "pruning_rate";

struct AblationRow {
  ArchKind arch = ArchKind::mlp;
  bool augment = false;
  std::string cell;  // "none", "WR", "SC" or "WR+SC"
  RescaleStrategy rescale = RescaleStrategy::none;
  WeightScheme weights = WeightScheme::kaiming_normal;
  std::string status;  // "ok", "skipped: ..." or "failed: ..."
  ExperimentResult result;
};

/// Grid {none, WR, SC, WR+SC} x augmentation {off, on} x cfg.archs. WR is the
/// configured rescale, or smart when none is configured. Cells that cannot
/// run (augmenting 2-d inputs) are reported as skipped.
std::vector<AblationRow> run_ablation(const RunConfig& base, int parallel = 1);
void write_ablation_csv(std::ostream& out, const std::vector<AblationRow>& rows);
/// Table-like view: one line per arch and evaluation mode, one column per cell.
void print_ablation_table(std::ostream& out, const std::vector<AblationRow>& rows);

struct Moments {
  double mean = 0.0;
  double std = 0.0;
};
Moments moments(const std::vector<double>& xs);

struct BenchVariant {
  RescaleStrategy rescale = RescaleStrategy::none;
  std::vector<double> epoch_seconds;     // wall clock per epoch
  std::vector<double> rescale_seconds;   // time inside rescale forward/backward per epoch
  int best_epoch = -1;
};

struct BenchReport {
  ArchKind arch = ArchKind::conv4;
  int epochs = 0;
  std::vector<BenchVariant> variants;  // none, smart, dynamic

  const BenchVariant& variant(RescaleStrategy r) const;
  /// Per-epoch wall-clock difference to the no-rescale run.
  Moments wall_overhead(RescaleStrategy r) const;
  Moments instrumented_overhead(RescaleStrategy r) const;
};

/// Trains none, SR and DWR networks from the same seed and data for exactly
/// `epochs` epochs each and times them.
BenchReport run_bench(const RunConfig& base, int epochs);
void print_bench(std::ostream& out, const BenchReport& report);

}  // namespace supermask
