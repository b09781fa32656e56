#pragma once

#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <unordered_map>
#include <vector>

#include "supermask/config.hpp"
#include "supermask/data.hpp"
#include "supermask/network.hpp"

namespace supermask {

/// Non-Nesterov SGD with momentum: v <- mu v + g, p <- p - lr v. Each group
/// carries its own learning rate. Gradients are cleared after every step.
class SgdMomentum {
 public:
  struct Group {
    std::vector<Var<Real>> params;
    double lr = 0.0;
  };

  SgdMomentum(std::vector<Group> groups, double momentum) : groups_(std::move(groups)), momentum_(momentum) {}

  void step();
  void zero_grad();
  const std::vector<Group>& groups() const { return groups_; }

 private:
  std::vector<Group> groups_;
  double momentum_;
  std::unordered_map<const TapeNode<Real>*, DenseArray<Real>> velocity_;
};

/// Optimizer groups for mask logits (mask_lr) and learned scales (scale_lr).
SgdMomentum make_optimizer(Network<Real>& net, const RunConfig& cfg);

double accuracy(const DenseArray<Real>& logits, std::span<const int> labels);

/// Single deterministic pass with the thresholded topology.
double evaluate_threshold(const Network<Real>& net, const LabeledDataset& data, Index batch_size = 256);

struct AveragingResult {
  double mean = 0.0;
  double variance = 0.0;
  std::vector<double> per_sample;
};

/// Mean accuracy over n independently sampled topologies.
AveragingResult evaluate_averaging(const Network<Real>& net, const LabeledDataset& data, int n, Rng& rng,
                                   double temperature = 1.0, Index batch_size = 256);

/// Mask logits and learned scales; restoring it rewinds training state.
struct ParameterSnapshot {
  std::vector<DenseArray<Real>> masks;
  std::vector<DenseArray<Real>> scales;

  static ParameterSnapshot capture(const Network<Real>& net);
  void restore(Network<Real>& net) const;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_acc = 0.0;
  double pruning_rate = 0.0;
  double epoch_seconds = 0.0;
  std::vector<double> scales;  // learned factor per layer, 1 when not learned
};

struct TrainRecord {
  std::vector<EpochRecord> epochs;
  int best_epoch = -1;
  double best_val_acc = -1.0;
  ParameterSnapshot best;

  /// epoch,train_loss,val_acc,pruning_rate,epoch_seconds,s_1..s_L
  void write_csv(std::ostream& out) const;
};

/// Called after each epoch; returning false stops training early.
using EpochCallback = std::function<bool(const EpochRecord&)>;

/// Mask-only training. Each mini-batch samples a topology (or reuses the
/// epoch's), runs the straight-through forward, and steps mask logits and
/// learned scales. Stops when validation accuracy has not strictly improved
/// for `patience` epochs; the network is left at the best epoch's parameters.
/// Throws NumericalError on a non-finite loss.
TrainRecord train(Network<Real>& net, const DatasetSplits& data, const RunConfig& cfg,
                  const EpochCallback& on_epoch = {});

double evaluate(const Network<Real>& net, const LabeledDataset& data, const RunConfig& cfg, Rng& rng);

/// Per-layer summary used in numerical-abort diagnostics.
std::string layer_statistics(const Network<Real>& net);

}  // namespace supermask
