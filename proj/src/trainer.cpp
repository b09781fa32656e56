#include "supermask/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "supermask/errors.hpp"

namespace supermask {

void SgdMomentum::step() {
  const auto mu = static_cast<Real>(momentum_);
  for (auto& group : groups_) {
    const auto lr = static_cast<Real>(group.lr);
    for (auto& p : group.params) {
      if (!p.has_grad()) continue;
      auto [it, fresh] = velocity_.try_emplace(p.node(), DenseArray<Real>::zeros(p.shape()));
      auto& v = it->second.values();
      v = mu * v + p.grad().values();
      p.mutable_value().values() -= lr * v;
      p.zero_grad();
    }
  }
}

void SgdMomentum::zero_grad() {
  for (auto& group : groups_)
    for (auto& p : group.params) p.zero_grad();
}

SgdMomentum make_optimizer(Network<Real>& net, const RunConfig& cfg) {
  SgdMomentum::Group masks{{}, cfg.mask_lr};
  SgdMomentum::Group scales{{}, cfg.scale_lr};
  for (auto* l : net.masked_layers()) {
    masks.params.push_back(l->mask.logits);
    if (l->rescale.strategy == RescaleStrategy::smart) scales.params.push_back(l->rescale.factor);
  }
  return SgdMomentum({masks, scales}, cfg.momentum);
}

double accuracy(const DenseArray<Real>& logits, std::span<const int> labels) {
  const auto z = logits.matrix();
  Index correct = 0;
  for (Index i = 0; i < z.rows(); ++i) {
    Index best = 0;
    z.row(i).maxCoeff(&best);
    if (best == labels[static_cast<std::size_t>(i)]) ++correct;
  }
  return z.rows() ? static_cast<double>(correct) / static_cast<double>(z.rows()) : 0.0;
}

namespace {

template <typename MasksFor>
Index batched_correct(const Network<Real>& net, const LabeledDataset& data, Index batch_size, MasksFor masks) {
  Index correct = 0;
  std::vector<Index> rows;
  for (Index start = 0; start < data.size(); start += batch_size) {
    const Index end = std::min(data.size(), start + batch_size);
    rows.resize(static_cast<std::size_t>(end - start));
    std::iota(rows.begin(), rows.end(), start);
    const auto labels = data.gather_labels(rows);
    const auto logits = forward(net, data.gather_images(rows), masks()).value();
    correct += static_cast<Index>(std::lround(accuracy(logits, labels) * static_cast<double>(rows.size())));
  }
  return correct;
}

double ratio(Index correct, Index total) {
  return total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
}

std::vector<Rng> layer_streams(std::uint64_t master, std::size_t n, const std::string& prefix) {
  std::vector<Rng> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(make_stream(master, prefix + std::to_string(i)));
  return out;
}

}  // namespace

double evaluate_threshold(const Network<Real>& net, const LabeledDataset& data, Index batch_size) {
  return ratio(batched_correct(net, data, batch_size, [] { return ForwardMasks<Real>::threshold(); }), data.size());
}

AveragingResult evaluate_averaging(const Network<Real>& net, const LabeledDataset& data, int n, Rng& rng,
                                   double temperature, Index batch_size) {
  if (n <= 0) throw ConfigError("averaging needs at least one sample");
  AveragingResult r;
  std::vector<Rng> streams;
  for (std::size_t i = 0; i < net.masked_layers().size(); ++i) streams.emplace_back(rng());
  // The mean is one ratio of counts, so identical samples reproduce the
  // thresholded accuracy exactly.
  Index correct = 0;
  for (int k = 0; k < n; ++k) {
    const SampledTopology<Real> topo = sample_topology(net, temperature, streams);
    const Index c = batched_correct(net, data, batch_size, [&] { return ForwardMasks<Real>::sampled(topo); });
    correct += c;
    r.per_sample.push_back(ratio(c, data.size()));
  }
  r.mean = ratio(correct, data.size() * n);
  for (double a : r.per_sample) r.variance += (a - r.mean) * (a - r.mean) / n;
  return r;
}

double evaluate(const Network<Real>& net, const LabeledDataset& data, const RunConfig& cfg, Rng& rng) {
  if (cfg.eval == EvalMode::threshold) return evaluate_threshold(net, data);
  return evaluate_averaging(net, data, cfg.avg_samples, rng, cfg.temperature).mean;
}

ParameterSnapshot ParameterSnapshot::capture(const Network<Real>& net) {
  ParameterSnapshot s;
  for (const auto* l : net.layers()) {
    s.masks.push_back(l->mask.values());
    s.scales.push_back(l->rescale.factor.defined() ? l->rescale.factor.value() : DenseArray<Real>());
  }
  return s;
}

void ParameterSnapshot::restore(Network<Real>& net) const {
  auto layers = net.layers();
  if (layers.size() != masks.size()) throw ContractError("snapshot does not match network");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    layers[i]->mask.mutable_values() = masks[i];
    if (layers[i]->rescale.factor.defined()) layers[i]->rescale.factor.mutable_value() = scales[i];
  }
}

void TrainRecord::write_csv(std::ostream& out) const {
  const std::size_t n_scales = epochs.empty() ? 0 : epochs.front().scales.size();
  out << "epoch,train_loss,val_acc,pruning_rate,epoch_seconds";
  for (std::size_t i = 1; i <= n_scales; ++i) out << ",s_" << i;
  out << '\n';
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return std::string(buf);
  };
  for (const auto& e : epochs) {
    out << e.epoch << ',' << num(e.train_loss) << ',' << num(e.val_acc) << ',' << num(e.pruning_rate) << ','
        << num(e.epoch_seconds);
    for (double s : e.scales) out << ',' << num(s);
    out << '\n';
  }
}

std::string layer_statistics(const Network<Real>& net) {
  std::ostringstream os;
  const auto layers = net.layers();
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& m = layers[i]->mask.values().values();
    os << "layer " << i << ": m_hat min " << m.minCoeff() << " max " << m.maxCoeff() << " mean " << m.mean()
       << " finite " << (m.isFinite().all() ? "yes" : "no") << " scale " << layers[i]->rescale.learned_value()
       << '\n';
  }
  return os.str();
}

TrainRecord train(Network<Real>& net, const DatasetSplits& data, const RunConfig& cfg, const EpochCallback& on_epoch) {
  cfg.validate();
  if (data.train.size() == 0 || data.val.size() == 0) throw ConfigError("training needs non-empty train and val splits");

  SgdMomentum optimizer = make_optimizer(net, cfg);
  const auto masked = net.masked_layers();
  std::vector<Rng> gumbel = layer_streams(cfg.seed, masked.size(), "gumbel-layer-");
  Rng shuffle_rng = make_stream(cfg.seed, "data");
  Rng augment_rng = make_stream(cfg.seed, "augment");
  Rng eval_rng = make_stream(cfg.seed, "eval");
  const bool can_augment = cfg.augment && data.train.images.rank() == 4;

  TrainRecord record;
  std::vector<Index> order(static_cast<std::size_t>(data.train.size()));
  std::iota(order.begin(), order.end(), Index{0});
  const auto batch = static_cast<Index>(cfg.batch_size);

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    std::optional<SampledTopology<Real>> topology;
    double loss_sum = 0.0;
    Index seen = 0;
    for (Index first = 0; first < data.train.size(); first += batch) {
      const Index last = std::min(data.train.size(), first + batch);
      const std::span<const Index> rows(order.data() + first, static_cast<std::size_t>(last - first));
      DenseArray<Real> x = data.train.gather_images(rows);
      if (can_augment) x = augment(x, augment_rng, cfg.augment_pad);
      const std::vector<int> y = data.train.gather_labels(rows);

      if (!topology || cfg.mask_per == MaskResample::per_batch)
        topology = sample_topology(net, cfg.temperature, gumbel);
      const Var<Real> loss = softmax_cross_entropy(forward(net, x, ForwardMasks<Real>::sampled(*topology)), y);
      const double value = loss.value()[0];
      if (!std::isfinite(value))
        throw NumericalError("non-finite loss at epoch " + std::to_string(epoch) + "\n" + layer_statistics(net));
      backward(loss);
      optimizer.step();
      loss_sum += value * static_cast<double>(rows.size());
      seen += static_cast<Index>(rows.size());
    }

    EpochRecord e;
    e.epoch = epoch;
    e.train_loss = loss_sum / static_cast<double>(seen);
    e.val_acc = evaluate(net, data.val, cfg, eval_rng);
    e.pruning_rate = threshold_pruning_rate(net);
    for (const auto* l : net.layers()) e.scales.push_back(l->rescale.learned_value());
    e.epoch_seconds =
        cfg.record_time ? std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() : 0.0;
    record.epochs.push_back(e);

    if (e.val_acc > record.best_val_acc) {
      record.best_val_acc = e.val_acc;
      record.best_epoch = epoch;
      record.best = ParameterSnapshot::capture(net);
    }
    if (on_epoch && !on_epoch(e)) break;
    if (epoch - record.best_epoch >= cfg.patience) break;
  }
  record.best.restore(net);
  return record;
}

}  // namespace supermask
