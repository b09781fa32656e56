#include <doctest.h>

#include <sstream>

#include "supermask/errors.hpp"
#include "supermask/harness.hpp"
#include "supermask/trainer.hpp"

using namespace supermask;

namespace {

RunConfig quick(int epochs) {
  RunConfig cfg;
  cfg.synthetic_size = 200;
  cfg.max_epochs = epochs;
  cfg.patience = epochs;
  cfg.batch_size = 32;
  cfg.record_time = false;
  return cfg;
}

}  // namespace

TEST_SUITE("trainer") {

TEST_CASE("momentum step matches the closed form") {
  Var<Real> p = Var<Real>::parameter(DenseArray<Real>({1}, {1}));
  SgdMomentum opt({{{p}, 0.1}}, 0.9);
  for (int k = 0; k < 2; ++k) {
    p.grad_buffer()[0] = 2;  // constant gradient
    opt.step();
    CHECK_FALSE(p.has_grad());
  }
  // v1 = 2, p1 = 0.8; v2 = 0.9 * 2 + 2 = 3.8, p2 = 0.8 - 0.38
  CHECK(p.value()[0] == doctest::Approx(0.42).epsilon(1e-6));
}

TEST_CASE("parameters without gradients are left alone") {
  Var<Real> p = Var<Real>::parameter(DenseArray<Real>({2}, {1, 2}));
  SgdMomentum opt({{{p}, 1.0}}, 0.9);
  opt.step();
  CHECK(p.value() == DenseArray<Real>({2}, {1, 2}));
}

TEST_CASE("plain SGD step without momentum") {
  Var<Real> p = Var<Real>::parameter(DenseArray<Real>({2}, {1, -1}));
  SgdMomentum opt({{{p}, 0.5}}, 0.0);
  p.grad_buffer() = DenseArray<Real>({2}, {2, 4});
  opt.step();
  CHECK(p.value() == DenseArray<Real>({2}, {0, -3}));
}

TEST_CASE("momentum descends a quadratic bowl") {
  // f(p) = sum((p - c)^2), heavy ball with lr 0.1 and mu 0.9.
  const DenseArray<Real> target({3}, {0.75f, -0.5f, 0.25f});
  Var<Real> p = Var<Real>::parameter(DenseArray<Real>::zeros({3}));
  SgdMomentum opt({{{p}, 0.1}}, 0.9);
  int steps = 0;
  while (steps < 500 && (p.value().values() - target.values()).abs().maxCoeff() > 1e-6f) {
    const auto d = add(p, Var<Real>::constant(DenseArray<Real>(target.shape(), -target.values())));
    backward(sum(elementwise_mul(d, d)));
    opt.step();
    ++steps;
  }
  CHECK(steps < 500);
  CHECK((p.value().values() - target.values()).abs().maxCoeff() <= 1e-6f);
}

TEST_CASE("patience zero stops after one epoch") {
  RunConfig cfg = quick(50);
  cfg.patience = 0;
  const auto data = load_data(cfg);
  auto net = build_network(cfg, data);
  const auto record = train(net, data, cfg);
  CHECK(record.epochs.size() == 1);
  CHECK(record.best_epoch == 0);
}

TEST_CASE("zero learning rates leave masks and accuracy unchanged") {
  RunConfig cfg = quick(4);
  cfg.mask_lr = 0;
  cfg.scale_lr = 0;
  cfg.rescale = RescaleStrategy::smart;
  const auto data = load_data(cfg);
  auto net = build_network(cfg, data);
  const auto before = ParameterSnapshot::capture(net);
  const auto record = train(net, data, cfg);
  REQUIRE(record.epochs.size() == 4);
  for (const auto& e : record.epochs) CHECK(e.val_acc == record.epochs.front().val_acc);
  const auto after = ParameterSnapshot::capture(net);
  for (std::size_t i = 0; i < before.masks.size(); ++i) {
    CHECK(before.masks[i] == after.masks[i]);
    CHECK(before.scales[i] == after.scales[i]);
  }
}

TEST_CASE("training restores the best epoch and keeps weights frozen") {
  RunConfig cfg = quick(8);
  const auto data = load_data(cfg);
  auto net = build_network(cfg, data);
  const auto hash = net.weight_hash();
  const auto record = train(net, data, cfg);
  CHECK(net.weight_hash() == hash);
  CHECK(evaluate_threshold(net, data.val) == record.best_val_acc);
  for (const auto& e : record.epochs) {
    CHECK(e.val_acc <= record.best_val_acc);
    CHECK(e.epoch <= record.best_epoch + cfg.patience);
  }
}

TEST_CASE("early stopping halts patience epochs after the best") {
  RunConfig cfg = quick(100);
  cfg.patience = 3;
  cfg.mask_lr = 0;  // flat accuracy: the first epoch stays best
  const auto data = load_data(cfg);
  auto net = build_network(cfg, data);
  const auto record = train(net, data, cfg);
  CHECK(record.best_epoch == 0);
  CHECK(record.epochs.size() == 4);
}

TEST_CASE("averaging variance vanishes once masks saturate") {
  const auto data = make_synthetic_task(200, 4);
  auto net = build_mlp<Real>({2, 16, 16, 2}, 4);
  Rng init(2);
  std::normal_distribution<float> n(0, 1);
  for (auto* l : net.masked_layers())
    for (Index i = 0; i < l->mask.values().size(); ++i) l->mask.mutable_values()[i] = n(init);
  Rng rng(6);
  const double open = evaluate_averaging(net, data.val, 10, rng).variance;
  for (auto* l : net.masked_layers()) l->mask.mutable_values().values() *= 40.0f;
  const double saturated = evaluate_averaging(net, data.val, 10, rng).variance;
  CHECK(open > 0.0);
  CHECK(saturated < open);
}

TEST_CASE("averaging with one sample is one sampled evaluation") {
  const auto data = make_synthetic_task(64, 3);
  auto net = build_mlp<Real>({2, 8, 2}, 3);
  Rng a(5), b(5);
  const auto r = evaluate_averaging(net, data.val, 1, a);
  CHECK(r.per_sample.size() == 1);
  CHECK(r.variance == 0.0);
  std::vector<Rng> streams;
  for (std::size_t i = 0; i < net.masked_layers().size(); ++i) streams.emplace_back(b());
  const auto topo = sample_topology(net, 1.0, streams);
  CHECK(r.mean == accuracy(forward(net, data.val.images, ForwardMasks<Real>::sampled(topo)).value(), data.val.labels));
  CHECK_THROWS_AS(evaluate_averaging(net, data.val, 0, a), ConfigError);
}

TEST_CASE("accuracy counts argmax hits") {
  const DenseArray<Real> logits({3, 2}, {0.1f, 0.9f, 2, 1, 0, 0});
  CHECK(accuracy(logits, std::vector<int>{1, 1, 0}) == doctest::Approx(2.0 / 3));
}

TEST_CASE("non-finite losses abort with layer statistics") {
  RunConfig cfg = quick(3);
  auto data = load_data(cfg);
  data.train.images[0] = std::numeric_limits<Real>::quiet_NaN();
  auto net = build_network(cfg, data);
  try {
    train(net, data, cfg);
    FAIL("expected a numerical error");
  } catch (const NumericalError& e) {
    CHECK(std::string(e.what()).find("layer 0") != std::string::npos);
  }
}

TEST_CASE("identical seeds give identical CSVs") {
  RunConfig cfg = quick(5);
  cfg.rescale = RescaleStrategy::smart;
  auto run = [&] {
    const auto data = load_data(cfg);
    auto net = build_network(cfg, data);
    std::ostringstream csv;
    train(net, data, cfg).write_csv(csv);
    return csv.str();
  };
  const auto first = run();
  CHECK(first == run());
  CHECK(first.rfind("epoch,train_loss,val_acc,pruning_rate,epoch_seconds,s_1,s_2,s_3\n", 0) == 0);
}

TEST_CASE("per-epoch mask resampling trains too") {
  RunConfig cfg = quick(3);
  cfg.mask_per = MaskResample::per_epoch;
  const auto data = load_data(cfg);
  auto net = build_network(cfg, data);
  CHECK(train(net, data, cfg).epochs.size() == 3);
}

}  // TEST_SUITE
