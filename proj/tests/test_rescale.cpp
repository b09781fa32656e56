#include <doctest.h>

#include <sstream>

#include "supermask/ops.hpp"
#include "supermask/rescale.hpp"
#include "supermask/verification.hpp"

using namespace supermask;

namespace {

/// Captures std::cerr for the lifetime of the object.
struct CerrCapture {
  std::ostringstream text;
  std::streambuf* old = std::cerr.rdbuf(text.rdbuf());
  ~CerrCapture() { std::cerr.rdbuf(old); }
};

}  // namespace

TEST_SUITE("rescale") {

TEST_CASE("dynamic factor inverts the keep rate") {
  CHECK(dwr_factor(DenseArray<float>({4}, {1, 0, 1, 1})) == doctest::Approx(4.0 / 3.0));
  CHECK(dwr_factor(DenseArray<float>({4}, {1, 0, 1, 1}), DwrReading::prune) == doctest::Approx(4.0));
  CHECK(dwr_factor(DenseArray<float>::ones({8})) == 1.0);
}

TEST_CASE("an all-pruned mask floors the rate and warns") {
  CerrCapture capture;
  CHECK(dwr_factor(DenseArray<float>::zeros({10})) == doctest::Approx(10.0));
  CHECK(capture.text.str().find("floored") != std::string::npos);
}

TEST_CASE("smart rescale multiplies by the learned scalar") {
  auto state = RescaleState<double>::smart(2.0);
  Var<double> w = Var<double>::parameter(DenseArray<double>({3}, {1, -2, 0}));
  const auto out = apply_rescale(state, w, DenseArray<double>({3}, {1, 1, 0}));
  CHECK(out.value() == DenseArray<double>({3}, {2, -4, 0}));
  backward(sum(out));
  CHECK(state.factor.grad()[0] == -1.0);
  CHECK(w.grad() == DenseArray<double>::filled({3}, 2));
  CHECK(state.learned_value() == 2.0);
}

TEST_CASE("smart rescale at s = 1 is bit-identical to no rescale") {
  LayerOptions none, smart;
  smart.rescale = RescaleStrategy::smart;
  smart.smart_init = 1.0;
  auto a = build_mlp<float>({6, 12, 4}, 3, none);
  auto b = build_mlp<float>({6, 12, 4}, 3, smart);
  Rng rng(4);
  std::normal_distribution<float> n;
  DenseArray<float> x({5, 6});
  for (Index i = 0; i < x.size(); ++i) x[i] = n(rng);
  for (std::size_t l = 0; l < a.masked_layers().size(); ++l)
    for (Index i = 0; i < a.masked_layers()[l]->mask.values().size(); ++i) {
      const float v = n(rng);
      a.masked_layers()[l]->mask.mutable_values()[i] = v;
      b.masked_layers()[l]->mask.mutable_values()[i] = v;
    }
  CHECK(forward(a, x, ForwardMasks<float>::threshold()).value() == forward(b, x, ForwardMasks<float>::threshold()).value());
}

TEST_CASE("dL/ds matches central differences") {
  LayerOptions opt;
  opt.rescale = RescaleStrategy::smart;
  auto net = build_mlp<double>({4, 8, 3}, 2, opt);
  std::vector<Rng> streams{Rng(1), Rng(2)};
  const auto topo = sample_topology(net, 1.0, streams);
  DenseArray<double> x({6, 4});
  Rng rng(3);
  std::normal_distribution<double> n;
  for (Index i = 0; i < x.size(); ++i) x[i] = n(rng);
  const std::vector<int> y{0, 1, 2, 0, 1, 2};
  std::vector<Var<double>> scales;
  for (auto* l : net.masked_layers()) scales.push_back(l->rescale.factor);
  const double err = verification::tape_vs_finite_difference(
      [&] { return softmax_cross_entropy(forward(net, x, ForwardMasks<double>::sampled(topo)), y); }, scales, 1e-5);
  CHECK(err < 1e-4);
}

TEST_CASE("no rescale passes the weights through") {
  const auto state = RescaleState<float>::none();
  const auto w = Var<float>::constant(DenseArray<float>({2}, {3, 4}));
  CHECK(apply_rescale(state, w, DenseArray<float>::ones({2})).value() == w.value());
  CHECK(state.learned_value() == 1.0f);
}

TEST_CASE("dynamic rescale is not learned and uses the mask") {
  auto state = RescaleState<float>::dynamic();
  CHECK_FALSE(state.factor.defined());
  const auto w = Var<float>::constant(DenseArray<float>({4}, {1, 0, 2, 0}));
  CHECK(apply_rescale(state, w, DenseArray<float>({4}, {1, 0, 1, 0})).value() ==
        DenseArray<float>({4}, {2, 0, 4, 0}));
}

TEST_CASE("rescale clock accumulates only inside a scope") {
  auto state = RescaleState<double>::smart(1.5);
  Var<double> w = Var<double>::parameter(DenseArray<double>::ones({1000}));
  RescaleClock clock;
  {
    RescaleClockScope scope(clock);
    backward(sum(apply_rescale(state, w, DenseArray<double>::ones({1000}))));
  }
  const auto after = clock.elapsed;
  CHECK(after.count() > 0);
  backward(sum(apply_rescale(state, w, DenseArray<double>::ones({1000}))));
  CHECK(clock.elapsed == after);
}

TEST_CASE("signed constant uses sign times population std") {
  const DenseArray<double> w({4}, {1, -1, 3, 0});
  const double mean = 0.75;
  const double sd = std::sqrt(((1 - mean) * (1 - mean) + (-1 - mean) * (-1 - mean) + (3 - mean) * (3 - mean) +
                               mean * mean) / 4);
  const auto sc = signed_constant_transform(w);
  CHECK(sc[0] == doctest::Approx(sd));
  CHECK(sc[1] == doctest::Approx(-sd));
  CHECK(sc[3] == doctest::Approx(sd));  // sign(0) = +1
}

TEST_CASE("signed constant applied twice keeps signs and a single magnitude") {
  Rng rng(3);
  std::normal_distribution<double> n(0, 0.3);
  DenseArray<double> w({501});
  for (Index i = 0; i < w.size(); ++i) w[i] = n(rng);
  const auto once = signed_constant_transform(w);
  const auto twice = signed_constant_transform(once);
  CHECK((once.values().sign() == twice.values().sign()).all());
  CHECK((once.values() >= 0).cast<int>().sum() == (w.values() >= 0).cast<int>().sum());
  // Entries are +-s with sign imbalance b = mean(sign), so the second pass has
  // population std s * sqrt(1 - b^2).
  const double s = std::abs(once[0]);
  const double b = once.values().sign().mean();
  CHECK(std::abs(twice[0]) == doctest::Approx(s * std::sqrt(1 - b * b)).epsilon(1e-12));
}

TEST_CASE("signed constant is idempotent on sign-balanced layers") {
  const DenseArray<double> w({6}, {0.4, -1.2, 2.0, -0.1, 0.7, -0.3});
  const auto once = signed_constant_transform(w);
  const auto twice = signed_constant_transform(once);
  CHECK((once.values() - twice.values()).abs().maxCoeff() < 1e-15);
  CHECK(signed_constant_transform(DenseArray<double>({2}, {-2, 2})) == DenseArray<double>({2}, {-2, 2}));
}

TEST_CASE("signed constant of a constant layer is zero with a warning") {
  CerrCapture capture;
  const auto sc = signed_constant_transform(DenseArray<float>::filled({6}, 0.7f));
  CHECK(sc == DenseArray<float>::zeros({6}));
  CHECK_FALSE(capture.text.str().empty());
}

}  // TEST_SUITE
