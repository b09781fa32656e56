#include <doctest.h>

#include <cmath>
#include <random>

#include "supermask/errors.hpp"
#include "supermask/network.hpp"
#include "supermask/verification.hpp"

using namespace supermask;

namespace {

Index conv_params(Index f, Index c) { return f * c * 9; }

}  // namespace

TEST_SUITE("network") {

TEST_CASE("conv family parameter counts follow from the layer tables") {
  // 32x32 input halves once per conv pair before the 256-256-10 head.
  const Index conv2 = conv_params(64, 3) + conv_params(64, 64) + 64 * 16 * 16 * 256 + 256 * 256 + 256 * 10;
  const Index conv4 = conv_params(64, 3) + conv_params(64, 64) + conv_params(128, 64) + conv_params(128, 128) +
                      128 * 8 * 8 * 256 + 256 * 256 + 256 * 10;
  const Index conv6 = conv_params(64, 3) + conv_params(64, 64) + conv_params(128, 64) + conv_params(128, 128) +
                      conv_params(256, 128) + conv_params(256, 256) + 256 * 4 * 4 * 256 + 256 * 256 + 256 * 10;
  CHECK(conv2 == 4300992);
  CHECK(parameter_count(build_conv_family<float>(ConvVariant::conv2, 10, 0)) == conv2);
  CHECK(parameter_count(build_conv_family<float>(ConvVariant::conv4, 10, 0)) == conv4);
  CHECK(parameter_count(build_conv_family<float>(ConvVariant::conv6, 10, 0)) == conv6);
}

TEST_CASE("conv2 has two conv and three dense prunable layers") {
  const auto net = build_conv_family<float>(ConvVariant::conv2, 10, 1, {}, {3, 32, 32}, 8);
  const auto layers = net.masked_layers();
  REQUIRE(layers.size() == 5);
  CHECK(layers[0]->kind == LayerKind::conv2d);
  CHECK(layers[1]->kind == LayerKind::conv2d);
  CHECK(layers[2]->kind == LayerKind::dense);
  CHECK(layers[4]->activation == Activation::none);
  for (const auto* l : layers) CHECK(l->mask.shape() == l->weights().shape());
}

TEST_CASE("conv forward produces batch x classes logits") {
  const auto net = build_conv_family<float>(ConvVariant::conv6, 7, 2, {}, {3, 32, 32}, 16);
  const auto y = forward(net, DenseArray<float>::filled({2, 3, 32, 32}, 0.5f), ForwardMasks<float>::threshold());
  CHECK(y.shape() == Shape{2, 7});
  CHECK_THROWS_AS(build_conv_family<float>(ConvVariant::conv6, 10, 0, {}, {3, 20, 20}), ConfigError);
}

TEST_CASE("same seed gives identical frozen weights") {
  CHECK(build_mlp<float>({5, 8, 3}, 9).weight_hash() == build_mlp<float>({5, 8, 3}, 9).weight_hash());
  CHECK(build_mlp<float>({5, 8, 3}, 9).weight_hash() != build_mlp<float>({5, 8, 3}, 10).weight_hash());
}

TEST_CASE("kaiming initialization has the stated std") {
  Rng rng(4);
  const auto w = init_weights<double>({500, 200}, WeightScheme::kaiming_normal, rng);
  const double sd = std::sqrt((w.values() - w.values().mean()).square().mean());
  CHECK(sd == doctest::Approx(0.1).epsilon(0.02));
  const auto scaled = init_weights<double>({500, 200}, WeightScheme::kaiming_scaled, rng);
  const double sd_scaled = std::sqrt((scaled.values() - scaled.values().mean()).square().mean());
  CHECK(sd_scaled == doctest::Approx(0.1 * std::sqrt(2.0)).epsilon(0.02));
}

TEST_CASE("signed constant initialization has one magnitude per layer") {
  Rng rng(5);
  const auto w = init_weights<float>({40, 30}, WeightScheme::signed_constant_of_kaiming, rng);
  const float m = std::abs(w[0]);
  CHECK((w.values().abs() == m).all());
}

TEST_CASE("all-zero masks leave only the biases") {
  LayerOptions opt;
  opt.biases = true;
  auto net = build_mlp<float>({3, 4, 2}, 6, opt);
  for (auto* l : net.masked_layers()) l->mask.mutable_values().values().setConstant(-1);
  const auto y = forward(net, DenseArray<float>({1, 3}, {5, -2, 9}), ForwardMasks<float>::threshold()).value();
  // Hidden layer: relu(b1); output: 0 * w2 relu(b1) + b2.
  const auto& b2 = net.masked_layers()[1]->bias->value();
  CHECK(y[0] == b2[0]);
  CHECK(y[1] == b2[1]);

  auto plain = build_mlp<float>({3, 4, 2}, 6);
  for (auto* l : plain.masked_layers()) l->mask.mutable_values().values().setConstant(-1);
  CHECK(forward(plain, DenseArray<float>({1, 3}, {5, -2, 9}), ForwardMasks<float>::threshold()).value() ==
        DenseArray<float>::zeros({1, 2}));
}

TEST_CASE("threshold forward is deterministic") {
  auto net = build_mlp<float>({6, 10, 3}, 7);
  Rng rng(1);
  std::normal_distribution<float> n;
  for (auto* l : net.masked_layers())
    for (Index i = 0; i < l->mask.values().size(); ++i) l->mask.mutable_values()[i] = n(rng);
  const auto x = DenseArray<float>::filled({4, 6}, 0.3f);
  CHECK(forward(net, x, ForwardMasks<float>::threshold()).value() ==
        forward(net, x, ForwardMasks<float>::threshold()).value());
}

TEST_CASE("masked forward matches the compacted subnetwork") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    LayerOptions opt;
    opt.rescale = seed % 2 ? RescaleStrategy::smart : RescaleStrategy::dynamic;
    opt.mask_last_layer = seed != 4;
    auto net = build_mlp<float>({5, 9, 7, 3}, seed, opt);
    Rng rng(seed);
    std::normal_distribution<float> n;
    for (auto* l : net.masked_layers())
      for (Index i = 0; i < l->mask.values().size(); ++i) l->mask.mutable_values()[i] = n(rng);
    DenseArray<float> x({4, 5});
    for (Index i = 0; i < x.size(); ++i) x[i] = n(rng);
    CHECK(forward(net, x, ForwardMasks<float>::threshold()).value() ==
          verification::brute_force_subnetwork_forward(net, x));
  }
}

TEST_CASE("exempting the last layer leaves it unmasked") {
  LayerOptions opt;
  opt.mask_last_layer = false;
  opt.rescale = RescaleStrategy::smart;
  const auto net = build_mlp<float>({4, 5, 2}, 1, opt);
  CHECK(net.layers().size() == 2);
  CHECK(net.masked_layers().size() == 1);
  CHECK(net.layers().back()->rescale.strategy == RescaleStrategy::none);
}

TEST_CASE("topology size mismatch is a contract error") {
  const auto net = build_mlp<float>({4, 5, 2}, 1);
  SampledTopology<float> empty;
  CHECK_THROWS_AS(forward(net, DenseArray<float>::ones({1, 4}), ForwardMasks<float>::sampled(empty)), ContractError);
}

TEST_CASE("backward never touches frozen weights") {
  auto net = build_mlp<float>({4, 6, 2}, 3);
  std::vector<Rng> streams{Rng(1), Rng(2)};
  const auto topo = sample_topology(net, 1.0, streams);
  backward(softmax_cross_entropy(forward(net, DenseArray<float>::ones({3, 4}), ForwardMasks<float>::sampled(topo)),
                                 std::vector<int>{0, 1, 0}));
  for (const auto* l : net.layers()) {
    CHECK_FALSE(l->frozen_weights.has_grad());
    CHECK(l->mask.logits.has_grad());
  }
}

TEST_CASE("clones are independent") {
  auto net = build_mlp<float>({3, 3, 2}, 1);
  auto copy = net.clone();
  copy.masked_layers()[0]->mask.mutable_values()[0] = 9;
  CHECK(net.masked_layers()[0]->mask.values()[0] == 0);
  CHECK(copy.weight_hash() == net.weight_hash());
}

}  // TEST_SUITE
