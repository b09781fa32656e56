#include <doctest.h>

#include <cmath>
#include <numbers>

#include "supermask/errors.hpp"
#include "supermask/mask.hpp"
#include "supermask/ops.hpp"

using namespace supermask;

TEST_SUITE("mask") {

TEST_CASE("gumbel draws have the standard mean and variance") {
  Rng rng(7);
  const auto g = sample_gumbel<double>({1000000}, rng);
  const double mean = g.values().mean();
  const double var = (g.values() - mean).square().mean();
  CHECK(mean == doctest::Approx(0.5772156649).epsilon(0.01));
  CHECK(var == doctest::Approx(std::numbers::pi * std::numbers::pi / 6).epsilon(0.02));
  CHECK(g.all_finite());
}

TEST_CASE("float gumbel draws are bounded by the uniform clamp") {
  Rng rng(8);
  const auto g = sample_gumbel<float>({200000}, rng);
  const double eps = 16.0 * std::numeric_limits<float>::epsilon();
  CHECK(g.values().maxCoeff() <= static_cast<float>(-std::log(-std::log(1.0 - eps))) + 1e-4f);
  CHECK(g.values().minCoeff() >= static_cast<float>(-std::log(-std::log(eps))) - 1e-4f);
}

TEST_CASE("sampling is deterministic given the generator state") {
  const auto m = MaskParameters<float>::constant_init({50, 20}, 0.3f);
  Rng a(42), b(42);
  const auto s1 = stgs_sample(m, 1.0, a);
  const auto s2 = stgs_sample(m, 1.0, b);
  CHECK(s1.hard == s2.hard);
  CHECK(s1.soft == s2.soft);
  CHECK(s1.seed_record == s2.seed_record);
  // The recorded seed regenerates the noise.
  Rng replay(s1.seed_record);
  CHECK(sample_gumbel<float>({50, 20}, replay) == s1.noise_keep);
}

TEST_CASE("keep frequency does not depend on the temperature") {
  const auto m = MaskParameters<float>::constant_init({100000}, 1.0f);
  for (double tau : {0.1, 1.0, 5.0}) {
    Rng rng(9);
    const double keep = 1.0 - pruning_rate(stgs_sample(m, tau, rng).hard);
    CHECK(keep == doctest::Approx(1.0 / (1.0 + std::exp(-1.0))).epsilon(0.02));
  }
}

TEST_CASE("soft samples lie strictly inside the unit interval") {
  DenseArray<float> m_hat({4}, {-1e6f, -30, 30, 1e6f});
  const auto s = sample_from_noise(m_hat, DenseArray<float>::zeros({4}), DenseArray<float>::zeros({4}), 0.01);
  for (Index i = 0; i < 4; ++i) {
    CHECK(s.soft[i] > 0.0f);
    CHECK(s.soft[i] < 1.0f);
  }
  CHECK(s.hard == DenseArray<float>({4}, {0, 0, 1, 1}));
}

TEST_CASE("ties keep the connection") {
  const auto s = sample_from_noise(DenseArray<float>({1}, {0}), DenseArray<float>({1}, {0.5f}),
                                   DenseArray<float>({1}, {0.5f}), 1.0);
  CHECK(s.hard[0] == 1.0f);
  CHECK(s.soft[0] == 0.5f);
}

TEST_CASE("lower temperature sharpens the surrogate") {
  Rng rng(10);
  const auto m = DenseArray<double>::filled({2000}, 0.4);
  const auto g1 = sample_gumbel<double>({2000}, rng), g2 = sample_gumbel<double>({2000}, rng);
  const auto hot = sample_from_noise(m, g1, g2, 2.0);
  const auto cold = sample_from_noise(m, g1, g2, 0.05);
  CHECK(hot.hard == cold.hard);
  const double d_hot = (hot.soft.values() - hot.hard.values()).abs().mean();
  const double d_cold = (cold.soft.values() - cold.hard.values()).abs().mean();
  CHECK(d_cold < d_hot);
}

TEST_CASE("thresholding keeps strictly positive logits") {
  MaskParameters<float> m(DenseArray<float>({5}, {-2, -0.0f, 0, 1e-7f, 3}));
  CHECK(threshold_mask(m) == DenseArray<float>({5}, {0, 0, 0, 1, 1}));
  CHECK(keep_probability(m)[4] == doctest::Approx(1 / (1 + std::exp(-3.0))));
}

TEST_CASE("pruning rate counts zeros and rejects non-binary masks") {
  CHECK(pruning_rate(DenseArray<float>({4}, {0, 1, 1, 0})) == 0.5);
  CHECK(pruning_rate(DenseArray<float>::ones({3})) == 0.0);
  CHECK_THROWS_AS(pruning_rate(DenseArray<float>({2}, {0, 0.5f})), ContractError);
  CHECK_THROWS_AS(pruning_rate(DenseArray<float>()), ContractError);
}

TEST_CASE("invalid temperatures and noise shapes are rejected") {
  const auto m = MaskParameters<float>::constant_init({3}, 0);
  Rng rng(1);
  CHECK_THROWS_AS(stgs_sample(m, 0.0, rng), ConfigError);
  CHECK_THROWS_AS(stgs_sample(m, -1.0, rng), ConfigError);
  CHECK_THROWS_AS(sample_from_noise(m.values(), DenseArray<float>::zeros({2}), DenseArray<float>::zeros({3}), 1.0),
                  DimensionError);
}

TEST_CASE("straight-through gradient is the surrogate slope") {
  // dL/dm_hat = G * s (1 - s) / tau with s = sigmoid((m_hat + g1 - g2) / tau).
  const double tau = 0.7;
  Var<double> m_hat = Var<double>::parameter(DenseArray<double>({3}, {-1.0, 0.2, 2.5}));
  const DenseArray<double> g1({3}, {0.3, -0.4, 1.1}), g2({3}, {0.9, 0.1, -0.2});
  const auto s = sample_from_noise(m_hat.value(), g1, g2, tau);
  const DenseArray<double> G({3}, {2.0, -1.0, 0.5});
  const auto masked = apply_sampled_mask(m_hat, s, MaskUse::straight_through);
  CHECK(masked.value() == s.hard);
  backward(sum(elementwise_mul(masked, Var<double>::constant(G))));
  for (Index i = 0; i < 3; ++i) {
    const double d = m_hat.value()[i] + g1[i] - g2[i];
    const double sig = 1.0 / (1.0 + std::exp(-d / tau));
    CHECK(m_hat.grad()[i] == doctest::Approx(G[i] * sig * (1 - sig) / tau).epsilon(1e-12));
  }
}

TEST_CASE("straight-through gradient does not vanish for moderate logits") {
  DenseArray<float> m({21});
  for (Index i = 0; i < 21; ++i) m[i] = static_cast<float>(i - 10);
  Var<float> m_hat = Var<float>::parameter(m);
  Rng rng(12);
  const auto s = stgs_sample(MaskParameters<float>(m), 1.0, rng);
  backward(sum(apply_sampled_mask(m_hat, s)));
  for (Index i = 0; i < 21; ++i) CHECK(m_hat.grad()[i] != 0.0f);
}

TEST_CASE("thresholding is idempotent and ignores the generator") {
  MaskParameters<float> m(DenseArray<float>({4}, {-1, 2, 0.5f, -3}));
  const auto t = threshold_mask(m);
  CHECK(threshold_mask(MaskParameters<float>(DenseArray<float>(t.shape(), t.values() * 2 - 1))) == t);
  Rng rng(1);
  stgs_sample(m, 1.0, rng);
  CHECK(threshold_mask(m) == t);
}

TEST_CASE("both parametrizations give the same hard sample") {
  Rng rng(11);
  DenseArray<double> m({5000});
  std::uniform_real_distribution<double> u(-8, 8);
  for (Index i = 0; i < m.size(); ++i) m[i] = u(rng);
  const auto g1 = sample_gumbel<double>(m.shape(), rng), g2 = sample_gumbel<double>(m.shape(), rng);
  const auto a = sample_from_noise(m, g1, g2, 1.0, Parametrization::aslp);
  const auto b = sample_from_noise(m, g1, g2, 1.0, Parametrization::sigmoid);
  CHECK(a.hard == b.hard);
  CHECK((a.soft.values() - b.soft.values()).abs().maxCoeff() < 1e-12);
}

}  // TEST_SUITE
