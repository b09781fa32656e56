#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <type_traits>
#include <vector>

#include "supermask/autodiff.hpp"
#include "supermask/random.hpp"

namespace supermask {

/// How the two logits of a keep/drop decision are built from the latent mask.
///  aslp:    [m_hat, 0]  (the drop logit is the arbitrary shift, never stored)
///  sigmoid: [log sigmoid(m_hat), log(1 - sigmoid(m_hat))]
enum class Parametrization { aslp, sigmoid };

/// How a sampled mask enters the forward pass.
///  straight_through: hard {0,1} mask forward, soft-surrogate gradient backward
///  relaxed:          soft surrogate in both passes (differentiable in m_hat)
enum class MaskUse { straight_through, relaxed };

/// Logit arithmetic runs one precision step above the storage scalar.
template <typename Scalar>
using WideScalar = std::conditional_t<(sizeof(Scalar) < sizeof(double)), double, long double>;

namespace detail {

template <typename T>
T sigmoid(T x) {
  if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

template <typename T>
T sigmoid_slope(T x) {
  const T e = std::exp(-std::abs(x));
  return e / ((T(1) + e) * (T(1) + e));
}

template <typename T>
T softplus(T x) {
  return std::max(x, T(0)) + std::log1p(std::exp(-std::abs(x)));
}

template <typename Scalar>
Scalar open_unit(WideScalar<Scalar> p) {
  const auto lo = static_cast<WideScalar<Scalar>>(std::numeric_limits<Scalar>::min());
  const auto hi = static_cast<WideScalar<Scalar>>(std::nextafter(Scalar(1), Scalar(0)));
  return static_cast<Scalar>(std::clamp(p, lo, hi));
}

}  // namespace detail

/// Latent per-connection mask values (one per weight of the owning layer).
template <typename Scalar>
struct MaskParameters {
  Var<Scalar> logits;

  MaskParameters() = default;
  explicit MaskParameters(DenseArray<Scalar> init, bool trainable = true)
      : logits(std::move(init), trainable) {}

  static MaskParameters constant_init(const Shape& shape, Scalar value) {
    return MaskParameters(DenseArray<Scalar>::filled(shape, value));
  }

  const Shape& shape() const { return logits.shape(); }
  const DenseArray<Scalar>& values() const { return logits.value(); }
  DenseArray<Scalar>& mutable_values() { return logits.mutable_value(); }
  bool trainable() const { return logits.requires_grad(); }
};

/// Gumbel(0,1) draws from uniforms clamped to [16 eps, 1 - 16 eps] of the storage scalar.
template <typename Scalar>
DenseArray<Scalar> sample_gumbel(const Shape& shape, Rng& rng) {
  const double eps = 16.0 * static_cast<double>(std::numeric_limits<Scalar>::epsilon());
  DenseArray<Scalar> g(shape);
  for (Index i = 0; i < g.size(); ++i) {
    const double u = std::clamp(uniform01(rng), eps, 1.0 - eps);
    g[i] = static_cast<Scalar>(-std::log(-std::log(u)));
  }
  return g;
}

/// One layer's share of a sampled topology.
template <typename Scalar>
struct LayerSample {
  DenseArray<Scalar> hard;        // {0,1}
  DenseArray<Scalar> soft;        // in (0,1), tempered sigmoid of the logit gap
  DenseArray<Scalar> noise_keep;  // Gumbel draw added to the keep logit
  DenseArray<Scalar> noise_drop;  // Gumbel draw added to the drop logit
  Parametrization parametrization = Parametrization::aslp;
  double temperature = 1.0;
  std::uint64_t seed_record = 0;  // regenerates the noise via Rng(seed_record)
};

template <typename Scalar>
struct SampledTopology {
  std::vector<LayerSample<Scalar>> layers;
};

/// Keep/drop logits (before noise) for one entry.
template <typename Scalar>
std::pair<WideScalar<Scalar>, WideScalar<Scalar>> two_class_logits(Scalar m_hat, Parametrization p,
                                                                   WideScalar<Scalar> shift = 0) {
  using W = WideScalar<Scalar>;
  const W m = static_cast<W>(m_hat);
  if (p == Parametrization::aslp) return {m + shift, shift};
  // log sigmoid(m) = -softplus(-m), log(1 - sigmoid(m)) = -softplus(m)
  return {-detail::softplus(-m) + shift, -detail::softplus(m) + shift};
}

/// Hard and soft samples from explicit noise. `shift` is the constant added
/// to both logits; any value yields the same decision.
template <typename Scalar>
LayerSample<Scalar> sample_from_noise(const DenseArray<Scalar>& m_hat, DenseArray<Scalar> noise_keep,
                                      DenseArray<Scalar> noise_drop, double temperature,
                                      Parametrization p = Parametrization::aslp,
                                      WideScalar<Scalar> shift = 0) {
  using W = WideScalar<Scalar>;
  if (!(temperature > 0.0)) throw ConfigError("temperature must be positive");
  if (noise_keep.shape() != m_hat.shape() || noise_drop.shape() != m_hat.shape())
    throw DimensionError("noise shape does not match mask shape " + shape_string(m_hat.shape()));
  LayerSample<Scalar> s;
  s.hard = DenseArray<Scalar>(m_hat.shape());
  s.soft = DenseArray<Scalar>(m_hat.shape());
  const W tau = static_cast<W>(temperature);
  for (Index i = 0; i < m_hat.size(); ++i) {
    const auto [keep, drop] = two_class_logits(m_hat[i], p, shift);
    const W a = keep + static_cast<W>(noise_keep[i]);
    const W b = drop + static_cast<W>(noise_drop[i]);
    s.hard[i] = a >= b ? Scalar(1) : Scalar(0);
    s.soft[i] = detail::open_unit<Scalar>(detail::sigmoid((a - b) / tau));
  }
  s.noise_keep = std::move(noise_keep);
  s.noise_drop = std::move(noise_drop);
  s.parametrization = p;
  s.temperature = temperature;
  return s;
}

template <typename Scalar>
LayerSample<Scalar> sample_with(const MaskParameters<Scalar>& m, double temperature, Rng& rng,
                                Parametrization p) {
  if (!(temperature > 0.0)) throw ConfigError("temperature must be positive");
  const std::uint64_t seed = rng();
  Rng noise_rng(seed);
  auto g_keep = sample_gumbel<Scalar>(m.shape(), noise_rng);
  auto g_drop = sample_gumbel<Scalar>(m.shape(), noise_rng);
  auto s = sample_from_noise(m.values(), std::move(g_keep), std::move(g_drop), temperature, p);
  s.seed_record = seed;
  return s;
}

/// Straight-through Gumbel-softmax draw with logits [m_hat, 0].
template <typename Scalar>
LayerSample<Scalar> stgs_sample(const MaskParameters<Scalar>& m, double temperature, Rng& rng) {
  return sample_with(m, temperature, rng, Parametrization::aslp);
}

/// Same draw with explicit log-sigmoid logits; kept as the reference parametrization.
template <typename Scalar>
LayerSample<Scalar> stgs_sample_sigmoid_param(const MaskParameters<Scalar>& m, double temperature, Rng& rng) {
  return sample_with(m, temperature, rng, Parametrization::sigmoid);
}

template <typename Scalar>
DenseArray<Scalar> keep_probability(const MaskParameters<Scalar>& m) {
  DenseArray<Scalar> p(m.shape());
  for (Index i = 0; i < p.size(); ++i)
    p[i] = static_cast<Scalar>(detail::sigmoid(static_cast<WideScalar<Scalar>>(m.values()[i])));
  return p;
}

/// Deterministic topology: keep where sigmoid(m_hat) > 0.5, i.e. m_hat > 0.
template <typename Scalar>
DenseArray<Scalar> threshold_mask(const MaskParameters<Scalar>& m) {
  return DenseArray<Scalar>(m.shape(), (m.values().values() > Scalar(0)).template cast<Scalar>());
}

/// Fraction of zero entries of a binary mask.
template <typename Scalar>
double pruning_rate(const DenseArray<Scalar>& mask) {
  if (mask.empty()) throw ContractError("pruning_rate of an empty mask");
  Index zeros = 0;
  for (Index i = 0; i < mask.size(); ++i) {
    if (mask[i] == Scalar(0))
      ++zeros;
    else if (mask[i] != Scalar(1))
      throw ContractError("pruning_rate: mask entry " + std::to_string(i) + " is not binary");
  }
  return static_cast<double>(zeros) / static_cast<double>(mask.size());
}

/// Puts a sampled mask on the tape as a function of m_hat. The gradient is
/// dL/dm_hat = dL/dmask * sigmoid'(gap / tau) / tau in both uses.
template <typename Scalar>
Var<Scalar> apply_sampled_mask(const Var<Scalar>& m_hat, const LayerSample<Scalar>& sample,
                               MaskUse use = MaskUse::straight_through) {
  using W = WideScalar<Scalar>;
  if (m_hat.shape() != sample.hard.shape())
    throw DimensionError("sampled mask " + shape_string(sample.hard.shape()) + " does not match " +
                         shape_string(m_hat.shape()));
  const Parametrization p = sample.parametrization;
  const W tau = static_cast<W>(sample.temperature);
  const DenseArray<Scalar>& noise_keep = sample.noise_keep;
  const DenseArray<Scalar>& noise_drop = sample.noise_drop;

  auto gap = [p, &noise_keep, &noise_drop](Scalar m, Index i) {
    const auto [keep, drop] = two_class_logits(m, p);
    return (keep + static_cast<W>(noise_keep[i])) - (drop + static_cast<W>(noise_drop[i]));
  };

  DenseArray<Scalar> value;
  if (use == MaskUse::straight_through) {
    value = sample.hard;
  } else {
    value = DenseArray<Scalar>(m_hat.shape());
    for (Index i = 0; i < value.size(); ++i)
      value[i] = static_cast<Scalar>(detail::sigmoid(gap(m_hat.value()[i], i) / tau));
  }

  return Var<Scalar>::record(
      OpKind::mask_sample, std::move(value), {m_hat},
      [p, tau, noise_keep, noise_drop](TapeNode<Scalar>& n) {
        auto& M = *n.inputs[0];
        if (!M.requires_grad) return;
        auto& dm = M.grad_buffer();
        for (Index i = 0; i < dm.size(); ++i) {
          const Scalar m = M.value[i];
          const auto [keep, drop] = two_class_logits(m, p);
          const W d = (keep + static_cast<W>(noise_keep[i])) - (drop + static_cast<W>(noise_drop[i]));
          W dgap_dm = 1;
          if (p == Parametrization::sigmoid) {
            // d/dm [log sigmoid(m)] - d/dm [log(1 - sigmoid(m))]
            const W sig = detail::sigmoid(static_cast<W>(m));
            dgap_dm = (W(1) - sig) + sig;
          }
          dm[i] += static_cast<Scalar>(static_cast<W>(n.grad[i]) * detail::sigmoid_slope(d / tau) / tau * dgap_dm);
        }
      });
}

}  // namespace supermask
