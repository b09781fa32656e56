#pragma once

#include <cmath>
#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "supermask/mask.hpp"
#include "supermask/ops.hpp"
#include "supermask/random.hpp"
#include "supermask/rescale.hpp"

namespace supermask {

enum class LayerKind { dense, conv2d };
enum class Activation { relu, none };
enum class WeightScheme { kaiming_normal, kaiming_scaled, signed_constant_of_kaiming };

/// A frozen dense or conv layer whose connections are gated by a learned mask.
/// Dense weights are [out x in]; conv weights are [F x C x kh x kw].
template <typename Scalar>
struct MaskedLayer {
  LayerKind kind = LayerKind::dense;
  Var<Scalar> frozen_weights;  // constant leaf, never receives a gradient
  std::optional<Var<Scalar>> bias;
  MaskParameters<Scalar> mask;
  RescaleState<Scalar> rescale;
  Activation activation = Activation::relu;
  Index stride = 1;
  Index padding = 0;
  bool masked = true;

  const DenseArray<Scalar>& weights() const { return frozen_weights.value(); }
};

struct MaxPool {
  Index window = 2;
};
struct Flatten {};

template <typename Scalar>
using Stage = std::variant<MaskedLayer<Scalar>, MaxPool, Flatten>;

template <typename Scalar>
struct Network {
  Shape input_shape;  // per-example shape, batch dimension excluded
  std::vector<Stage<Scalar>> stages;

  std::vector<MaskedLayer<Scalar>*> layers() {
    std::vector<MaskedLayer<Scalar>*> out;
    for (auto& s : stages)
      if (auto* l = std::get_if<MaskedLayer<Scalar>>(&s)) out.push_back(l);
    return out;
  }
  std::vector<const MaskedLayer<Scalar>*> layers() const {
    std::vector<const MaskedLayer<Scalar>*> out;
    for (const auto& s : stages)
      if (const auto* l = std::get_if<MaskedLayer<Scalar>>(&s)) out.push_back(l);
    return out;
  }
  /// Layers that take part in topology sampling.
  std::vector<MaskedLayer<Scalar>*> masked_layers() {
    std::vector<MaskedLayer<Scalar>*> out;
    for (auto* l : layers())
      if (l->masked) out.push_back(l);
    return out;
  }
  std::vector<const MaskedLayer<Scalar>*> masked_layers() const {
    std::vector<const MaskedLayer<Scalar>*> out;
    for (const auto* l : layers())
      if (l->masked) out.push_back(l);
    return out;
  }

  /// Deep copy; the copy shares no tape leaves with this network.
  Network clone() const {
    Network out = *this;
    for (auto* l : out.layers()) {
      l->frozen_weights = Var<Scalar>::constant(l->frozen_weights.value());
      if (l->bias) l->bias = Var<Scalar>::constant(l->bias->value());
      l->mask = MaskParameters<Scalar>(l->mask.values(), l->mask.trainable());
      if (l->rescale.factor.defined())
        l->rescale.factor = Var<Scalar>(l->rescale.factor.value(), l->rescale.factor.requires_grad());
    }
    return out;
  }

  std::uint64_t weight_hash() const {
    std::uint64_t h = 1469598103934665603ULL;
    for (const auto* l : layers()) {
      h = content_hash(l->weights(), h);
      if (l->bias) h = content_hash(l->bias->value(), h);
    }
    return h;
  }
};

/// Where the masks of a forward pass come from.
template <typename Scalar>
struct ForwardMasks {
  enum class Mode { sampled, threshold, unmasked };
  Mode mode = Mode::threshold;
  const SampledTopology<Scalar>* topology = nullptr;
  MaskUse use = MaskUse::straight_through;

  static ForwardMasks sampled(const SampledTopology<Scalar>& t, MaskUse use = MaskUse::straight_through) {
    return {Mode::sampled, &t, use};
  }
  static ForwardMasks threshold() { return {Mode::threshold, nullptr, MaskUse::straight_through}; }
  /// Plain frozen network: no masks, no rescale.
  static ForwardMasks unmasked() { return {Mode::unmasked, nullptr, MaskUse::straight_through}; }
};

/// z = g(s * (m . w) (x) z_prev) per layer; biases are added unmasked and unscaled.
template <typename Scalar>
Var<Scalar> forward(const Network<Scalar>& net, const Var<Scalar>& x, const ForwardMasks<Scalar>& masks) {
  using Mode = typename ForwardMasks<Scalar>::Mode;
  const auto masked = net.masked_layers();
  if (masks.mode == Mode::sampled) {
    if (!masks.topology) throw ContractError("sampled forward without a topology");
    if (masks.topology->layers.size() != masked.size())
      throw ContractError("topology has " + std::to_string(masks.topology->layers.size()) +
                          " masks for " + std::to_string(masked.size()) + " prunable layers");
  }

  Var<Scalar> z = x;
  std::size_t next_mask = 0;
  for (const auto& stage : net.stages) {
    if (const auto* pool = std::get_if<MaxPool>(&stage)) {
      z = maxpool2d(z, pool->window);
      continue;
    }
    if (std::holds_alternative<Flatten>(stage)) {
      z = flatten(z);
      continue;
    }
    const auto& layer = std::get<MaskedLayer<Scalar>>(stage);
    Var<Scalar> effective = layer.frozen_weights;
    if (layer.masked && masks.mode != Mode::unmasked) {
      if (masks.mode == Mode::sampled) {
        const auto& sample = masks.topology->layers[next_mask];
        const Var<Scalar> m = apply_sampled_mask(layer.mask.logits, sample, masks.use);
        effective = apply_rescale(layer.rescale, elementwise_mul(m, layer.frozen_weights), sample.hard);
      } else {
        DenseArray<Scalar> hard = threshold_mask(layer.mask);
        const auto m = Var<Scalar>::constant(hard);
        effective = apply_rescale(layer.rescale, elementwise_mul(m, layer.frozen_weights), hard);
      }
      ++next_mask;
    }
    z = layer.kind == LayerKind::dense ? linear(z, effective)
                                       : conv2d(z, effective, layer.stride, layer.padding);
    if (layer.bias) z = add_channel_bias(z, *layer.bias);
    if (layer.activation == Activation::relu) z = relu(z);
  }
  return z;
}

template <typename Scalar>
Var<Scalar> forward(const Network<Scalar>& net, const DenseArray<Scalar>& x, const ForwardMasks<Scalar>& masks) {
  return forward(net, Var<Scalar>::constant(x), masks);
}

/// One STGS draw per masked layer, each from its own stream.
template <typename Scalar>
SampledTopology<Scalar> sample_topology(const Network<Scalar>& net, double temperature, std::vector<Rng>& streams,
                                        Parametrization p = Parametrization::aslp) {
  const auto layers = net.masked_layers();
  if (streams.size() != layers.size())
    throw ContractError("need one RNG stream per masked layer");
  SampledTopology<Scalar> t;
  t.layers.reserve(layers.size());
  for (std::size_t i = 0; i < layers.size(); ++i)
    t.layers.push_back(sample_with(layers[i]->mask, temperature, streams[i], p));
  return t;
}

/// Fraction of pruned connections over all masked layers.
template <typename Scalar>
double overall_pruning_rate(const std::vector<DenseArray<Scalar>>& masks) {
  double pruned = 0, total = 0;
  for (const auto& m : masks) {
    pruned += pruning_rate(m) * static_cast<double>(m.size());
    total += static_cast<double>(m.size());
  }
  return total > 0 ? pruned / total : 0.0;
}

template <typename Scalar>
double threshold_pruning_rate(const Network<Scalar>& net) {
  std::vector<DenseArray<Scalar>> masks;
  for (const auto* l : net.masked_layers()) masks.push_back(threshold_mask(l->mask));
  return overall_pruning_rate(masks);
}

inline Index fan_in(const Shape& weight_shape) { return shape_size(weight_shape) / weight_shape.at(0); }

/// Kaiming normal (std sqrt(2 / fan_in)), its keep-probability 0.5 scaled
/// version (x sqrt(2)), or the signed constant of a Kaiming draw.
template <typename Scalar>
DenseArray<Scalar> init_weights(const Shape& shape, WeightScheme scheme, Rng& rng) {
  double sd = std::sqrt(2.0 / static_cast<double>(fan_in(shape)));
  if (scheme == WeightScheme::kaiming_scaled) sd /= std::sqrt(0.5);
  std::normal_distribution<double> normal(0.0, sd);
  DenseArray<Scalar> w(shape);
  for (Index i = 0; i < w.size(); ++i) w[i] = static_cast<Scalar>(normal(rng));
  if (scheme == WeightScheme::signed_constant_of_kaiming) return signed_constant_transform(w);
  return w;
}

struct LayerOptions {
  WeightScheme scheme = WeightScheme::kaiming_normal;
  RescaleStrategy rescale = RescaleStrategy::none;
  DwrReading dwr_reading = DwrReading::keep;
  double mask_init = 0.0;
  std::optional<double> smart_init;  // defaults to 1 / sigmoid(mask_init)
  bool biases = false;
  bool mask_last_layer = true;
};

template <typename Scalar>
MaskedLayer<Scalar> make_layer(LayerKind kind, const Shape& weight_shape, Activation act, const LayerOptions& opt,
                               Rng& rng) {
  MaskedLayer<Scalar> l;
  l.kind = kind;
  l.frozen_weights = Var<Scalar>::constant(init_weights<Scalar>(weight_shape, opt.scheme, rng));
  if (opt.biases) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in(weight_shape)));
    std::uniform_real_distribution<double> uni(-bound, bound);
    DenseArray<Scalar> b({weight_shape[0]});
    for (Index i = 0; i < b.size(); ++i) b[i] = static_cast<Scalar>(uni(rng));
    l.bias = Var<Scalar>::constant(std::move(b));
  }
  l.mask = MaskParameters<Scalar>::constant_init(weight_shape, static_cast<Scalar>(opt.mask_init));
  switch (opt.rescale) {
    case RescaleStrategy::none:
      break;
    case RescaleStrategy::smart: {
      const double init = opt.smart_init.value_or(1.0 / detail::sigmoid(opt.mask_init));
      l.rescale = RescaleState<Scalar>::smart(static_cast<Scalar>(init));
      break;
    }
    case RescaleStrategy::dynamic:
      l.rescale = RescaleState<Scalar>::dynamic(opt.dwr_reading);
      break;
  }
  l.activation = act;
  if (kind == LayerKind::conv2d) l.padding = 1;
  return l;
}

template <typename Scalar>
void exempt_last_layer(Network<Scalar>& net) {
  auto layers = net.layers();
  if (layers.empty()) return;
  auto* last = layers.back();
  last->masked = false;
  last->rescale = RescaleState<Scalar>::none();
}

/// Fully connected ReLU network; layer_sizes = {in, hidden..., out}.
template <typename Scalar>
Network<Scalar> build_mlp(const std::vector<Index>& layer_sizes, std::uint64_t init_seed,
                          const LayerOptions& opt = {}) {
  if (layer_sizes.size() < 2) throw ConfigError("an MLP needs at least input and output sizes");
  Rng rng(init_seed);
  Network<Scalar> net;
  net.input_shape = {layer_sizes.front()};
  for (std::size_t i = 1; i < layer_sizes.size(); ++i) {
    const bool last = i + 1 == layer_sizes.size();
    net.stages.push_back(make_layer<Scalar>(LayerKind::dense, {layer_sizes[i], layer_sizes[i - 1]},
                                            last ? Activation::none : Activation::relu, opt, rng));
  }
  if (!opt.mask_last_layer) exempt_last_layer(net);
  return net;
}

enum class ConvVariant { conv2, conv4, conv6 };

/// Conv2/4/6: pairs of 3x3 same-padded convs (64, 128, 256 filters), each pair
/// followed by 2x2 max pooling, then FC 256-256-n_classes. `width` divides
/// every channel and hidden count for desk-scale runs.
template <typename Scalar>
Network<Scalar> build_conv_family(ConvVariant variant, Index n_classes, std::uint64_t init_seed,
                                  const LayerOptions& opt = {}, Shape input_shape = {3, 32, 32},
                                  Index width_divisor = 1) {
  if (input_shape.size() != 3) throw ConfigError("conv networks take CxHxW inputs");
  if (width_divisor <= 0) throw ConfigError("width divisor must be positive");
  const int pairs = variant == ConvVariant::conv2 ? 1 : variant == ConvVariant::conv4 ? 2 : 3;
  Rng rng(init_seed);
  Network<Scalar> net;
  net.input_shape = input_shape;
  Index channels = input_shape[0], h = input_shape[1], w = input_shape[2];
  for (int p = 0; p < pairs; ++p) {
    const Index filters = std::max<Index>(1, (Index{64} << p) / width_divisor);
    for (int k = 0; k < 2; ++k) {
      net.stages.push_back(make_layer<Scalar>(LayerKind::conv2d, {filters, channels, 3, 3}, Activation::relu, opt, rng));
      channels = filters;
    }
    net.stages.push_back(MaxPool{2});
    if (h % 2 || w % 2) throw ConfigError("input " + shape_string(input_shape) + " does not survive pooling");
    h /= 2;
    w /= 2;
  }
  net.stages.push_back(Flatten{});
  const Index hidden = std::max<Index>(1, 256 / width_divisor);
  Index features = channels * h * w;
  for (Index out : {hidden, hidden}) {
    net.stages.push_back(make_layer<Scalar>(LayerKind::dense, {out, features}, Activation::relu, opt, rng));
    features = out;
  }
  net.stages.push_back(make_layer<Scalar>(LayerKind::dense, {n_classes, features}, Activation::none, opt, rng));
  if (!opt.mask_last_layer) exempt_last_layer(net);
  return net;
}

template <typename Scalar>
Index parameter_count(const Network<Scalar>& net) {
  Index n = 0;
  for (const auto* l : net.layers()) n += l->weights().size();
  return n;
}

}  // namespace supermask
