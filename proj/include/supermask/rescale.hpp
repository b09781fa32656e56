#pragma once

#include <chrono>
#include <cmath>
#include <iostream>

#include "supermask/mask.hpp"
#include "supermask/ops.hpp"

namespace supermask {

/// none: factor 1. smart: learned per-layer scalar. dynamic: inverse of the
/// observed keep (or prune) rate of the sampled mask, never trained.
enum class RescaleStrategy { none, smart, dynamic };

/// Which observed rate a dynamic factor inverts.
enum class DwrReading { keep, prune };

template <typename Scalar>
struct RescaleState {
  RescaleStrategy strategy = RescaleStrategy::none;
  DwrReading reading = DwrReading::keep;
  Var<Scalar> factor;  // one value; trainable only for smart

  static RescaleState none() { return {}; }
  static RescaleState smart(Scalar init) {
    return {RescaleStrategy::smart, DwrReading::keep, Var<Scalar>::parameter(DenseArray<Scalar>({1}, {init}))};
  }
  static RescaleState dynamic(DwrReading reading = DwrReading::keep) {
    return {RescaleStrategy::dynamic, reading, {}};
  }

  /// The current learned value, 1 for none; dynamic factors depend on a mask.
  Scalar learned_value() const {
    return strategy == RescaleStrategy::smart ? factor.value()[0] : Scalar(1);
  }
};

/// 1 / max(rate, 1/n) where rate is the keep (default) or prune rate of the mask.
template <typename Scalar>
double dwr_factor(const DenseArray<Scalar>& mask, DwrReading reading = DwrReading::keep) {
  const double pruned = pruning_rate(mask);
  const double rate = reading == DwrReading::keep ? 1.0 - pruned : pruned;
  const double floor = 1.0 / static_cast<double>(mask.size());
  if (rate < floor)
    std::cerr << "warning: dynamic rescale rate " << rate << " floored to " << floor << '\n';
  return 1.0 / std::max(rate, floor);
}

/// Accumulates time spent inside rescale forward and backward work. Install
/// one per thread with RescaleClockScope; nothing is timed otherwise.
struct RescaleClock {
  std::chrono::nanoseconds elapsed{0};
};

inline thread_local RescaleClock* active_rescale_clock = nullptr;

class RescaleClockScope {
 public:
  explicit RescaleClockScope(RescaleClock& clock) : previous_(active_rescale_clock) { active_rescale_clock = &clock; }
  ~RescaleClockScope() { active_rescale_clock = previous_; }
  RescaleClockScope(const RescaleClockScope&) = delete;
  RescaleClockScope& operator=(const RescaleClockScope&) = delete;

 private:
  RescaleClock* previous_;
};

/// Scales already-masked weights; `mask` is the binary mask used (for dynamic).
template <typename Scalar>
Var<Scalar> apply_rescale(const RescaleState<Scalar>& state, const Var<Scalar>& masked_w,
                          const DenseArray<Scalar>& mask) {
  if (state.strategy == RescaleStrategy::none) return masked_w;
  RescaleClock* clock = active_rescale_clock;
  const auto start = std::chrono::steady_clock::now();
  Var<Scalar> out = state.strategy == RescaleStrategy::smart
                        ? scale(state.factor, masked_w)
                        : scale_constant(masked_w, static_cast<Scalar>(dwr_factor(mask, state.reading)));
  if (clock) {
    clock->elapsed += std::chrono::steady_clock::now() - start;
    auto* node = out.node();
    if (node->backward_rule) {
      node->backward_rule = [clock, rule = std::move(node->backward_rule)](TapeNode<Scalar>& n) {
        const auto t0 = std::chrono::steady_clock::now();
        rule(n);
        clock->elapsed += std::chrono::steady_clock::now() - t0;
      };
    }
  }
  return out;
}

/// sign(w) * std(w) per layer, population std, sign(0) = +1. A constant layer
/// has std 0 and maps to zeros.
template <typename Scalar>
DenseArray<Scalar> signed_constant_transform(const DenseArray<Scalar>& w) {
  const auto v = w.values().template cast<double>();
  const double mean = v.mean();
  const double sd = std::sqrt((v - mean).square().mean());
  if (sd == 0.0) std::cerr << "warning: signed constant transform of a constant layer yields zeros\n";
  const auto s = static_cast<Scalar>(sd);
  return DenseArray<Scalar>(w.shape(), w.values().unaryExpr([s](Scalar v) { return v < Scalar(0) ? -s : s; }));
}

}  // namespace supermask
