#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace supermask {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Derives an independent stream seed from the master seed and a fixed label
/// such as "init", "data" or "gumbel-layer-3".
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view label) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : label) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return splitmix64(master ^ splitmix64(h));
}

inline Rng make_stream(std::uint64_t master, std::string_view label) {
  return Rng(derive_seed(master, label));
}

/// 53-bit uniform on [0, 1).
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace supermask
