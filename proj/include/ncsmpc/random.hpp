#pragma once

#include <cstdint>
#include <random>

namespace ncsmpc {

using Rng = std::mt19937_64;

/// Uniform double in [0, 1) from the top 53 bits. Spelled out rather than
/// std::uniform_real_distribution so streams are identical across standard
/// libraries.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform(Rng& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(rng);
}

}  // namespace ncsmpc
