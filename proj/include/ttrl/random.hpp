#pragma once

#include <cmath>
#include <numbers>

#include "ttrl/types.hpp"

namespace ttrl {

/// Uniform draw in [0, 1). Hand-rolled so sequences do not depend on the
/// standard library's distribution internals.
inline Scalar uniform01(Rng& rng) {
  return static_cast<Scalar>(rng() >> 11) * 0x1.0p-53;
}

inline Scalar uniform(Rng& rng, Scalar lo, Scalar hi) {
  return lo + (hi - lo) * uniform01(rng);
}

/// Standard normal via Box-Muller. Stateless: consumes exactly two engine
/// draws per call.
inline Scalar gaussian(Rng& rng) {
  Scalar u1 = uniform01(rng);
  Scalar u2 = uniform01(rng);
  if (u1 <= 0.0) u1 = 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

inline Scalar gaussian(Rng& rng, Scalar mean, Scalar std_dev) {
  return mean + std_dev * gaussian(rng);
}

}  // namespace ttrl
