#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>

namespace ttrl {

using Scalar = double;
using Vec3 = Eigen::Vector3d;
using Vec2 = Eigen::Vector2d;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;
using Vec9 = Eigen::Matrix<Scalar, 9, 1>;

using Rng = std::mt19937_64;

/// Engine seeded from a master seed plus a stream index, so that
/// independent consumers (init / env / minibatch sampling) stay aligned
/// across configuration variants that draw different amounts of randomness.
inline Rng make_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{seed, stream};
  return Rng(seq);
}

}  // namespace ttrl
