#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "ttrl/physics.hpp"
#include "ttrl/types.hpp"

namespace ttrl::env {

using physics::BallState;

/// Racket parameters at hitting time. Construction clamps each field to its
/// closed interval, so an Action is always inside the action box.
struct Action {
  static constexpr Scalar kAlphaMinDeg = -20.0, kAlphaMaxDeg = 20.0;
  static constexpr Scalar kBetaMinDeg = -30.0, kBetaMaxDeg = 30.0;
  static constexpr Scalar kVxMin = 0.0, kVxMax = 2.0;

  Action() = default;
  Action(Scalar alpha, Scalar beta, Scalar vx);

  Scalar alpha_deg = 0.0;  // racket pitch [deg]
  Scalar beta_deg = 0.0;   // racket yaw [deg]
  Scalar racket_vx = 0.0;  // racket speed along +x [m/s]

  /// Affine map of the action box onto [-1, 1]^3 (and back).
  Vec3 normalized() const;
  static Action from_normalized(const Vec3& n);
};

/// Desired landing point on the table plane [m].
struct Goal {
  Scalar x = 2.0;
  Scalar y = 0.0;
};

/// Quantities the reward is computed from: where the return met the table
/// plane and how high the ball flew halfway there.
struct RewardParams {
  Scalar achieved_x = 0.0;  // [m]
  Scalar achieved_y = 0.0;  // [m]
  Scalar height = 0.0;      // [m], >= 0
};

struct Interval {
  Scalar lo = 0.0;
  Scalar hi = 0.0;
};

/// Uniform launch-state distribution on the far side of the table.
struct ServeDistribution {
  Interval pos_x{2.5, 2.7};
  Interval pos_y{-0.2, 0.2};
  Interval pos_z{0.25, 0.35};
  Interval vel_x{-5.5, -4.0};
  Interval vel_y{-0.5, 0.5};
  Interval vel_z{1.0, 2.5};
  Interval spin_x{0.0, 0.0};
  Interval spin_y{-30.0, 30.0};
  Interval spin_z{0.0, 0.0};
};

struct EnvConfig {
  ServeDistribution serve;
  Scalar height_weight = 0.07;  // reward coefficient on the mid-flight height

  /// Zero-mean Gaussian noise applied to what the agent observes
  /// (position, velocity, spin), and to the executed action.
  Vec9 observation_noise_std = Vec9::Zero();
  Vec3 action_noise_std = Vec3::Zero();  // [deg, deg, m/s]

  physics::PhysicsParams physics;
  physics::TableGeometry geometry;  // geometry.hit_plane_x is the hitting plane

  /// Box used to map observed states into [-1, 1]^9 for the networks.
  /// Sized to envelope the default serve distribution at the hitting plane
  /// with margin.
  Vec9 state_lo = default_state_lo();
  Vec9 state_hi = default_state_hi();

  /// Box for goal normalization (the table plane).
  Vec2 goal_lo{0.0, -0.762};
  Vec2 goal_hi{2.74, 0.762};

  Scalar sim_dt = 1e-3;          // RK4 step [s]
  Scalar max_flight_time = 3.0;  // per-flight integration cap [s]

  static Vec9 default_state_lo();
  static Vec9 default_state_hi();
};

struct Outcome {
  RewardParams reward_params;
  Scalar reward = 0.0;  // [m], <= 0
  physics::EventKind terminal_event = physics::EventKind::Timeout;
};

/// Draws launch states until one bounces once on the robot side and crosses
/// the hitting plane; returns the ball state at that crossing. Throws after
/// 100 consecutive infeasible draws.
BallState sample_serve(Rng& rng, const EnvConfig& config);

/// Builds the racket plane from an action: position at the ball, velocity
/// (vx, 0, 0), and the base normal (1, 0, 0) rotated by yaw beta about z,
/// pitch alpha about y (positive alpha tilts the normal upward), then roll
/// gamma about x with gamma_deg = -0.1 * ball_vy.
physics::RacketPose racket_pose_from_action(const Action& action, const BallState& ball);

/// r = -|g_d - g_a|_2 - height_weight * h, in meters.
Scalar reward_from_params(const RewardParams& params, const Goal& goal, Scalar height_weight);

/// One environment step: perturbs the action with execution noise, applies
/// the racket bounce, simulates the return flight, and evaluates the reward
/// terms. `ball_at_hit` is the true state on the hitting plane.
Outcome step(const BallState& ball_at_hit, const Action& action, const Goal& goal,
             const EnvConfig& config, Rng& rng);

/// The agent-visible state: true state plus per-dimension Gaussian noise.
BallState observe(const BallState& ball_at_hit, const EnvConfig& config, Rng& rng);

/// (position, velocity, spin) stacked into the 9-D network state.
Vec9 state_vector(const BallState& state);

Vec9 normalize_state(const Vec9& raw, const EnvConfig& config);
Vec2 normalize_goal(const Goal& goal, const EnvConfig& config);

/// Named experiment setups: environment plus the goal cycle.
struct Scenario {
  std::string name;
  EnvConfig env;
  std::vector<Goal> goals;
};

/// Presets: "serve", "i-play", "x-play", "ballmachine-fixed",
/// "ballmachine-oscillating". Throws on unknown names.
Scenario make_scenario(std::string_view name);
std::vector<std::string> scenario_names();

}  // namespace ttrl::env
