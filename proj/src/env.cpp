#include "ttrl/env.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "ttrl/random.hpp"

namespace ttrl::env {

namespace {

constexpr Scalar kDegToRad = std::numbers::pi / 180.0;

Scalar clamp(Scalar v, Scalar lo, Scalar hi) { return std::min(std::max(v, lo), hi); }

Scalar draw(Rng& rng, const Interval& iv) { return uniform(rng, iv.lo, iv.hi); }

Scalar to_unit(Scalar v, Scalar lo, Scalar hi) {
  return hi > lo ? 2.0 * (v - lo) / (hi - lo) - 1.0 : 0.0;
}

Scalar from_unit(Scalar n, Scalar lo, Scalar hi) { return lo + 0.5 * (n + 1.0) * (hi - lo); }

/// First crossing of the vertical plane x = x_plane along the trace,
/// linearly interpolated. Returns false if the trace never crosses it.
bool trace_plane_crossing(const std::vector<BallState>& trace, Scalar x_plane, Vec3& out) {
  for (std::size_t i = 0; i + 1 < trace.size(); ++i) {
    const Scalar a = trace[i].position.x() - x_plane;
    const Scalar b = trace[i + 1].position.x() - x_plane;
    if (a == 0.0) {
      out = trace[i].position;
      return true;
    }
    if (a * b <= 0.0 && a != b) {
      const Scalar t = a / (a - b);
      out = trace[i].position + t * (trace[i + 1].position - trace[i].position);
      return true;
    }
  }
  return false;
}

/// First downward crossing of the table plane z = 0 along the trace.
bool trace_table_plane_crossing(const std::vector<BallState>& trace, Vec3& out) {
  for (std::size_t i = 0; i + 1 < trace.size(); ++i) {
    const Scalar a = trace[i].position.z();
    const Scalar b = trace[i + 1].position.z();
    if (a > 0.0 && b <= 0.0) {
      const Scalar t = a / (a - b);
      out = trace[i].position + t * (trace[i + 1].position - trace[i].position);
      return true;
    }
  }
  return false;
}

}  // namespace

Action::Action(Scalar alpha, Scalar beta, Scalar vx)
    : alpha_deg(clamp(alpha, kAlphaMinDeg, kAlphaMaxDeg)),
      beta_deg(clamp(beta, kBetaMinDeg, kBetaMaxDeg)),
      racket_vx(clamp(vx, kVxMin, kVxMax)) {}

Vec3 Action::normalized() const {
  return Vec3(to_unit(alpha_deg, kAlphaMinDeg, kAlphaMaxDeg),
              to_unit(beta_deg, kBetaMinDeg, kBetaMaxDeg), to_unit(racket_vx, kVxMin, kVxMax));
}

Action Action::from_normalized(const Vec3& n) {
  return Action(from_unit(n.x(), kAlphaMinDeg, kAlphaMaxDeg),
                from_unit(n.y(), kBetaMinDeg, kBetaMaxDeg), from_unit(n.z(), kVxMin, kVxMax));
}

Vec9 EnvConfig::default_state_lo() {
  Vec9 lo;
  lo << 0.1, -0.8, 0.0, -7.5, -1.5, -5.5, -60.0, -60.0, -60.0;
  return lo;
}

Vec9 EnvConfig::default_state_hi() {
  Vec9 hi;
  hi << 0.5, 0.8, 1.0, -0.5, 1.5, 5.5, 60.0, 60.0, 60.0;
  return hi;
}

BallState sample_serve(Rng& rng, const EnvConfig& config) {
  const auto& sd = config.serve;
  for (int attempt = 0; attempt < 100; ++attempt) {
    BallState launch;
    launch.position = Vec3(draw(rng, sd.pos_x), draw(rng, sd.pos_y), draw(rng, sd.pos_z));
    launch.velocity = Vec3(draw(rng, sd.vel_x), draw(rng, sd.vel_y), draw(rng, sd.vel_z));
    launch.spin = Vec3(draw(rng, sd.spin_x), draw(rng, sd.spin_y), draw(rng, sd.spin_z));

    BallState current = launch;
    int robot_bounces = 0;
    int human_bounces = 0;
    bool valid = false;
    bool done = false;
    while (!done) {
      const auto event = physics::simulate_until_event(current, config.geometry, config.physics,
                                                       config.sim_dt, config.max_flight_time);
      switch (event.kind) {
        case physics::EventKind::TableBounce: {
          const bool robot_side = event.state.position.x() < config.geometry.net_x;
          if ((robot_side && ++robot_bounces > 1) || (!robot_side && ++human_bounces > 1)) {
            done = true;  // double bounce, nothing left to hit
            break;
          }
          current = physics::table_bounce(event.state);
          break;
        }
        case physics::EventKind::HitPlaneCrossing:
          valid = robot_bounces == 1;
          current = event.state;
          done = true;
          break;
        default:
          done = true;
          break;
      }
    }
    if (valid) return current;
  }
  throw std::runtime_error("sample_serve: no feasible serve in 100 draws; check the configured "
                           "serve distribution");
}

physics::RacketPose racket_pose_from_action(const Action& action, const BallState& ball) {
  const Scalar gamma_deg = -0.1 * ball.velocity.y();
  const Eigen::AngleAxisd yaw(action.beta_deg * kDegToRad, Vec3::UnitZ());
  const Eigen::AngleAxisd pitch(-action.alpha_deg * kDegToRad, Vec3::UnitY());
  const Eigen::AngleAxisd roll(gamma_deg * kDegToRad, Vec3::UnitX());

  physics::RacketPose pose;
  pose.normal = roll * (pitch * (yaw * Vec3::UnitX()));
  pose.velocity = Vec3(action.racket_vx, 0.0, 0.0);
  pose.position = ball.position;
  return pose;
}

Scalar reward_from_params(const RewardParams& params, const Goal& goal, Scalar height_weight) {
  const Scalar dx = goal.x - params.achieved_x;
  const Scalar dy = goal.y - params.achieved_y;
  return -std::hypot(dx, dy) - height_weight * params.height;
}

Outcome step(const BallState& ball_at_hit, const Action& action, const Goal& goal,
             const EnvConfig& config, Rng& rng) {
  // Execution noise; the draws happen unconditionally to keep rng streams
  // aligned between noisy and noise-free configurations.
  const Vec3 noise(gaussian(rng), gaussian(rng), gaussian(rng));
  const Action executed(action.alpha_deg + noise.x() * config.action_noise_std.x(),
                        action.beta_deg + noise.y() * config.action_noise_std.y(),
                        action.racket_vx + noise.z() * config.action_noise_std.z());

  const physics::RacketPose pose = racket_pose_from_action(executed, ball_at_hit);

  BallState launched = ball_at_hit;
  const bool contact = (launched.velocity - pose.velocity).dot(pose.normal) < 0.0;
  if (contact) {
    launched.velocity = physics::racket_bounce(launched.velocity, pose);
  }

  physics::EventFilter filter;
  filter.hit_plane = false;  // the return starts on the hitting plane
  std::vector<BallState> trace;
  const auto event = physics::simulate_until_event(launched, config.geometry, config.physics,
                                                   config.sim_dt, config.max_flight_time, filter,
                                                   &trace);

  // Achieved goal: where the return met the table plane. Failed returns
  // fall back to the net crossing point, the extrapolated z = 0 crossing,
  // or the hit point itself, so the reward stays finite everywhere.
  Scalar achieved_x = ball_at_hit.position.x();
  Scalar achieved_y = ball_at_hit.position.y();
  switch (event.kind) {
    case physics::EventKind::TableBounce:
      achieved_x = event.state.position.x();
      achieved_y = event.state.position.y();
      break;
    case physics::EventKind::NetContact:
      achieved_x = config.geometry.net_x;
      achieved_y = event.state.position.y();
      break;
    default: {
      Vec3 crossing;
      if (trace_table_plane_crossing(trace, crossing)) {
        achieved_x = crossing.x();
        achieved_y = crossing.y();
      }
      break;
    }
  }

  // Ball height above the table at the x midpoint of the return; if the
  // flight ended before the midpoint, the last available height.
  const Scalar x_mid = 0.5 * (ball_at_hit.position.x() + achieved_x);
  Vec3 mid_point;
  Scalar height = trace.back().position.z();
  if (trace_plane_crossing(trace, x_mid, mid_point)) {
    height = mid_point.z();
  }
  height = std::max(height, 0.0);

  const RewardParams params{achieved_x, achieved_y, height};
  return Outcome{params, reward_from_params(params, goal, config.height_weight), event.kind};
}

BallState observe(const BallState& ball_at_hit, const EnvConfig& config, Rng& rng) {
  Vec9 noise;
  for (int i = 0; i < 9; ++i) noise(i) = gaussian(rng) * config.observation_noise_std(i);
  BallState observed = ball_at_hit;
  observed.position += noise.segment<3>(0);
  observed.velocity += noise.segment<3>(3);
  observed.spin += noise.segment<3>(6);
  return observed;
}

Vec9 state_vector(const BallState& state) {
  Vec9 s;
  s << state.position, state.velocity, state.spin;
  return s;
}

Vec9 normalize_state(const Vec9& raw, const EnvConfig& config) {
  Vec9 out;
  for (int i = 0; i < 9; ++i) out(i) = to_unit(raw(i), config.state_lo(i), config.state_hi(i));
  return out;
}

Vec2 normalize_goal(const Goal& goal, const EnvConfig& config) {
  return Vec2(to_unit(goal.x, config.goal_lo.x(), config.goal_hi.x()),
              to_unit(goal.y, config.goal_lo.y(), config.goal_hi.y()));
}

namespace {

Interval midpoint_of(const Interval& iv) {
  const Scalar mid = 0.5 * (iv.lo + iv.hi);
  return Interval{mid, mid};
}

ServeDistribution degenerate(const ServeDistribution& sd) {
  ServeDistribution out;
  out.pos_x = midpoint_of(sd.pos_x);
  out.pos_y = midpoint_of(sd.pos_y);
  out.pos_z = midpoint_of(sd.pos_z);
  out.vel_x = midpoint_of(sd.vel_x);
  out.vel_y = midpoint_of(sd.vel_y);
  out.vel_z = midpoint_of(sd.vel_z);
  out.spin_x = midpoint_of(sd.spin_x);
  out.spin_y = midpoint_of(sd.spin_y);
  out.spin_z = midpoint_of(sd.spin_z);
  return out;
}

}  // namespace

Scenario make_scenario(std::string_view name) {
  Scenario sc;
  sc.name = std::string(name);
  if (name == "serve") {
    sc.goals = {Goal{2.0, 0.0}};
  } else if (name == "i-play") {
    sc.env.serve.vel_x = Interval{-6.0, -3.8};
    sc.env.serve.vel_z = Interval{0.8, 2.6};
    sc.goals = {Goal{2.4, 0.0}};
  } else if (name == "x-play") {
    sc.env.serve.pos_y = Interval{-0.35, 0.35};
    sc.env.serve.vel_y = Interval{-0.8, 0.8};
    sc.goals = {Goal{2.2, -0.3}, Goal{2.2, 0.3}};
  } else if (name == "ballmachine-fixed") {
    sc.env.serve = degenerate(sc.env.serve);
    sc.goals = {Goal{2.4, 0.0}};
  } else if (name == "ballmachine-oscillating") {
    sc.env.serve.pos_y = Interval{-0.4, 0.4};
    sc.env.serve.vel_y = Interval{-0.9, 0.9};
    sc.goals = {Goal{2.4, 0.0}};
  } else {
    throw std::invalid_argument("unknown scenario: " + sc.name);
  }
  return sc;
}

std::vector<std::string> scenario_names() {
  return {"serve", "i-play", "x-play", "ballmachine-fixed", "ballmachine-oscillating"};
}

}  // namespace ttrl::env
