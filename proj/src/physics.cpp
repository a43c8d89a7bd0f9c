#include "ttrl/physics.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace ttrl::physics {

namespace {

constexpr Scalar kEventTolerance = 1e-6;  // [m]

bool finite(const BallState& s) {
  return s.position.allFinite() && s.velocity.allFinite() && s.spin.allFinite() &&
         std::isfinite(s.time);
}

Vec3 normalized_or_throw(const Vec3& n) {
  const Scalar len = n.norm();
  if (std::abs(len - 1.0) > 1e-9) {
    throw std::invalid_argument("racket normal must be unit length");
  }
  return n;
}

/// Signed gap to an event surface; the event fires on a +/- sign change.
using GapFn = Scalar (*)(const BallState&, const TableGeometry&);

Scalar table_gap(const BallState& s, const TableGeometry&) { return s.position.z(); }
Scalar net_gap(const BallState& s, const TableGeometry& g) { return s.position.x() - g.net_x; }
Scalar hit_gap(const BallState& s, const TableGeometry& g) { return s.position.x() - g.hit_plane_x; }
Scalar floor_gap(const BallState& s, const TableGeometry& g) { return s.position.z() - g.floor_z; }

/// Bisects the step [0, dt] from `from` until |gap| <= tol, staying on the
/// far side of the crossing. Returns the sub-step length and refined state.
std::pair<Scalar, BallState> refine_crossing(const BallState& from, Scalar dt,
                                             const PhysicsParams& params,
                                             const TableGeometry& geometry, GapFn gap) {
  const Scalar sign_before = gap(from, geometry) > 0 ? 1.0 : -1.0;
  Scalar lo = 0.0;
  Scalar hi = dt;
  BallState candidate = rk4_step(from, hi, params);
  for (int i = 0; i < 64; ++i) {
    if (std::abs(gap(candidate, geometry)) <= kEventTolerance) break;
    const Scalar mid = 0.5 * (lo + hi);
    const BallState probe = rk4_step(from, mid, params);
    if (gap(probe, geometry) * sign_before > 0) {
      lo = mid;
    } else {
      hi = mid;
      candidate = probe;
    }
  }
  return {hi, candidate};
}

struct Candidate {
  bool hit = false;
  Scalar sub_dt = std::numeric_limits<Scalar>::infinity();
  TrajectoryEvent event;
};

void consider(Candidate& best, EventKind kind, Scalar sub_dt, const BallState& state) {
  if (sub_dt < best.sub_dt) {
    best = Candidate{true, sub_dt, TrajectoryEvent{kind, state}};
  }
}

}  // namespace

std::string_view to_string(EventKind kind) {
  switch (kind) {
    case EventKind::TableBounce: return "table_bounce";
    case EventKind::NetContact: return "net_contact";
    case EventKind::HitPlaneCrossing: return "hit_plane_crossing";
    case EventKind::FloorContact: return "floor_contact";
    case EventKind::Timeout: return "timeout";
  }
  return "unknown";
}

EventKind event_from_string(std::string_view name) {
  if (name == "table_bounce") return EventKind::TableBounce;
  if (name == "net_contact") return EventKind::NetContact;
  if (name == "hit_plane_crossing") return EventKind::HitPlaneCrossing;
  if (name == "floor_contact") return EventKind::FloorContact;
  if (name == "timeout") return EventKind::Timeout;
  throw std::invalid_argument("unknown event kind: " + std::string(name));
}

Vec3 ball_acceleration(const Vec3& velocity, const Vec3& spin, const PhysicsParams& params) {
  return -params.k_drag * velocity.norm() * velocity + params.k_magnus * spin.cross(velocity) -
         Vec3(0.0, 0.0, params.gravity);
}

BallState rk4_step(const BallState& state, Scalar dt, const PhysicsParams& params) {
  const Vec3& v0 = state.velocity;
  const Vec3& w = state.spin;

  const Vec3 k1v = ball_acceleration(v0, w, params);
  const Vec3 k1p = v0;
  const Vec3 v2 = v0 + 0.5 * dt * k1v;
  const Vec3 k2v = ball_acceleration(v2, w, params);
  const Vec3 k2p = v2;
  const Vec3 v3 = v0 + 0.5 * dt * k2v;
  const Vec3 k3v = ball_acceleration(v3, w, params);
  const Vec3 k3p = v3;
  const Vec3 v4 = v0 + dt * k3v;
  const Vec3 k4v = ball_acceleration(v4, w, params);
  const Vec3 k4p = v4;

  BallState next = state;
  next.position += (dt / 6.0) * (k1p + 2.0 * k2p + 2.0 * k3p + k4p);
  next.velocity += (dt / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
  next.time += dt;
  return next;
}

BallState table_bounce(const BallState& state) {
  if (!(state.velocity.z() < 0.0)) {
    throw std::invalid_argument("table_bounce: ball must be descending");
  }
  if (std::abs(state.position.z()) > 1e-3) {
    throw std::invalid_argument("table_bounce: ball is not at the table surface");
  }
  BallState out = state;
  out.velocity.z() = -out.velocity.z();
  return out;
}

Vec3 racket_bounce(const Vec3& ball_velocity, const RacketPose& racket) {
  const Vec3 n = normalized_or_throw(racket.normal);
  const Scalar approach = (ball_velocity - racket.velocity).dot(n);
  if (approach >= 0.0) {
    throw std::invalid_argument("racket_bounce: ball is not approaching the racket");
  }
  const Scalar vb_n = ball_velocity.dot(n);
  const Scalar vr_n = racket.velocity.dot(n);
  return ball_velocity + 2.0 * (vr_n - vb_n) * n;
}

TrajectoryEvent simulate_until_event(const BallState& state, const TableGeometry& geometry,
                                     const PhysicsParams& params, Scalar dt, Scalar max_time,
                                     const EventFilter& filter, std::vector<BallState>* trace) {
  if (!(dt > 0.0) || !(max_time > 0.0)) {
    throw std::invalid_argument("simulate_until_event: dt and max_time must be positive");
  }
  if (!finite(state)) {
    throw std::runtime_error("simulate_until_event: non-finite initial state");
  }

  const Scalar t_end = state.time + max_time;
  BallState current = state;
  if (trace) trace->push_back(current);

  while (current.time < t_end) {
    const Scalar step = std::min(dt, t_end - current.time);
    const BallState next = rk4_step(current, step, params);
    if (!finite(next)) {
      throw std::runtime_error("simulate_until_event: integration diverged");
    }

    Candidate best;

    // Table surface, descending, inside the x-y extent at the crossing.
    if (filter.table && current.position.z() > 0.0 && next.position.z() <= 0.0) {
      auto [sub, at] = refine_crossing(current, step, params, geometry, table_gap);
      const bool on_table = at.position.x() >= 0.0 && at.position.x() <= geometry.length &&
                            std::abs(at.position.y()) <= geometry.half_width;
      if (on_table && at.velocity.z() < 0.0) {
        consider(best, EventKind::TableBounce, sub, at);
      }
    }

    // Net plane, crossed in either direction below the net top.
    if (filter.net && (current.position.x() - geometry.net_x) * (next.position.x() - geometry.net_x) < 0.0) {
      auto [sub, at] = refine_crossing(current, step, params, geometry, net_gap);
      if (at.position.z() >= 0.0 && at.position.z() <= geometry.net_height) {
        consider(best, EventKind::NetContact, sub, at);
      }
    }

    // Hitting plane, crossed toward the robot end only.
    if (filter.hit_plane && current.position.x() - geometry.hit_plane_x > 0.0 &&
        next.position.x() - geometry.hit_plane_x <= 0.0) {
      auto [sub, at] = refine_crossing(current, step, params, geometry, hit_gap);
      if (at.velocity.x() < 0.0) {
        consider(best, EventKind::HitPlaneCrossing, sub, at);
      }
    }

    if (filter.floor && current.position.z() - geometry.floor_z > 0.0 &&
        next.position.z() - geometry.floor_z <= 0.0) {
      auto [sub, at] = refine_crossing(current, step, params, geometry, floor_gap);
      consider(best, EventKind::FloorContact, sub, at);
    }

    if (best.hit) {
      if (trace) trace->push_back(best.event.state);
      return best.event;
    }

    current = next;
    if (trace) trace->push_back(current);
  }

  return TrajectoryEvent{EventKind::Timeout, current};
}

}  // namespace ttrl::physics
