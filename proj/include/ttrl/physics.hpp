#pragma once

#include <string_view>
#include <vector>

#include "ttrl/types.hpp"

namespace ttrl::physics {

/// Flight-model coefficients. Gravity is a positive magnitude acting
/// along -z of the table frame.
struct PhysicsParams {
  Scalar k_drag = 0.1404;    // drag coefficient [1/m]
  Scalar k_magnus = 0.0041;  // Magnus coefficient [s], spin in rad/s
  Scalar gravity = 9.81;     // [m/s^2]
};

/// Ball kinematic state at a time instant, table frame: x runs from the
/// robot end (0) to the opposite end (2.740 m), z = 0 at the table surface.
struct BallState {
  Vec3 position = Vec3::Zero();  // [m]
  Vec3 velocity = Vec3::Zero();  // [m/s]
  Vec3 spin = Vec3::Zero();      // [rad/s]
  Scalar time = 0.0;             // [s]
};

/// Racket plane at contact time. `normal` must be unit length.
struct RacketPose {
  Vec3 normal = Vec3::UnitX();
  Vec3 velocity = Vec3::Zero();  // [m/s]
  Vec3 position = Vec3::Zero();  // [m]
};

struct TableGeometry {
  Scalar length = 2.740;      // table x extent [m]
  Scalar half_width = 0.762;  // |y| <= half_width on the table [m]
  Scalar net_x = 1.370;       // net plane [m]
  Scalar net_height = 0.1525; // net top above the surface [m]
  Scalar floor_z = -0.76;     // floor below the surface [m]
  Scalar hit_plane_x = 0.3;   // robot hitting plane [m]
};

enum class EventKind { TableBounce, NetContact, HitPlaneCrossing, FloorContact, Timeout };

std::string_view to_string(EventKind kind);
EventKind event_from_string(std::string_view name);

struct TrajectoryEvent {
  EventKind kind = EventKind::Timeout;
  BallState state;
};

/// Selects which geometric predicates terminate the flight. The hit plane
/// is disabled for return flights that start on it.
struct EventFilter {
  bool table = true;
  bool net = true;
  bool hit_plane = true;
  bool floor = true;
};

/// Ball acceleration: -k_D ||v|| v + k_M (w x v) - (0, 0, g).
Vec3 ball_acceleration(const Vec3& velocity, const Vec3& spin, const PhysicsParams& params);

/// One classical RK4 step of the flight ODE. Spin has no dynamics and is
/// carried unchanged; time advances by dt.
BallState rk4_step(const BallState& state, Scalar dt, const PhysicsParams& params);

/// Elastic table bounce in the infinite-mass limit: v_z' = -v_z, everything
/// else untouched. Requires a descending ball at the surface.
BallState table_bounce(const BallState& state);

/// Elastic racket bounce in the infinite-mass limit: the velocity component
/// along the racket normal n becomes 2 (v_r . n) - (v_b . n); tangential
/// components pass through. Requires the ball to approach the racket.
Vec3 racket_bounce(const Vec3& ball_velocity, const RacketPose& racket);

/// Integrates with rk4_step until the first enabled event fires or
/// max_time elapses. Event states are refined by bisection on the final
/// step so the geometric predicate holds to within 1e-6 m. When `trace`
/// is given, every accepted step (including the refined event state) is
/// appended to it.
///
/// Throws std::runtime_error if the state turns non-finite.
TrajectoryEvent simulate_until_event(const BallState& state, const TableGeometry& geometry,
                                     const PhysicsParams& params, Scalar dt, Scalar max_time,
                                     const EventFilter& filter = {},
                                     std::vector<BallState>* trace = nullptr);

}  // namespace ttrl::physics
