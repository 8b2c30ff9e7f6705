#pragma once

// Geometric and kinematic primitives shared by the planner, forecaster and
// simulator: poses, lanes with a Frenet frame, oriented boxes and
// finite-difference trajectory kinematics.

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace lookout {

using Vec2 = Eigen::Vector2d;

inline constexpr double kPi = 3.14159265358979323846;

/// Wraps an angle into (-pi, pi].
double normalize_angle(double angle);

struct Pose2 {
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;

  Vec2 position() const { return {x, y}; }
};

enum class ActorClass : std::uint8_t { kVehicle = 0, kPedestrian = 1, kBicyclist = 2 };

inline constexpr int kNumActorClasses = 3;

const char* actor_class_name(ActorClass cls);
ActorClass actor_class_from_name(const std::string& name);

struct ActorState {
  int id = 0;
  Pose2 pose;
  double speed = 0.0;
  double length = 4.8;
  double width = 2.0;
  ActorClass cls = ActorClass::kVehicle;
};

/// Frenet coordinates relative to a lane centerline. d > 0 is left of the
/// direction of travel.
struct FrenetState {
  double s = 0.0;
  double s_dot = 0.0;
  double s_ddot = 0.0;
  double d = 0.0;
  double d_dot = 0.0;
  double d_ddot = 0.0;
};

/// Polyline lane centerline with a continuous normal field.
///
/// The normal at each vertex bisects the adjacent segment normals and is
/// linearly interpolated along each segment, so the map (s, d) -> x is
/// continuous and `project` is its exact inverse wherever the projection is
/// unique.
class LaneCenterline {
 public:
  struct Projection {
    double s = 0.0;
    double d = 0.0;
    double heading = 0.0;  // lane heading at s
  };

  LaneCenterline() = default;

  /// Builds a lane from ordered points, inserting samples so no two
  /// consecutive points are farther apart than `max_spacing`.
  /// Throws Error(kInvalidArgument) for fewer than two distinct points.
  static LaneCenterline from_points(const std::vector<Vec2>& points, double speed_limit,
                                    double max_spacing = 2.0);

  /// Straight lane from `start` along `heading`.
  static LaneCenterline straight(Vec2 start, double heading, double length,
                                 double speed_limit);

  const std::vector<Pose2>& points() const { return points_; }
  const std::vector<double>& cumulative_arclength() const { return arclength_; }
  double length() const { return arclength_.empty() ? 0.0 : arclength_.back(); }
  double speed_limit() const { return speed_limit_; }

  /// Point on the centerline at arclength s (clamped to the lane extent).
  Vec2 point_at(double s) const;
  /// Unit left normal at s.
  Vec2 normal_at(double s) const;
  /// Heading of the frame at s.
  double heading_at(double s) const;
  /// Signed curvature of the frame at s (derivative of heading wrt s).
  double curvature_at(double s) const;
  /// Cartesian position of the Frenet point (s, d).
  Vec2 to_cartesian(double s, double d) const;

  /// Exact inverse of to_cartesian, picking the smallest |d| solution within
  /// `max_offset`. Returns nullopt when the point lies beyond either end.
  std::optional<Projection> project(const Vec2& p, double max_offset = 50.0) const;

 private:
  std::size_t segment_index(double s) const;

  std::vector<Pose2> points_;
  std::vector<double> arclength_;
  std::vector<Vec2> vertex_normals_;
  double speed_limit_ = 0.0;
  // Bounding circles over runs of kBlock segments for projection culling.
  static constexpr std::size_t kBlock = 16;
  std::vector<Vec2> block_center_;
  std::vector<double> block_radius_;
};

using LaneSet = std::shared_ptr<const std::vector<LaneCenterline>>;

/// Timestamped waypoint sequence with kinematics derived by finite differences.
struct Trajectory {
  double t0 = 0.0;
  double dt = 0.1;
  std::vector<Vec2> waypoints;

  std::vector<double> speed;
  std::vector<double> accel;
  std::vector<double> jerk;
  std::vector<double> heading;
  std::vector<double> curvature;

  // Optional lane coordinates of every waypoint on the lane the trajectory
  // was generated on; empty when unknown.
  std::vector<double> station;
  std::vector<double> lateral;

  std::size_t size() const { return waypoints.size(); }
  double time_at(std::size_t i) const { return t0 + dt * static_cast<double>(i); }
  double end_time() const { return time_at(waypoints.empty() ? 0 : waypoints.size() - 1); }
};

struct DerivedKinematics {
  std::vector<double> speed;
  std::vector<double> accel;
  std::vector<double> jerk;
  std::vector<double> heading;
  std::vector<double> curvature;
};

inline constexpr double kCurvatureGuard = 1e-6;

/// Finite-difference kinematics: central differences in the interior,
/// one-sided at the ends. Stationary steps hold the last moving heading, or
/// `fallback_heading` before any motion.
DerivedKinematics derive_kinematics(std::span<const Vec2> waypoints, double dt,
                                    double fallback_heading = 0.0);

/// Builds a trajectory and fills its derived fields.
Trajectory make_trajectory(double t0, double dt, std::vector<Vec2> waypoints,
                           double fallback_heading = 0.0);

/// Recomputes derived fields from the waypoints in place.
void rederive(Trajectory& traj, double fallback_heading = 0.0);

/// Linear resampling onto a new grid. Throws Error(kAlignment) if the
/// requested span is not covered (with 1e-9 s slack).
Trajectory resample(const Trajectory& traj, double t0, double dt, std::size_t count);

struct Scene {
  double timestamp = 0.0;
  ActorState sdv;
  std::vector<ActorState> actors;
  LaneSet lanes;
  int route_lane_index = 0;
  double history_dt = 0.1;
  // history[i] holds the past poses of actors[i], oldest first, ending one
  // step before the current pose. All entries have the same length.
  std::vector<std::vector<Pose2>> history;

  const LaneCenterline& route_lane() const;
};

/// Throws Error(kInvalidArgument) when route index, id uniqueness or history
/// lengths are inconsistent.
void validate_scene(const Scene& scene);

/// Projects an actor with the given longitudinal acceleration onto a lane.
/// Throws Error(kProjectionOutOfRange) beyond the lane extent or farther than
/// 50 m laterally.
FrenetState project_to_frenet(const ActorState& actor, double accel,
                              const LaneCenterline& lane);

/// Cartesian trajectory from a Frenet state sequence sampled at `dt`.
Trajectory from_frenet(std::span<const FrenetState> states, const LaneCenterline& lane,
                       double t0, double dt);

struct OrientedBox {
  Vec2 center = Vec2::Zero();
  double heading = 0.0;
  double length = 1.0;
  double width = 1.0;

  std::array<Vec2, 4> corners() const;
};

OrientedBox box_of(const ActorState& actor);

/// Separating-axis test; touching boundaries count as overlap.
bool obb_overlap(const OrientedBox& a, const OrientedBox& b);

/// Euclidean distance between two boxes, 0 when they overlap.
double obb_distance(const OrientedBox& a, const OrientedBox& b);

/// Box with axes and corners precomputed for repeated queries.
struct BoxFrame {
  Vec2 center = Vec2::Zero();
  Vec2 u = Vec2::UnitX();
  Vec2 v = Vec2::UnitY();
  double half_length = 0.5;
  double half_width = 0.5;
  std::array<Vec2, 4> corners{};

  static BoxFrame of(const OrientedBox& box);
};

/// Largest separating-axis gap. <= 0 exactly when the boxes overlap;
/// otherwise a lower bound on their distance.
double box_separation(const BoxFrame& a, const BoxFrame& b);

/// Same result as obb_distance.
double box_distance(const BoxFrame& a, const BoxFrame& b);

/// Rigidly transforms a point from the frame of `frame` to world.
Vec2 local_to_world(const Pose2& frame, const Vec2& local);
Vec2 world_to_local(const Pose2& frame, const Vec2& world);

}  // namespace lookout
