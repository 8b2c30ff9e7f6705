#pragma once

// Planner cost c(tau, Y) = sum_i w_i s_i(tau, Y) for a trajectory segment
// against one future realization.
//
// Segment sums run over samples 1..n of a trajectory, so an action over
// [0, t_a] and a contingent over [t_a, T] sharing the junction sample add up
// to the cost of the full-horizon trajectory. Per-step sums are scaled by
// dt / reference_dt to keep totals stable under resampling.

#include "lookout/future_set.hpp"
#include "lookout/geom.hpp"

#include <array>
#include <string>
#include <vector>

namespace lookout {

enum Subcost : int {
  kCollision = 0,
  kSafetyDistance,
  kHeadway,
  kLaneOffset,
  kRoadBoundary,
  kSpeedLimit,
  kProgress,
  kJerk,
  kAccel,
  kDecel,
  kLatAccel,
  kCurvature,
  kNumSubcosts
};

const char* subcost_name(int index);

struct CostWeights {
  std::array<double, kNumSubcosts> w{1.0, 0.02, 0.1, 1.0, 50.0, 5.0, 1.0, 0.02, 0.5, 0.5, 0.5, 100.0};

  double& operator[](int i) { return w[static_cast<std::size_t>(i)]; }
  double operator[](int i) const { return w[static_cast<std::size_t>(i)]; }
  CostWeights scaled(double factor) const;
  /// Throws Error(kMalformedConfig) on negative or non-finite weights.
  void validate() const;
};

struct CostConfig {
  std::array<double, kNumActorClasses> collision_penalty{1e4, 1e4, 1e4};
  double near_distance = 3.0;
  double reaction_time = 0.5;
  double comfort_decel = 3.0;
  double hard_decel = 8.0;
  double half_road_width = 1.75;
  double same_lane_half_width = 1.75;
  double max_curvature = 0.2;
  double reference_dt = 0.1;
  double sdv_length = 5.0;
  double sdv_width = 2.0;

  void validate() const;
};

struct CostBreakdown {
  std::array<double, kNumSubcosts> value{};
  double total = 0.0;

  double& operator[](int i) { return value[static_cast<std::size_t>(i)]; }
  double operator[](int i) const { return value[static_cast<std::size_t>(i)]; }
  /// Recomputes total = sum_i w_i * value_i.
  void apply(const CostWeights& weights);
};

/// One actor's future sampled on the planner's time grid.
struct ActorTrack {
  ActorClass cls = ActorClass::kVehicle;
  std::vector<OrientedBox> boxes;
  std::vector<BoxFrame> frames;  // cached geometry of `boxes`, may be empty
  std::vector<double> speed;
  // Route-lane coordinates; on_lane is false where the projection fails.
  std::vector<double> station;
  std::vector<double> lateral;
  std::vector<double> along_speed;  // speed component along the lane, >= 0
  std::vector<char> on_lane;
};

/// All actors of one future on the grid t0 + i * dt, i = 0..steps.
struct FutureTracks {
  double t0 = 0.0;
  double dt = 0.1;
  std::size_t steps = 0;
  std::vector<ActorTrack> actors;

  /// Grid index of time t; throws Error(kAlignment) if t is off-grid or out
  /// of range.
  std::size_t index_of(double t) const;
};

/// Interpolates a forecast onto the planner grid. Index 0 is the current
/// actor state; later samples interpolate linearly between forecast
/// waypoints (and the current position before the first one).
FutureTracks build_tracks(const Scene& scene, const ScenePrediction& prediction,
                          const LaneCenterline& lane, double dt, std::size_t steps);

/// Tracks holding every actor at its current pose (no forecast).
FutureTracks static_tracks(const Scene& scene, const LaneCenterline& lane, double dt,
                           std::size_t steps);

struct CollisionTerms {
  double collision = 0.0;
  double proximity = 0.0;
};

CollisionTerms collision_cost(const Trajectory& traj, const FutureTracks& tracks,
                              const CostConfig& config);

/// SDV footprint at every waypoint of `traj`.
std::vector<BoxFrame> sdv_frames(const Trajectory& traj, const CostConfig& config);

/// As collision_cost with the footprint precomputed by sdv_frames.
CollisionTerms collision_cost(const Trajectory& traj, const std::vector<BoxFrame>& footprint,
                              const FutureTracks& tracks, const CostConfig& config);

double headway_cost(const Trajectory& traj, const FutureTracks& tracks, const LaneCenterline& lane,
                    const CostConfig& config);

struct TrafficRuleTerms {
  double lane_offset = 0.0;
  double road_boundary = 0.0;
  double speed_limit = 0.0;
};

TrafficRuleTerms traffic_rule_costs(const Trajectory& traj, const LaneCenterline& lane,
                                    const CostConfig& config);

struct ComfortTerms {
  double jerk = 0.0;
  double accel = 0.0;
  double decel = 0.0;
  double lat_accel = 0.0;
  double curvature = 0.0;
  double progress = 0.0;
};

ComfortTerms comfort_and_progress(const Trajectory& traj, const LaneCenterline& lane,
                                  const CostConfig& config);

/// Subcosts that do not depend on the future (rules, comfort, progress).
CostBreakdown static_cost(const Trajectory& traj, const LaneCenterline& lane,
                          const CostWeights& weights, const CostConfig& config);

/// Subcosts that depend on the future (collision, proximity, headway).
CostBreakdown dynamic_cost(const Trajectory& traj, const FutureTracks& tracks,
                           const LaneCenterline& lane, const CostWeights& weights,
                           const CostConfig& config);

CostBreakdown dynamic_cost(const Trajectory& traj, const std::vector<BoxFrame>& footprint,
                           const FutureTracks& tracks, const LaneCenterline& lane,
                           const CostWeights& weights, const CostConfig& config);

CostBreakdown total_cost(const Trajectory& traj, const FutureTracks& tracks,
                         const LaneCenterline& lane, const CostWeights& weights,
                         const CostConfig& config);

}  // namespace lookout
