#pragma once

// Candidate generation in the Frenet frame of the route lane: lateral paths
// from two chained quintics, short-term actions from quartic speed profiles,
// and per-action contingent continuations from two chained quartics.

#include "lookout/geom.hpp"

#include <string>
#include <vector>

namespace lookout {

struct PolynomialProfile {
  std::vector<double> coefficients;  // ascending powers of local time
  double duration = 0.0;

  double value(double t) const;
  double first(double t) const;
  double second(double t) const;
  double third(double t) const;
};

struct Boundary3 {
  double p = 0.0;
  double v = 0.0;
  double a = 0.0;
};

struct Boundary2 {
  double v = 0.0;
  double a = 0.0;
};

/// Quintic through position, velocity and acceleration at both ends.
PolynomialProfile solve_quintic(const Boundary3& start, const Boundary3& end, double duration);

/// Quartic with fixed start state and terminal velocity/acceleration; the
/// terminal position is free.
PolynomialProfile solve_quartic(const Boundary3& start, const Boundary2& end, double duration);

/// Lateral offset profile made of two quintics joined at `t_mid`.
struct LateralPath {
  PolynomialProfile first;
  PolynomialProfile second;
  double t_mid = 0.0;
  double mid_offset = 0.0;
  double end_offset = 0.0;

  Boundary3 eval(double t) const;
};

struct SamplerConfig {
  std::string preset = "desk";
  std::vector<double> lateral_mid_offsets;
  std::vector<double> lateral_end_offsets;
  int action_velocity_count = 6;
  int contingent_mid_velocity_count = 5;
  int contingent_end_velocity_count = 6;
  // Explicit velocity sets override the uniform grids when non-empty.
  std::vector<double> action_velocities;
  std::vector<double> contingent_mid_velocities;
  std::vector<double> contingent_end_velocities;
  double action_horizon = 1.0;
  double horizon = 5.0;
  double dt = 0.1;
  double speed_margin = 1.0;
  double max_accel = 3.0;

  static SamplerConfig desk();
  static SamplerConfig paper();
  static SamplerConfig from_preset(const std::string& name);

  std::size_t action_steps() const;
  std::size_t contingent_steps() const;
  /// Throws Error(kMalformedConfig) on inconsistent horizons or empty sets.
  void validate() const;
};

std::vector<LateralPath> generate_lateral_paths(const FrenetState& sdv,
                                                const LaneCenterline& lane,
                                                const SamplerConfig& config);

struct LongitudinalSample {
  double s = 0.0;
  double v = 0.0;
  double a = 0.0;
};

/// Samples a speed profile every `dt` for `steps` steps (steps + 1 samples).
/// Once the velocity would turn negative the state is frozen at the stopping
/// point with zero speed and acceleration.
std::vector<LongitudinalSample> realize_longitudinal(const PolynomialProfile& profile,
                                                     std::size_t steps, double dt);

/// Uniform grid on [0, hi] with `count` samples (hi when count == 1).
std::vector<double> velocity_grid(double hi, int count);

struct ContingentProfile {
  double mid_velocity = 0.0;
  double end_velocity = 0.0;
  // Samples over [t_a, T], first sample is the action's terminal state.
  std::vector<LongitudinalSample> samples;
};

/// Two chained quartics conditioned on `start`, one per (mid, end) pair.
std::vector<ContingentProfile> contingent_profiles(const LongitudinalSample& start,
                                                   double speed_limit,
                                                   const SamplerConfig& config);

struct PlanCandidate {
  int path_id = 0;
  double action_velocity = 0.0;
  Trajectory action;                       // over [0, t_a]
  std::vector<FrenetState> action_frenet;  // one per action waypoint
  std::vector<Trajectory> contingents;     // over [t_a, T]
  std::vector<std::pair<double, double>> contingent_velocities;  // (mid, end)
};

/// Candidates in path-major, then action-velocity order. Throws
/// Error(kEmptyCandidateSet) when nothing fits on the lane.
std::vector<PlanCandidate> generate_candidates(const FrenetState& sdv,
                                               const LaneCenterline& lane,
                                               const SamplerConfig& config);

/// Projects the scene's SDV (zero acceleration) onto `lane` first.
std::vector<PlanCandidate> generate_candidates(const Scene& scene, const LaneCenterline& lane,
                                               const SamplerConfig& config);

/// Full-horizon trajectory: the action followed by contingent `index`.
Trajectory concatenate(const Trajectory& action, const Trajectory& contingent);

}  // namespace lookout
