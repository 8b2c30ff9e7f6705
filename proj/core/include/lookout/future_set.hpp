#pragma once

// Scene-level forecasts: K joint realizations of every actor's future.

#include <Eigen/Core>

#include <vector>

namespace lookout {

inline constexpr int kForecastSteps = 10;
inline constexpr double kForecastDt = 0.5;

/// One joint future. Row n holds actor n's waypoints in world frame as
/// (x_1, y_1, ..., x_T, y_T); waypoint t is at time dt * t after the scene
/// timestamp.
struct ScenePrediction {
  double dt = kForecastDt;
  Eigen::MatrixXd xy;

  int num_actors() const { return static_cast<int>(xy.rows()); }
  int num_steps() const { return static_cast<int>(xy.cols() / 2); }
};

struct FutureSet {
  std::vector<ScenePrediction> futures;
  std::vector<double> probabilities;
  std::vector<Eigen::MatrixXd> latents;  // N x L per future, may be empty

  int size() const { return static_cast<int>(futures.size()); }
  /// Throws Error(kShapeMismatch) on inconsistent shapes or probabilities
  /// that are negative or do not sum to 1 within 1e-6.
  void validate() const;
  void set_uniform();
};

/// Mean over actors and waypoints of the Euclidean distance between matching
/// waypoints of two equally shaped N x 2T matrices. 0 when N = 0.
double mean_displacement(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

double mean_displacement(const ScenePrediction& a, const ScenePrediction& b);

}  // namespace lookout
