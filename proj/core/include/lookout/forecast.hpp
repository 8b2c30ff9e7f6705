#pragma once

// Latent-variable joint forecaster: actor contexts, a posterior encoder,
// a fixed N(0, I) prior and a decoder, all built on scene interaction
// modules so every actor's future is decoded jointly.

#include "lookout/future_set.hpp"
#include "lookout/geom.hpp"
#include "lookout/nn/adam.hpp"
#include "lookout/nn/layers.hpp"
#include "lookout/rng.hpp"

#include <functional>
#include <string>
#include <vector>

namespace lookout {

inline constexpr int kHistorySteps = 10;
/// History deltas (20), speed, class one-hot (3), lane terms (3) and pose
/// relative to the SDV (x, y, cos a, sin a).
inline constexpr int kContextDim = 2 * kHistorySteps + 1 + kNumActorClasses + 3 + 4;

namespace context_index {
inline constexpr int kDeltas = 0;
inline constexpr int kSpeed = 2 * kHistorySteps;
inline constexpr int kClass = kSpeed + 1;
inline constexpr int kLaneOffset = kClass + kNumActorClasses;
inline constexpr int kLaneHeading = kLaneOffset + 1;
inline constexpr int kLaneRemaining = kLaneHeading + 1;
inline constexpr int kRelX = kLaneRemaining + 1;
inline constexpr int kRelY = kRelX + 1;
inline constexpr int kRelCos = kRelY + 1;
inline constexpr int kRelSin = kRelCos + 1;
}  // namespace context_index

/// One row of raw (unnormalized) features per scene actor. History deltas
/// are p(t-k) - p(t-k+1) for k = 1..10 in the actor's current frame; lane
/// terms use the lane with the smallest |d| that the actor projects onto.
Eigen::MatrixXd build_contexts(const Scene& scene);

/// Fixed per-feature divisors applied inside the networks.
Eigen::RowVectorXd context_scale();

/// World-frame future (N x 2T) expressed in each actor's current frame.
Eigen::MatrixXd to_actor_frame(const Scene& scene, const Eigen::MatrixXd& world);
Eigen::MatrixXd to_world_frame(const Scene& scene, const Eigen::MatrixXd& local);

/// Constant-velocity continuation in actor frame (x = v t, y = 0).
Eigen::MatrixXd constant_velocity_local(const Scene& scene, int steps, double dt);

struct ForecastConfig {
  int latent_dim = 64;
  int hidden = 64;
  int steps = kForecastSteps;
  double dt = kForecastDt;
  double residual_scale = 10.0;
  double log_sigma_min = -10.0;
  double log_sigma_max = 5.0;
};

/// Inputs of one scene prepared for the networks.
struct PreparedScene {
  Eigen::MatrixXd x;         // N x D normalized contexts
  std::vector<Pose2> poses;  // current actor poses
  Eigen::MatrixXd cv_local;  // N x 2T constant-velocity baseline
  Eigen::MatrixXd y_local;   // N x 2T ground truth in actor frame, may be empty

  int num_actors() const { return static_cast<int>(x.rows()); }
};

PreparedScene prepare_scene(const Scene& scene, const ForecastConfig& config,
                            const Eigen::MatrixXd* future_world = nullptr);

/// Several scenes (or copies of one scene) stacked as disjoint graph blocks.
struct SceneBatch {
  Eigen::MatrixXd x;
  Eigen::MatrixXd cv_local;
  Eigen::MatrixXd y_local;
  nn::Graph graph;
  std::vector<int> offsets;  // first row of each block, plus the total

  static SceneBatch stack(const std::vector<const PreparedScene*>& scenes);
  static SceneBatch replicate(const PreparedScene& scene, int copies);
};

struct GaussianVars {
  nn::Var mu;
  nn::Var log_sigma;
};

class ForecastModel {
 public:
  ForecastModel() = default;
  static ForecastModel create(const ForecastConfig& config, std::uint64_t seed);

  const ForecastConfig& config() const { return config_; }
  nn::ParameterSet& params() { return params_; }
  const nn::ParameterSet& params() const { return params_; }

  /// Posterior q(Z | X, Y) for a batch with ground truth.
  GaussianVars encode(const nn::Binding& b, const SceneBatch& batch) const;
  /// Decoded trajectories in actor frame (rows x 2T).
  nn::Var decode_local(const nn::Binding& b, const SceneBatch& batch, nn::Var z) const;

  /// Decodes one latent per copy of the scene in a single batched pass.
  std::vector<ScenePrediction> decode(const Scene& scene, const PreparedScene& prepared,
                                      const std::vector<Eigen::MatrixXd>& latents) const;

 private:
  ForecastConfig config_;
  nn::ParameterSet params_;
  nn::SceneInteraction encoder_mu_;
  nn::SceneInteraction encoder_log_sigma_;
  nn::SceneInteraction decoder_;
};

/// Draws K scene latents i.i.d. from N(0, I).
std::vector<Eigen::MatrixXd> sample_prior(int num_actors, int latent_dim, int k, Rng& rng);

/// Prior sampling: K latents decoded and weighted uniformly.
FutureSet forecast_prior(const ForecastModel& model, const Scene& scene, int k, Rng& rng);

/// KL(N(mu, diag sigma^2) || N(0, I)) summed over all entries.
double gaussian_kl(const Eigen::MatrixXd& mu, const Eigen::MatrixXd& log_sigma);
nn::Var gaussian_kl(nn::Tape& tape, nn::Var mu, nn::Var log_sigma);

struct ForecastSample {
  Scene scene;
  Eigen::MatrixXd future;  // N x 2T world frame
  int mode = 0;
};

struct ForecastTrainConfig {
  int iterations = 3000;
  int batch_size = 8;
  double learning_rate = 1e-3;
  double beta = 0.1;
  bool cyclical_beta = false;
  int cycle_length = 1000;
  double huber_delta = 1.0;
  int log_every = 100;
};

/// beta at `iteration`: constant, or a ramp from 0 over the first half of
/// each cycle when cyclical.
double beta_at(const ForecastTrainConfig& config, int iteration);

/// Huber reconstruction (mean over actors and waypoints) plus beta * KL
/// evaluated with posterior noise `eps` (rows x L).
struct ForecastLoss {
  nn::Var total;
  nn::Var reconstruction;
  nn::Var kl;
};

ForecastLoss forecast_loss(const nn::Binding& b, const ForecastModel& model, const SceneBatch& batch,
                           const Eigen::MatrixXd& eps, double beta, double huber_delta);

struct TrainCurve {
  std::vector<int> iteration;
  std::vector<double> loss;
  std::vector<double> reconstruction;
  std::vector<double> kl;
};

TrainCurve train_forecast(ForecastModel& model, const std::vector<ForecastSample>& data,
                          const ForecastTrainConfig& config, std::uint64_t seed,
                          const std::function<void(int, double)>& progress = {});

}  // namespace lookout
