#pragma once

// Diverse sampler: K affine maps Z_k = b_k(X) + a_k(X) * eps from one shared
// noise to K scene latents, trained against reconstruction, planning
// diversity (REINFORCE), general diversity and a KL anchor to the prior.

#include "lookout/cost.hpp"
#include "lookout/forecast.hpp"
#include "lookout/planner.hpp"
#include "lookout/traj_sampler.hpp"

#include <functional>
#include <vector>

namespace lookout {

struct DiverseSamplerConfig {
  int k = 15;
  int latent_dim = 64;
  int hidden = 64;
  double log_a_min = -10.0;
  double log_a_max = 5.0;
  // Std of a random per-head offset in the b-head output bias. 0 starts
  // every head exactly at the prior.
  double head_offset_init = 0.0;
};

/// Per-actor head outputs, N x (K * L); columns [k L, (k + 1) L) belong to
/// future k.
struct LatentMaps {
  Eigen::MatrixXd log_a;
  Eigen::MatrixXd b;

  int k(int latent_dim) const { return static_cast<int>(b.cols() / latent_dim); }
  Eigen::MatrixXd mean(int k, int latent_dim) const { return b.middleCols(k * latent_dim, latent_dim); }
  Eigen::MatrixXd log_scale(int k, int latent_dim) const { return log_a.middleCols(k * latent_dim, latent_dim); }
};

class DiverseSampler {
 public:
  DiverseSampler() = default;
  /// Both heads start with a zero output layer, so a = 1 and b = 0.
  static DiverseSampler create(const DiverseSamplerConfig& config, std::uint64_t seed);

  const DiverseSamplerConfig& config() const { return config_; }
  nn::ParameterSet& params() { return params_; }
  const nn::ParameterSet& params() const { return params_; }

  struct HeadVars {
    nn::Var log_a;
    nn::Var b;
  };
  HeadVars heads(const nn::Binding& bind, const SceneBatch& batch) const;

  LatentMaps maps(const PreparedScene& scene) const;

 private:
  DiverseSamplerConfig config_;
  nn::ParameterSet params_;
  nn::SceneInteraction a_net_;
  nn::SceneInteraction b_net_;
};

/// Z_k = b_k + a_k * eps for every head; eps is N x L and shared.
std::vector<Eigen::MatrixXd> map_latents(const LatentMaps& maps, const Eigen::MatrixXd& eps, int latent_dim);

/// eps = 0 inference: K futures decoded in one batch, uniform probabilities.
FutureSet infer_diverse(const DiverseSampler& sampler, const ForecastModel& decoder, const Scene& scene);

/// Diagonal Gaussian log density of each row-block latent.
double log_density(const Eigen::MatrixXd& z, const Eigen::MatrixXd& mean, const Eigen::MatrixXd& log_scale);

double energy_reconstruction(const std::vector<ScenePrediction>& futures, const Eigen::MatrixXd& truth);

/// SDV plan for one future as a 1 x 2T matrix of positions at dt, 2dt, ...
/// (relative to the plan start time), read off action then contingent.
Eigen::MatrixXd plan_matrix(const Trajectory& action, const Trajectory& contingent,
                            double dt = kForecastDt, int steps = kForecastSteps);

/// Pairwise plan distances d_ij = mean_displacement(plan_i, plan_j).
Eigen::MatrixXd plan_distances(const std::vector<Eigen::MatrixXd>& plans);

/// R = (1/K) sum_i sum_{j != i} d_ij.
double planning_reward(const Eigen::MatrixXd& distances);

/// (1/(K(K-1))) sum_i sum_{j != i} -(log p_i + log p_j) (d_ij - baseline).
double energy_planning(const std::vector<double>& log_p, const Eigen::MatrixXd& distances, double baseline = 0.0);

/// Score-function weight of head i: sum_{j != i} (d_ij - baseline) + (d_ji - baseline).
Eigen::VectorXd reinforce_coefficients(const Eigen::MatrixXd& distances, double baseline);

/// Same with a separate baseline per head.
Eigen::VectorXd reinforce_coefficients(const Eigen::MatrixXd& distances, const Eigen::VectorXd& baselines);

/// Mean off-diagonal distance.
double mean_pairwise(const Eigen::MatrixXd& distances);

/// Baseline of head i: mean distance over the ordered pairs that do not
/// involve i, so it is independent of head i's draw. 0 for K < 3.
Eigen::VectorXd leave_one_out_baselines(const Eigen::MatrixXd& distances);

/// (1/(K(K-1))) sum_i sum_{j != i} exp(-l2(Y_i, Y_j) / sigma_d); 0 for K < 2.
double energy_general(const std::vector<ScenePrediction>& futures, double sigma_d);

/// sum_k KL(N(b_k, a_k^2) || N(0, I)).
double kl_to_prior(const LatentMaps& maps);

struct SamplerObjective {
  double w_reconstruction = 0.02;
  double w_planning = 0.01;
  double w_general = 10.0;
  double beta = 1e-3;
  double sigma_d = 10000.0;
  bool baseline = true;  // leave-one-out mean pairwise distance
  // Also subtract, per head, the mean coefficient of the other draws of the
  // same step. Only active with reinforce_draws >= 2.
  bool head_baseline = false;
  // Draw the latents of the planning term with one noise per head, so the
  // pair density factorizes as p(Z_i) p(Z_j). With the shared noise the
  // score-function estimate is biased.
  bool independent_planning_noise = true;
  double norm_eps = 1e-12;
};

struct SamplerLossVars {
  nn::Var total;
  nn::Var e_r;
  nn::Var e_p;
  nn::Var e_d;
  nn::Var kl;
};

/// Loss on one scene for shared noise `eps`. `distances` (K x K plan
/// distances computed from the same latents) enables the planning term;
/// pass nullptr to drop it. `head_offsets` (K) is subtracted from the
/// per-head coefficients when given. `planning_eps` (K matrices N x L)
/// gives the noise behind each head's planning latent when it differs from
/// `eps`. The decoder is read as constants.
SamplerLossVars sampler_loss(const nn::Binding& bind, const DiverseSampler& sampler,
                             const ForecastModel& decoder, const PreparedScene& scene,
                             const Eigen::MatrixXd& eps, const Eigen::MatrixXd* distances,
                             const SamplerObjective& objective, const Eigen::VectorXd* head_offsets = nullptr,
                             const std::vector<Eigen::MatrixXd>* planning_eps = nullptr);

/// Head k's latent for its own noise eps[k].
std::vector<Eigen::MatrixXd> map_latents_per_head(const LatentMaps& maps, const std::vector<Eigen::MatrixXd>& eps,
                                                  int latent_dim);

struct PlanningSetup {
  SamplerConfig sampler = SamplerConfig::desk();
  CostWeights weights;
  CostConfig cost;
  PlannerKind planner = PlannerKind::kContingency;
};

/// Plans against the given futures (uniform weights) and returns the
/// per-future plans as 1 x 2T matrices.
std::vector<Eigen::MatrixXd> plans_for(const Scene& scene, const FutureSet& futures, const PlanningSetup& setup);

struct SamplerTrainConfig {
  int iterations = 2000;
  double learning_rate = 1e-3;
  SamplerObjective objective;
  int reinforce_draws = 1;
  int log_every = 50;
};

struct SamplerCurve {
  std::vector<int> iteration;
  std::vector<double> loss;
  std::vector<double> e_r;
  std::vector<double> e_p;
  std::vector<double> e_d;
  std::vector<double> kl;
};

/// Trains the sampler heads against a frozen decoder. Throws
/// Error(kDecoderMutated) if the decoder parameters change.
SamplerCurve train_sampler(DiverseSampler& sampler, const ForecastModel& decoder,
                           const std::vector<ForecastSample>& data, const PlanningSetup& setup,
                           const SamplerTrainConfig& config, std::uint64_t seed,
                           const std::function<void(int, double)>& progress = {});

}  // namespace lookout
