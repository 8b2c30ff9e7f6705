#pragma once

// Scenario scorer: a probability for each of K futures. Every future is
// scored by the same network from the actor contexts, that future's
// trajectories and the mean over all futures, so permuting the futures
// permutes the probabilities.

#include "lookout/diverse_sampler.hpp"
#include "lookout/forecast.hpp"

#include <functional>
#include <vector>

namespace lookout {

Eigen::VectorXd softmax(const Eigen::VectorXd& logits);

/// q_k proportional to exp(-alpha * l2(Y_k, Y_gt)).
Eigen::VectorXd target_distribution(const std::vector<ScenePrediction>& futures, const Eigen::MatrixXd& truth,
                                    double alpha);

/// sum_k p_k log(p_k / q_k) with q floored at `floor`.
double kl_divergence(const Eigen::VectorXd& p, const Eigen::VectorXd& q, double floor = 1e-12);

struct ScorerConfig {
  int k = 15;
  int hidden = 128;
  double alpha = 10.0;
  double trajectory_scale = 10.0;
};

/// Futures of one scene laid out for the network.
struct ScorerInput {
  Eigen::MatrixXd nodes;  // (K N) x (D + 4T), future-major
  std::vector<Pose2> poses;
  int k = 0;
  int num_actors = 0;
};

ScorerInput make_scorer_input(const Scene& scene, const PreparedScene& prepared,
                              const std::vector<ScenePrediction>& futures, double trajectory_scale);

class Scorer {
 public:
  Scorer() = default;
  static Scorer create(const ScorerConfig& config, std::uint64_t seed);

  const ScorerConfig& config() const { return config_; }
  nn::ParameterSet& params() { return params_; }
  const nn::ParameterSet& params() const { return params_; }

  /// Logits for a batch of scenes, scenes x K.
  nn::Var logits(const nn::Binding& bind, const std::vector<const ScorerInput*>& inputs) const;

  Eigen::VectorXd score(const Scene& scene, const PreparedScene& prepared,
                        const std::vector<ScenePrediction>& futures) const;
  /// Fills futures.probabilities.
  void score(const Scene& scene, FutureSet& futures, const ForecastConfig& forecast) const;

 private:
  ScorerConfig config_;
  nn::ParameterSet params_;
  nn::SceneInteraction node_;
  nn::Mlp head_;
};

/// Mean over scenes of KL(p || q), or KL(q || p) when `reverse`.
nn::Var scorer_loss(const nn::Binding& bind, const Scorer& scorer, const std::vector<const ScorerInput*>& inputs,
                    const Eigen::MatrixXd& targets, bool reverse);

struct ScorerTrainConfig {
  int iterations = 500;
  int batch_size = 8;
  double learning_rate = 1e-3;
  bool reverse_kl = false;
  int log_every = 50;
};

struct ScorerCurve {
  std::vector<int> iteration;
  std::vector<double> loss;
};

/// Futures come from the frozen sampler and decoder at eps = 0.
ScorerCurve train_scorer(Scorer& scorer, const DiverseSampler& sampler, const ForecastModel& decoder,
                         const std::vector<ForecastSample>& data, const ScorerTrainConfig& config,
                         std::uint64_t seed, const std::function<void(int, double)>& progress = {});

}  // namespace lookout
