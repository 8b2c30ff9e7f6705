#pragma once

// Open-loop forecast metrics, closed-loop driving metrics and the ablation
// campaign runner.

#include "lookout/sim.hpp"

#include <functional>
#include <map>
#include <string>
#include <vector>

namespace lookout {

/// Distance normalization for the pairwise self-distance metrics.
/// kPrinted: meanSASD and meanPlanASD divide the double sum by S and minSASD
/// is a plain sum over samples. kPairwise: the double sums divide by
/// S(S-1) and minSASD by S.
enum class AsdNormalization { kPrinted, kPairwise };

/// One scene: S predicted futures, the ground truth, actor classes and
/// optionally one SDV plan per future (1 x 2T each).
struct OpenLoopScene {
  std::vector<Eigen::MatrixXd> samples;  // S x (N x 2T)
  Eigen::MatrixXd truth;                 // N x 2T
  std::vector<ActorClass> classes;       // N, empty means all vehicles
  std::vector<Eigen::MatrixXd> plans;    // S or empty
};

struct OpenLoopRow {
  double min_sade = 0.0;
  double mean_sade = 0.0;
  double min_sasd = 0.0;
  double mean_sasd = 0.0;
  double mean_plan_asd = 0.0;
  int count = 0;  // scenes contributing
};

struct OpenLoopReport {
  std::vector<OpenLoopRow> scenes;  // one per input scene
  OpenLoopRow aggregate;            // mean over scenes
  std::map<ActorClass, OpenLoopRow> per_class;
};

double min_sade(const std::vector<Eigen::MatrixXd>& samples, const Eigen::MatrixXd& truth);
double mean_sade(const std::vector<Eigen::MatrixXd>& samples, const Eigen::MatrixXd& truth);
/// Sum (or mean) over samples of the distance to the nearest other sample;
/// 0 for S < 2.
double min_sasd(const std::vector<Eigen::MatrixXd>& samples, AsdNormalization norm = AsdNormalization::kPrinted);
/// 0 for S < 2.
double mean_sasd(const std::vector<Eigen::MatrixXd>& samples, AsdNormalization norm = AsdNormalization::kPrinted);
double mean_plan_asd(const std::vector<Eigen::MatrixXd>& plans, AsdNormalization norm = AsdNormalization::kPrinted);

/// Throws Error(kShapeMismatch) when sample, truth or plan shapes disagree.
OpenLoopRow scene_metrics(const OpenLoopScene& scene, AsdNormalization norm = AsdNormalization::kPrinted);
OpenLoopReport open_loop_metrics(const std::vector<OpenLoopScene>& scenes,
                                 AsdNormalization norm = AsdNormalization::kPrinted);

/// Kinematic means are means of absolute executed values over every step of
/// every log. accel averages the positive steps, decel the magnitudes of
/// the negative ones.
struct ClosedLoopReport {
  double collision_rate = 0.0;  // percent of rollouts with >= 1 collision
  double progress = 0.0;        // mean per rollout [m]
  double progress_per_collision = 0.0;  // +inf without collisions
  double jerk = 0.0;
  double lat_accel = 0.0;
  double accel = 0.0;
  double decel = 0.0;
  int rollouts = 0;
  int collisions = 0;  // collision onsets over all rollouts
};

/// Throws Error(kInvalidArgument) for an empty set of logs.
ClosedLoopReport closed_loop_metrics(const std::vector<RolloutLog>& logs);

struct CampaignConfig {
  Family family = Family::kUnprotectedLeft;
  FamilyOptions options;
  std::uint64_t seed = 0;  // scenario i uses derive_seed(seed, "campaign", i)
  int rollouts = 100;
  RolloutConfig rollout;
  int threads = 1;  // rollouts run in parallel; results are merged in seed order
};

std::uint64_t campaign_scenario_seed(const CampaignConfig& config, int index);

/// Runs config.rollouts scenarios with one provider per rollout from
/// `make_provider(rollout index)`. Logs come back in seed order whatever the
/// thread count; `progress` is called under a lock, in completion order.
std::vector<RolloutLog> run_campaign(const CampaignConfig& config,
                                     const std::function<FutureProvider(int)>& make_provider,
                                     const std::function<void(int, const RolloutLog&)>& progress = {});

/// Checkpoints for the ablation rows. The E_p-off pair is only needed by M2.
struct AblationModels {
  const ForecastModel* decoder = nullptr;
  const DiverseSampler* sampler = nullptr;
  const Scorer* scorer = nullptr;
  const DiverseSampler* sampler_no_planning = nullptr;
  const Scorer* scorer_no_planning = nullptr;
};

struct AblationVariant {
  std::string name;
  std::string description;
};

/// full, M1 (prior sampling, uniform), M2 (E_p off), M3 (uniform
/// probabilities), M4 (expected-cost planner).
std::vector<AblationVariant> ablation_variants();

struct AblationRow {
  std::string name;
  std::string description;
  ClosedLoopReport report;
};

/// One row per requested variant over the same scenario seeds. Throws
/// Error(kMissingCheckpoint) naming the first checkpoint a variant needs
/// but lacks. An empty `names` runs every variant.
std::vector<AblationRow> run_ablation(const AblationModels& models, const CampaignConfig& config,
                                      const std::vector<std::string>& names = {},
                                      const std::function<void(const std::string&, int)>& progress = {});

}  // namespace lookout
