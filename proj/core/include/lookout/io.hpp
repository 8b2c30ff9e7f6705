#pragma once

// Files: JSON checkpoints, datasets, scenario scripts, rollout logs and run
// configs; versioned CSV reports; SVG charts.
//
// Every reader throws Error(kMissingFile) for an absent file (checkpoints:
// kMissingCheckpoint), Error(kCheckpointVersion) for a format or version it
// does not understand and Error(kMalformedConfig) for bad content.

#include "lookout/diverse_sampler.hpp"
#include "lookout/forecast.hpp"
#include "lookout/metrics.hpp"
#include "lookout/scorer.hpp"
#include "lookout/sim.hpp"

#include <string>
#include <vector>

namespace lookout {

inline constexpr int kCheckpointVersion = 1;
inline constexpr int kDatasetVersion = 1;
inline constexpr int kScenarioVersion = 1;
inline constexpr int kRolloutLogVersion = 1;
inline constexpr int kRunConfigVersion = 1;
inline constexpr int kCsvVersion = 1;

std::string read_text(const std::string& path);
/// Creates parent directories. Throws Error(kIo) on failure.
void write_text(const std::string& path, const std::string& text);

// Checkpoints -----------------------------------------------------------------

void save_checkpoint(const std::string& path, const ForecastModel& model);
void save_checkpoint(const std::string& path, const DiverseSampler& sampler);
void save_checkpoint(const std::string& path, const Scorer& scorer);

ForecastModel load_forecast_model(const std::string& path);
DiverseSampler load_sampler(const std::string& path);
Scorer load_scorer(const std::string& path);

// Data and simulation files --------------------------------------------------

/// Map lanes are stored once and referenced by index from every scene.
std::string dataset_to_json(const Dataset& dataset);
Dataset dataset_from_json(const std::string& text);
void save_dataset(const std::string& path, const Dataset& dataset);
Dataset load_dataset(const std::string& path);

std::string scenario_to_json(const ScenarioScript& script);
ScenarioScript scenario_from_json(const std::string& text);

std::string rollout_log_to_json(const RolloutLog& log);
RolloutLog rollout_log_from_json(const std::string& text);

// Run configuration ----------------------------------------------------------

struct DataSettings {
  Family family = Family::kUnprotectedLeft;
  int train_count = 800;
  int test_count = 100;
  FamilyOptions options;
};

struct RunConfig {
  std::uint64_t seed = 0;
  DataSettings data;
  ForecastConfig forecast;
  ForecastTrainConfig forecast_train;
  DiverseSamplerConfig sampler;
  SamplerTrainConfig sampler_train;
  ScorerConfig scorer;
  ScorerTrainConfig scorer_train;
  std::string planner_preset = "desk";
  CampaignConfig campaign;
  AsdNormalization asd = AsdNormalization::kPrinted;
};

/// Unknown keys are rejected so typos fail loudly.
RunConfig run_config_from_json(const std::string& text);
std::string run_config_to_json(const RunConfig& config);
RunConfig load_run_config(const std::string& path);

// CSV ------------------------------------------------------------------------

/// Rows "0".."n-1" for the scenes, then "aggregate".
std::string open_loop_csv(const OpenLoopReport& report);
/// One row per actor class present.
std::string open_loop_class_csv(const OpenLoopReport& report);
/// Inverse of open_loop_csv: scenes and aggregate.
OpenLoopReport parse_open_loop_csv(const std::string& text);

std::string ablation_csv(const std::vector<AblationRow>& rows);
std::vector<AblationRow> parse_ablation_csv(const std::string& text);
/// Aligned plain-text version of the same table.
std::string ablation_table(const std::vector<AblationRow>& rows);

/// Per-action objective terms of both planners for one cost table: the
/// worst-case action cost, the expected cost-to-go, their sum, and the best
/// expected full-horizon cost over the action's contingents.
std::string action_breakdown_csv(const CostTable& table, const std::vector<double>& probabilities);

/// Subcosts of every action (contingent -1) and contingent against every
/// future of a planning problem.
std::string cost_breakdown_csv(const Scene& scene, const PlanningProblem& problem, const CostWeights& weights,
                               const CostConfig& config);

/// Header row and string cells of any CSV written here; comment lines
/// starting with '#' are skipped.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const;  // -1 if absent
};

CsvTable parse_csv(const std::string& text);

// Plots ----------------------------------------------------------------------

struct PlotPoint {
  double x = 0.0;
  double y = 0.0;
  std::string label;
};

/// Scatter chart with labelled points.
std::string svg_scatter(const std::string& title, const std::string& x_label, const std::string& y_label,
                        const std::vector<PlotPoint>& points);

}  // namespace lookout
