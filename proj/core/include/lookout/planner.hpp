#pragma once

// Expected-cost and contingency planners over a candidate set and a set of
// weighted futures. Both work on a precomputed cost table so they compare
// objectives on the same sample set.

#include "lookout/cost.hpp"
#include "lookout/future_set.hpp"
#include "lookout/traj_sampler.hpp"

#include <string>
#include <vector>

namespace lookout {

enum class PlannerKind { kContingency, kExpected };

const char* planner_name(PlannerKind kind);
PlannerKind planner_from_name(const std::string& name);

/// action[a][k] is the cost of action a against future k; contingent[a][j][k]
/// the cost of contingent j of action a against future k.
struct CostTable {
  std::vector<std::vector<double>> action;
  std::vector<std::vector<std::vector<double>>> contingent;

  std::size_t num_actions() const { return action.size(); }
  std::size_t num_futures() const { return action.empty() ? 0 : action.front().size(); }
};

CostTable build_cost_table(const std::vector<PlanCandidate>& candidates,
                           const std::vector<FutureTracks>& futures, const LaneCenterline& lane,
                           const CostWeights& weights, const CostConfig& config);

struct CostToGo {
  double cost = 0.0;
  int index = 0;
};

/// Cheapest contingent of `action` against future `k`; ties go to the lowest
/// index. Throws Error(kEmptyCandidateSet) when the action has none.
CostToGo cost_to_go(const CostTable& table, std::size_t action, std::size_t k);

struct ContingencyChoice {
  int action = 0;
  std::vector<int> contingent;  // per future
  double action_worst_cost = 0.0;
  double expected_cost_to_go = 0.0;
  double total_objective = 0.0;
};

/// argmin_a max_k c(a, Y_k) + sum_k p_k g(a, Y_k).
ContingencyChoice plan_contingent(const CostTable& table, const std::vector<double>& probabilities);

struct ExpectedChoice {
  int action = 0;
  int contingent = 0;
  double objective = 0.0;
};

/// argmin over full-horizon (action, contingent) pairs of sum_k p_k c(., Y_k).
ExpectedChoice plan_expected(const CostTable& table, const std::vector<double>& probabilities);

struct FutureContingent {
  int future = 0;
  int index = 0;
  Trajectory trajectory;
  double cost = 0.0;
};

struct PlannerOutput {
  PlannerKind kind = PlannerKind::kContingency;
  int action_index = 0;
  Trajectory chosen_action;
  std::vector<FutureContingent> per_future_contingent;
  double action_worst_cost = 0.0;
  double expected_cost_to_go = 0.0;
  double total_objective = 0.0;
};

/// Runs the selected planner. For the expected planner every future maps to
/// the single committed contingent, the worst-case term is unused and the
/// objective is stored in expected_cost_to_go and total_objective.
PlannerOutput plan(PlannerKind kind, const std::vector<PlanCandidate>& candidates,
                   const CostTable& table, const std::vector<double>& probabilities);

/// Candidates, tracks and table for one scene and future set.
struct PlanningProblem {
  std::vector<PlanCandidate> candidates;
  std::vector<FutureTracks> tracks;
  CostTable table;
};

PlanningProblem build_problem(const Scene& scene, const FutureSet& futures,
                              const SamplerConfig& sampler, const CostWeights& weights,
                              const CostConfig& config);

/// Same, starting the candidates from a known SDV Frenet state.
PlanningProblem build_problem(const Scene& scene, const FrenetState& sdv, const FutureSet& futures,
                              const SamplerConfig& sampler, const CostWeights& weights,
                              const CostConfig& config);

}  // namespace lookout
