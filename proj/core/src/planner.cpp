#include "lookout/planner.hpp"

#include "lookout/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace lookout {

const char* planner_name(PlannerKind kind) {
  return kind == PlannerKind::kContingency ? "contingency" : "expected";
}

PlannerKind planner_from_name(const std::string& name) {
  if (name == "contingency") return PlannerKind::kContingency;
  if (name == "expected") return PlannerKind::kExpected;
  throw Error(ErrorCode::kInvalidArgument, "unknown planner '" + name + "'");
}

CostTable build_cost_table(const std::vector<PlanCandidate>& candidates,
                           const std::vector<FutureTracks>& futures, const LaneCenterline& lane,
                           const CostWeights& weights, const CostConfig& config) {
  if (candidates.empty()) throw Error(ErrorCode::kEmptyCandidateSet, "no candidates to cost");
  CostTable table;
  table.action.resize(candidates.size());
  table.contingent.resize(candidates.size());
  for (std::size_t a = 0; a < candidates.size(); ++a) {
    const PlanCandidate& cand = candidates[a];
    const double action_static = static_cost(cand.action, lane, weights, config).total;
    const std::vector<BoxFrame> action_fp = sdv_frames(cand.action, config);
    table.action[a].resize(futures.size());
    for (std::size_t k = 0; k < futures.size(); ++k) {
      table.action[a][k] = action_static + dynamic_cost(cand.action, action_fp, futures[k], lane, weights, config).total;
    }
    table.contingent[a].resize(cand.contingents.size());
    for (std::size_t j = 0; j < cand.contingents.size(); ++j) {
      const Trajectory& c = cand.contingents[j];
      const double c_static = static_cost(c, lane, weights, config).total;
      const std::vector<BoxFrame> fp = sdv_frames(c, config);
      auto& row = table.contingent[a][j];
      row.resize(futures.size());
      for (std::size_t k = 0; k < futures.size(); ++k) {
        row[k] = c_static + dynamic_cost(c, fp, futures[k], lane, weights, config).total;
      }
    }
  }
  return table;
}

CostToGo cost_to_go(const CostTable& table, std::size_t action, std::size_t k) {
  const auto& rows = table.contingent.at(action);
  if (rows.empty()) throw Error(ErrorCode::kEmptyCandidateSet, "action has no contingents");
  CostToGo best{rows[0][k], 0};
  for (std::size_t j = 1; j < rows.size(); ++j) {
    if (rows[j][k] < best.cost) best = {rows[j][k], static_cast<int>(j)};
  }
  return best;
}

namespace {

void check_probabilities(const CostTable& table, const std::vector<double>& p) {
  if (table.num_actions() == 0) throw Error(ErrorCode::kEmptyCandidateSet, "empty candidate set");
  if (p.size() != table.num_futures() || p.empty()) {
    throw Error(ErrorCode::kShapeMismatch, "one probability per future required");
  }
  double sum = 0.0;
  for (double v : p) sum += v;
  if (std::abs(sum - 1.0) > 1e-6) throw Error(ErrorCode::kShapeMismatch, "probabilities must sum to 1");
}

}  // namespace

ContingencyChoice plan_contingent(const CostTable& table, const std::vector<double>& probabilities) {
  check_probabilities(table, probabilities);
  const std::size_t K = table.num_futures();
  ContingencyChoice best;
  best.total_objective = std::numeric_limits<double>::infinity();
  std::vector<int> picks(K);
  for (std::size_t a = 0; a < table.num_actions(); ++a) {
    const double worst = *std::max_element(table.action[a].begin(), table.action[a].end());
    double to_go = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      const CostToGo g = cost_to_go(table, a, k);
      to_go += probabilities[k] * g.cost;
      picks[k] = g.index;
    }
    const double objective = worst + to_go;
    if (objective < best.total_objective) {
      best.action = static_cast<int>(a);
      best.contingent = picks;
      best.action_worst_cost = worst;
      best.expected_cost_to_go = to_go;
      best.total_objective = objective;
    }
  }
  return best;
}

ExpectedChoice plan_expected(const CostTable& table, const std::vector<double>& probabilities) {
  check_probabilities(table, probabilities);
  const std::size_t K = table.num_futures();
  ExpectedChoice best;
  best.objective = std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < table.num_actions(); ++a) {
    const auto& ac = table.action[a];
    for (std::size_t j = 0; j < table.contingent[a].size(); ++j) {
      const auto& cc = table.contingent[a][j];
      double value = 0.0;
      for (std::size_t k = 0; k < K; ++k) value += probabilities[k] * (ac[k] + cc[k]);
      if (value < best.objective) best = {static_cast<int>(a), static_cast<int>(j), value};
    }
  }
  return best;
}

PlannerOutput plan(PlannerKind kind, const std::vector<PlanCandidate>& candidates,
                   const CostTable& table, const std::vector<double>& probabilities) {
  if (candidates.size() != table.num_actions()) {
    throw Error(ErrorCode::kShapeMismatch, "cost table does not match candidates");
  }
  PlannerOutput out;
  out.kind = kind;
  const std::size_t K = table.num_futures();
  if (kind == PlannerKind::kContingency) {
    const ContingencyChoice c = plan_contingent(table, probabilities);
    const PlanCandidate& cand = candidates[static_cast<std::size_t>(c.action)];
    out.action_index = c.action;
    out.chosen_action = cand.action;
    for (std::size_t k = 0; k < K; ++k) {
      const auto j = static_cast<std::size_t>(c.contingent[k]);
      out.per_future_contingent.push_back(
          {static_cast<int>(k), c.contingent[k], cand.contingents[j], table.contingent[c.action][j][k]});
    }
    out.action_worst_cost = c.action_worst_cost;
    out.expected_cost_to_go = c.expected_cost_to_go;
    out.total_objective = c.total_objective;
  } else {
    const ExpectedChoice e = plan_expected(table, probabilities);
    const PlanCandidate& cand = candidates[static_cast<std::size_t>(e.action)];
    const auto j = static_cast<std::size_t>(e.contingent);
    out.action_index = e.action;
    out.chosen_action = cand.action;
    for (std::size_t k = 0; k < K; ++k) {
      out.per_future_contingent.push_back(
          {static_cast<int>(k), e.contingent, cand.contingents[j], table.contingent[e.action][j][k]});
    }
    out.expected_cost_to_go = e.objective;
    out.total_objective = e.objective;
  }
  return out;
}

namespace {

void fill_problem(PlanningProblem& problem, const Scene& scene, const FutureSet& futures,
                  const SamplerConfig& sampler, const CostWeights& weights, const CostConfig& config) {
  const LaneCenterline& lane = scene.route_lane();
  const std::size_t steps = sampler.action_steps() + sampler.contingent_steps();
  problem.tracks.reserve(futures.futures.size());
  for (const ScenePrediction& f : futures.futures) {
    problem.tracks.push_back(build_tracks(scene, f, lane, sampler.dt, steps));
  }
  problem.table = build_cost_table(problem.candidates, problem.tracks, lane, weights, config);
}

}  // namespace

PlanningProblem build_problem(const Scene& scene, const FutureSet& futures,
                              const SamplerConfig& sampler, const CostWeights& weights,
                              const CostConfig& config) {
  PlanningProblem problem;
  const LaneCenterline& lane = scene.route_lane();
  problem.candidates = generate_candidates(scene, lane, sampler);
  fill_problem(problem, scene, futures, sampler, weights, config);
  return problem;
}

PlanningProblem build_problem(const Scene& scene, const FrenetState& sdv, const FutureSet& futures,
                              const SamplerConfig& sampler, const CostWeights& weights,
                              const CostConfig& config) {
  PlanningProblem problem;
  problem.candidates = generate_candidates(sdv, scene.route_lane(), sampler);
  fill_problem(problem, scene, futures, sampler, weights, config);
  return problem;
}

}  // namespace lookout
