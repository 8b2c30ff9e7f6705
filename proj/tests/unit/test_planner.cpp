#include "lookout/error.hpp"
#include "lookout/planner.hpp"
#include "lookout/sim.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace lookout;

TEST(Planner, MatchesExhaustiveEnumeration) {
  std::mt19937_64 rng(1234);
  int joint = 0;
  for (int i = 0; i < 200; ++i) {
    const oracle::Instance inst = oracle::random_instance(rng, i % 2 == 0);
    const std::size_t K = inst.probabilities.size();
    const bool small = oracle::product_size(inst.table, K) <= 2e5;
    joint += small;
    const oracle::ContingencyAnswer want =
        small ? oracle::enumerate_contingency(inst.table, inst.probabilities)
              : oracle::enumerate_contingency_separable(inst.table, inst.probabilities);
    const ContingencyChoice got = plan_contingent(inst.table, inst.probabilities);
    ASSERT_EQ(got.action, want.action) << "instance " << i;
    ASSERT_EQ(got.contingent, want.contingent) << "instance " << i;
    EXPECT_NEAR(got.total_objective, want.objective, 1e-9);

    const oracle::ExpectedAnswer we = oracle::enumerate_expected(inst.table, inst.probabilities);
    const ExpectedChoice ge = plan_expected(inst.table, inst.probabilities);
    ASSERT_EQ(ge.action, we.action) << "instance " << i;
    ASSERT_EQ(ge.contingent, we.contingent) << "instance " << i;
    EXPECT_NEAR(ge.objective, we.objective, 1e-9);
  }
  EXPECT_GT(joint, 20);
}

TEST(Planner, SeparableOracleAgreesWithJointOracle) {
  std::mt19937_64 rng(99);
  for (int i = 0; i < 200; ++i) {
    const oracle::Instance inst = oracle::random_instance(rng, i % 2 == 0, 8, 6, 4);
    const auto a = oracle::enumerate_contingency(inst.table, inst.probabilities);
    const auto b = oracle::enumerate_contingency_separable(inst.table, inst.probabilities);
    ASSERT_EQ(a.action, b.action);
    ASSERT_EQ(a.contingent, b.contingent);
  }
}

TEST(Planner, HandWorkedHedge) {
  // Two futures at 50/50. Action 0 is cheap under future 0 only; action 1 is
  // moderate under both. Action 1 has a contingent that is cheap in each
  // future; the expected planner must commit to one contingent.
  CostTable t;
  t.action = {{0.0, 10.0}, {2.0, 2.0}};
  t.contingent = {{{0.0, 20.0}, {20.0, 0.0}}, {{1.0, 9.0}, {9.0, 1.0}}};
  const std::vector<double> p{0.5, 0.5};
  const ContingencyChoice c = plan_contingent(t, p);
  // a0: 10 + 0.5*0 + 0.5*0 = 10; a1: 2 + 0.5*1 + 0.5*1 = 3.
  EXPECT_EQ(c.action, 1);
  EXPECT_EQ(c.contingent, (std::vector<int>{0, 1}));
  EXPECT_DOUBLE_EQ(c.total_objective, 3.0);
  EXPECT_DOUBLE_EQ(c.action_worst_cost, 2.0);
  const ExpectedChoice e = plan_expected(t, p);
  // a0 j0: 0.5*0 + 0.5*30 = 15; a0 j1: 0.5*20 + 0.5*10 = 15; a1 j0: 0.5*3 + 0.5*11 = 7.
  EXPECT_EQ(e.action, 1);
  EXPECT_EQ(e.contingent, 0);
  EXPECT_DOUBLE_EQ(e.objective, 7.0);
  EXPECT_EQ(cost_to_go(t, 1, 1).index, 1);
}

TEST(Planner, TiesGoToLowestIndex) {
  CostTable t;
  t.action = {{1.0}, {1.0}};
  t.contingent = {{{2.0}, {2.0}}, {{2.0}, {1.0}}};
  EXPECT_EQ(plan_contingent(t, {1.0}).action, 1);
  t.contingent[1][1][0] = 2.0;
  const ContingencyChoice c = plan_contingent(t, {1.0});
  EXPECT_EQ(c.action, 0);
  EXPECT_EQ(c.contingent[0], 0);
}

TEST(Planner, RejectsBadInputs) {
  CostTable t;
  try {
    plan_contingent(t, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEmptyCandidateSet);
  }
  t.action = {{1.0, 2.0}};
  t.contingent = {{{1.0, 1.0}}};
  try {
    plan_expected(t, {0.3, 0.3});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kShapeMismatch);
  }
  EXPECT_THROW(plan_contingent(t, {1.0}), Error);
}

TEST(Planner, IdenticalFuturesCollapseBothPlanners) {
  const Dataset data = generate_dataset(Family::kUnprotectedLeft, 6, 5);
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.1, 1.0);
  for (const ForecastSample& s : data.samples) {
    FutureSet f;
    ScenePrediction p;
    p.xy = s.future;
    f.futures.assign(4, p);
    double sum = 0.0;
    for (int k = 0; k < 4; ++k) {
      f.probabilities.push_back(u(rng));
      sum += f.probabilities.back();
    }
    for (double& v : f.probabilities) v /= sum;
    const PlanningProblem prob = build_problem(s.scene, f, SamplerConfig::desk(), CostWeights(), CostConfig());
    const PlannerOutput c = plan(PlannerKind::kContingency, prob.candidates, prob.table, f.probabilities);
    const PlannerOutput e = plan(PlannerKind::kExpected, prob.candidates, prob.table, f.probabilities);
    EXPECT_NEAR(c.total_objective, e.total_objective, 1e-9 * std::max(1.0, std::abs(c.total_objective)));
    EXPECT_EQ(c.action_index, e.action_index);
  }
}

TEST(Planner, ExpectedPlannerCommitsOneContingent) {
  const Dataset data = generate_dataset(Family::kCutIn, 1, 3);
  FutureSet f;
  ScenePrediction p;
  p.xy = data.samples[0].future;
  f.futures = {p, p, p};
  f.futures[2].xy.array() += 2.0;
  f.set_uniform();
  const PlanningProblem prob = build_problem(data.samples[0].scene, f, SamplerConfig::desk(), CostWeights(), CostConfig());
  const PlannerOutput e = plan(PlannerKind::kExpected, prob.candidates, prob.table, f.probabilities);
  ASSERT_EQ(e.per_future_contingent.size(), 3u);
  for (const FutureContingent& fc : e.per_future_contingent) EXPECT_EQ(fc.index, e.per_future_contingent[0].index);
  EXPECT_EQ(planner_from_name(planner_name(PlannerKind::kExpected)), PlannerKind::kExpected);
}
