#include "lookout/cost.hpp"
#include "lookout/error.hpp"
#include "lookout/planner.hpp"
#include "lookout/sim.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <memory>

using namespace lookout;

namespace {

// Straight route along +x, SDV at the origin, one static actor.
Scene one_actor_scene(Vec2 actor_xy, double actor_heading = 0.0) {
  Scene scene;
  scene.lanes = std::make_shared<const std::vector<LaneCenterline>>(
      std::vector<LaneCenterline>{LaneCenterline::straight({-20, 0}, 0.0, 200.0, 10.0)});
  scene.sdv.pose = {0, 0, 0};
  scene.sdv.speed = 5.0;
  ActorState a;
  a.id = 1;
  a.pose = {actor_xy.x(), actor_xy.y(), actor_heading};
  a.length = 4.0;
  a.width = 2.0;
  scene.actors.push_back(a);
  scene.history.push_back(std::vector<Pose2>(10, a.pose));
  return scene;
}

Trajectory cruise(double v, double d, int samples = 11) {
  std::vector<Vec2> wp;
  for (int i = 0; i < samples; ++i) wp.emplace_back(v * 0.1 * i, d);
  return make_trajectory(0.0, 0.1, wp);
}

}  // namespace

TEST(Cost, TrafficRulesAndProgressByHand) {
  const Scene scene = one_actor_scene({100, 30});
  const Trajectory t = cruise(5.0, 0.5);
  const CostConfig cfg;
  const TrafficRuleTerms r = traffic_rule_costs(t, scene.route_lane(), cfg);
  EXPECT_NEAR(r.lane_offset, 10 * 0.5, 1e-9);
  EXPECT_NEAR(r.road_boundary, 0.0, 1e-12);
  EXPECT_NEAR(r.speed_limit, 0.0, 1e-12);
  const ComfortTerms c = comfort_and_progress(t, scene.route_lane(), cfg);
  EXPECT_NEAR(c.progress, -5.0, 1e-9);
  EXPECT_NEAR(c.jerk, 0.0, 1e-9);
  EXPECT_NEAR(c.accel, 0.0, 1e-9);
  EXPECT_NEAR(c.lat_accel, 0.0, 1e-9);

  const Trajectory fast = cruise(12.0, 1.5);
  const TrafficRuleTerms rf = traffic_rule_costs(fast, scene.route_lane(), cfg);
  EXPECT_NEAR(rf.road_boundary, 10 * (1.5 + 1.0 - 1.75), 1e-9);
  EXPECT_NEAR(rf.speed_limit, 10 * 2.0, 1e-9);
}

TEST(Cost, CollisionCountsOverlappingSteps) {
  // Actor centred at x = 4: the SDV box (5 m long) overlaps it while its
  // centre is within 4.5 m, i.e. for every x in [0, 5] of this path.
  const Scene scene = one_actor_scene({4.0, 0.0});
  const Trajectory t = cruise(5.0, 0.0);
  const CostConfig cfg;
  const FutureTracks tracks = static_tracks(scene, scene.route_lane(), 0.1, 50);
  const CollisionTerms c = collision_cost(t, tracks, cfg);
  EXPECT_NEAR(c.collision, 10 * cfg.collision_penalty[0], 1e-6);
  EXPECT_NEAR(c.proximity, 10 * 25.0, 1e-9);
}

TEST(Cost, ProximityOfAParallelActor) {
  // Side by side with a 1 m gap at every step.
  const Scene scene = one_actor_scene({2.5, 3.0});
  std::vector<Vec2> wp(11, Vec2(2.5, 0.0));
  Trajectory t = make_trajectory(0.0, 0.1, wp);
  t.speed.assign(11, 4.0);  // pretend it moves so the v^2 factor is visible
  const CostConfig cfg;
  const FutureTracks tracks = static_tracks(scene, scene.route_lane(), 0.1, 50);
  const CollisionTerms c = collision_cost(t, tracks, cfg);
  EXPECT_NEAR(c.collision, 0.0, 1e-12);
  EXPECT_NEAR(c.proximity, 10 * 16.0 * (1.0 - 1.0 / 3.0), 1e-9);
}

TEST(Cost, HeadwayViolationByHand) {
  const Scene scene = one_actor_scene({14.0, 0.0});
  const Trajectory t = cruise(5.0, 0.0);
  const CostConfig cfg;
  const FutureTracks tracks = static_tracks(scene, scene.route_lane(), 0.1, 50);
  const double d_safe = 5.0 * cfg.reaction_time + 25.0 / (2 * cfg.comfort_decel);
  double expect = 0.0;
  for (int i = 1; i <= 10; ++i) {
    const double gap = 14.0 - 0.5 * i - 0.5 * (cfg.sdv_length + 4.0);
    expect += std::pow(std::max(0.0, d_safe - gap), 2);
  }
  EXPECT_GT(expect, 0.0);
  EXPECT_NEAR(headway_cost(t, tracks, scene.route_lane(), cfg), expect, 1e-9);
}

TEST(Cost, TotalIsStaticPlusDynamic) {
  const Scene scene = one_actor_scene({9.0, 1.0}, 0.2);
  const Trajectory t = cruise(6.0, 0.3, 21);
  const CostWeights w;
  const CostConfig cfg;
  const FutureTracks tracks = static_tracks(scene, scene.route_lane(), 0.1, 50);
  const CostBreakdown s = static_cost(t, scene.route_lane(), w, cfg);
  const CostBreakdown d = dynamic_cost(t, tracks, scene.route_lane(), w, cfg);
  const CostBreakdown all = total_cost(t, tracks, scene.route_lane(), w, cfg);
  EXPECT_NEAR(all.total, s.total + d.total, 1e-9 * std::max(1.0, std::abs(all.total)));
  double manual = 0.0;
  for (int i = 0; i < kNumSubcosts; ++i) manual += w[i] * all[i];
  EXPECT_NEAR(all.total, manual, 1e-9 * std::max(1.0, std::abs(manual)));
}

TEST(Cost, ResamplingKeepsPerStepTotals) {
  const Scene scene = one_actor_scene({100, 30});
  const CostConfig cfg;
  std::vector<Vec2> coarse, fine;
  for (int i = 0; i <= 10; ++i) coarse.emplace_back(0.8 * i, 0.4);
  for (int i = 0; i <= 20; ++i) fine.emplace_back(0.4 * i, 0.4);
  const auto a = traffic_rule_costs(make_trajectory(0, 0.1, coarse), scene.route_lane(), cfg);
  const auto b = traffic_rule_costs(make_trajectory(0, 0.05, fine), scene.route_lane(), cfg);
  EXPECT_NEAR(a.lane_offset, b.lane_offset, 1e-9);
}

TEST(Cost, WeightsValidate) {
  CostWeights w;
  EXPECT_NO_THROW(w.validate());
  w[kJerk] = -1.0;
  EXPECT_THROW(w.validate(), Error);
  EXPECT_STREQ(subcost_name(kCollision), "collision");
  const CostWeights d = CostWeights().scaled(2.0);
  EXPECT_DOUBLE_EQ(d[kProgress], 2.0 * CostWeights()[kProgress]);
}

TEST(Cost, TracksAlignToPlannerGrid) {
  const Scene scene = one_actor_scene({10.0, 0.0});
  const FutureTracks tracks = static_tracks(scene, scene.route_lane(), 0.1, 50);
  EXPECT_EQ(tracks.index_of(0.3), 3u);
  EXPECT_THROW(tracks.index_of(0.35), Error);
  EXPECT_THROW(tracks.index_of(9.0), Error);

  ScenePrediction p;
  p.xy.resize(1, 2 * kForecastSteps);
  for (int t = 0; t < kForecastSteps; ++t) {
    p.xy(0, 2 * t) = 10.0 + 2.0 * (t + 1);  // 4 m/s along x
    p.xy(0, 2 * t + 1) = 0.0;
  }
  const FutureTracks moving = build_tracks(scene, p, scene.route_lane(), 0.1, 50);
  EXPECT_NEAR(moving.actors[0].boxes[0].center.x(), 10.0, 1e-12);
  EXPECT_NEAR(moving.actors[0].boxes[1].center.x(), 10.4, 1e-12);
  EXPECT_NEAR(moving.actors[0].boxes[25].center.x(), 20.0, 1e-12);
  EXPECT_NEAR(moving.actors[0].station[25] - moving.actors[0].station[0], 10.0, 1e-9);
}

TEST(Cost, TableEntriesMatchDirectEvaluation) {
  const Dataset data = generate_dataset(Family::kYieldOrGo, 3, 21);
  const CostWeights w;
  const CostConfig cfg;
  for (const ForecastSample& s : data.samples) {
    FutureSet f;
    ScenePrediction p;
    p.xy = s.future;
    f.futures = {p, p};
    f.futures[1].xy.array() += 1.5;
    f.set_uniform();
    const PlanningProblem prob = build_problem(s.scene, f, SamplerConfig::desk(), w, cfg);
    const LaneCenterline& lane = s.scene.route_lane();
    for (std::size_t a = 0; a < prob.candidates.size(); a += 7) {
      for (std::size_t k = 0; k < 2; ++k) {
        const double direct = total_cost(prob.candidates[a].action, prob.tracks[k], lane, w, cfg).total;
        EXPECT_NEAR(prob.table.action[a][k], direct, 1e-9 * std::max(1.0, std::abs(direct)));
        const std::size_t j = prob.candidates[a].contingents.size() / 2;
        const double dj = total_cost(prob.candidates[a].contingents[j], prob.tracks[k], lane, w, cfg).total;
        EXPECT_NEAR(prob.table.contingent[a][j][k], dj, 1e-9 * std::max(1.0, std::abs(dj)));
      }
    }
  }
}
