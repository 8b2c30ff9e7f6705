#include "lookout/error.hpp"
#include "lookout/traj_sampler.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace lookout;

namespace {

struct Draw {
  std::mt19937_64 rng;
  explicit Draw(std::uint64_t seed) : rng(seed) {}
  double u(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
  Boundary3 b3() { return {u(-50, 50), u(-20, 20), u(-5, 5)}; }
};

}  // namespace

TEST(Polynomial, QuinticMeetsBoundaryConditions) {
  Draw d(3);
  for (int i = 0; i < 1000; ++i) {
    const Boundary3 s = d.b3(), e = d.b3();
    const double T = d.u(0.5, 6.0);
    const PolynomialProfile p = solve_quintic(s, e, T);
    ASSERT_EQ(p.coefficients.size(), 6u);
    EXPECT_NEAR(p.value(0), s.p, 1e-9);
    EXPECT_NEAR(p.first(0), s.v, 1e-9);
    EXPECT_NEAR(p.second(0), s.a, 1e-9);
    EXPECT_NEAR(p.value(T), e.p, 1e-9);
    EXPECT_NEAR(p.first(T), e.v, 1e-9);
    EXPECT_NEAR(p.second(T), e.a, 1e-9);
  }
}

TEST(Polynomial, QuarticMeetsBoundaryConditions) {
  Draw d(4);
  for (int i = 0; i < 1000; ++i) {
    const Boundary3 s = d.b3();
    const Boundary2 e{d.u(0, 20), d.u(-3, 3)};
    const double T = d.u(0.5, 6.0);
    const PolynomialProfile p = solve_quartic(s, e, T);
    ASSERT_EQ(p.coefficients.size(), 5u);
    EXPECT_NEAR(p.value(0), s.p, 1e-9);
    EXPECT_NEAR(p.first(0), s.v, 1e-9);
    EXPECT_NEAR(p.second(0), s.a, 1e-9);
    EXPECT_NEAR(p.first(T), e.v, 1e-9);
    EXPECT_NEAR(p.second(T), e.a, 1e-9);
  }
}

TEST(Polynomial, DerivativesMatchFiniteDifferences) {
  const PolynomialProfile p = solve_quintic({1, 2, -1}, {30, 5, 0.5}, 4.0);
  const double h = 1e-5;
  for (double t : {0.3, 1.7, 3.2}) {
    EXPECT_NEAR(p.first(t), (p.value(t + h) - p.value(t - h)) / (2 * h), 1e-6);
    EXPECT_NEAR(p.second(t), (p.first(t + h) - p.first(t - h)) / (2 * h), 1e-6);
    EXPECT_NEAR(p.third(t), (p.second(t + h) - p.second(t - h)) / (2 * h), 1e-6);
  }
}

TEST(Polynomial, LateralPathsAreC2AtTheJunction) {
  const LaneCenterline lane = LaneCenterline::straight({0, 0}, 0.0, 200.0, 15.0);
  SamplerConfig c = SamplerConfig::paper();
  const FrenetState sdv{10.0, 8.0, 0.0, 0.3, -0.2, 0.1};
  const auto paths = generate_lateral_paths(sdv, lane, c);
  ASSERT_EQ(paths.size(), c.lateral_mid_offsets.size() * c.lateral_end_offsets.size());
  for (const LateralPath& p : paths) {
    const double tm = p.first.duration;
    EXPECT_NEAR(p.first.value(tm), p.second.value(0), 1e-9);
    EXPECT_NEAR(p.first.first(tm), p.second.first(0), 1e-9);
    EXPECT_NEAR(p.first.second(tm), p.second.second(0), 1e-9);
    EXPECT_NEAR(p.first.value(0), sdv.d, 1e-9);
    EXPECT_NEAR(p.second.value(p.second.duration), p.end_offset, 1e-9);
    const Boundary3 at = p.eval(tm);
    EXPECT_NEAR(at.p, p.mid_offset, 1e-9);
  }
}

TEST(Polynomial, ChainedQuarticsAreC2) {
  Draw d(5);
  for (int i = 0; i < 1000; ++i) {
    const Boundary3 s{d.u(0, 50), d.u(0, 20), d.u(-3, 3)};
    const double T1 = d.u(0.5, 3.0), T2 = d.u(0.5, 3.0);
    const PolynomialProfile a = solve_quartic(s, {d.u(0, 20), 0.0}, T1);
    const Boundary3 j{a.value(T1), a.first(T1), a.second(T1)};
    const PolynomialProfile b = solve_quartic(j, {d.u(0, 20), 0.0}, T2);
    EXPECT_NEAR(b.value(0), a.value(T1), 1e-9);
    EXPECT_NEAR(b.first(0), a.first(T1), 1e-9);
    EXPECT_NEAR(b.second(0), a.second(T1), 1e-9);
  }
}

TEST(Sampling, VelocityGrid) {
  EXPECT_EQ(velocity_grid(10.0, 1), std::vector<double>{10.0});
  const auto g = velocity_grid(9.0, 4);
  ASSERT_EQ(g.size(), 4u);
  EXPECT_DOUBLE_EQ(g[0], 0.0);
  EXPECT_DOUBLE_EQ(g[1], 3.0);
  EXPECT_DOUBLE_EQ(g[3], 9.0);
  EXPECT_EQ(velocity_grid(-1.0, 3), (std::vector<double>{0.0, 0.0, 0.0}));
}

TEST(Sampling, RealizedProfileStopsInsteadOfReversing) {
  const PolynomialProfile p = solve_quartic({0.0, 3.0, 0.0}, {0.0, 0.0}, 1.0);
  // Hard braking target in a short window would overshoot into reverse.
  const PolynomialProfile hard = solve_quartic({0.0, 3.0, -6.0}, {0.0, 0.0}, 2.0);
  for (const PolynomialProfile* prof : {&p, &hard}) {
    const auto xs = realize_longitudinal(*prof, 40, 0.1);
    ASSERT_EQ(xs.size(), 41u);
    for (std::size_t i = 1; i < xs.size(); ++i) {
      EXPECT_GE(xs[i].v, 0.0);
      EXPECT_GE(xs[i].s, xs[i - 1].s - 1e-12);
    }
  }
}

TEST(Sampling, ContingentProfilesStartAtTheActionEnd) {
  SamplerConfig c = SamplerConfig::desk();
  const LongitudinalSample start{12.0, 6.0, 0.5};
  const auto profiles = contingent_profiles(start, 12.0, c);
  ASSERT_EQ(profiles.size(), static_cast<std::size_t>(c.contingent_mid_velocity_count * c.contingent_end_velocity_count));
  for (const ContingentProfile& p : profiles) {
    ASSERT_EQ(p.samples.size(), c.contingent_steps() + 1);
    EXPECT_DOUBLE_EQ(p.samples.front().s, start.s);
    EXPECT_DOUBLE_EQ(p.samples.front().v, start.v);
    EXPECT_DOUBLE_EQ(p.samples.front().a, start.a);
    const std::size_t half = c.contingent_steps() / 2;
    EXPECT_NEAR(p.samples[half].v, p.mid_velocity, 1e-9);
    EXPECT_NEAR(p.samples.back().v, p.end_velocity, 1e-9);
  }
}

TEST(Sampling, CandidatesShapeAndContinuity) {
  const LaneCenterline lane = LaneCenterline::straight({0, 0}, 0.3, 300.0, 12.0);
  const SamplerConfig c = SamplerConfig::desk();
  FrenetState sdv;
  sdv.s = 20.0;
  sdv.s_dot = 7.0;
  const auto cands = generate_candidates(sdv, lane, c);
  EXPECT_EQ(cands.size(), c.lateral_mid_offsets.size() * c.lateral_end_offsets.size() *
                              static_cast<std::size_t>(c.action_velocity_count));
  for (const PlanCandidate& cand : cands) {
    ASSERT_EQ(cand.action.size(), c.action_steps() + 1);
    EXPECT_NEAR((cand.action.waypoints.front() - lane.to_cartesian(20.0, 0.0)).norm(), 0.0, 1e-9);
    ASSERT_FALSE(cand.contingents.empty());
    for (const Trajectory& t : cand.contingents) {
      ASSERT_EQ(t.size(), c.contingent_steps() + 1);
      EXPECT_NEAR(t.t0, c.action_horizon, 1e-12);
      EXPECT_NEAR((t.waypoints.front() - cand.action.waypoints.back()).norm(), 0.0, 1e-9);
    }
    const Trajectory full = concatenate(cand.action, cand.contingents.front());
    EXPECT_EQ(full.size(), c.action_steps() + c.contingent_steps() + 1);
    EXPECT_NEAR(full.end_time(), c.horizon, 1e-9);
  }
}

TEST(Sampling, ConfigValidation) {
  SamplerConfig c = SamplerConfig::desk();
  EXPECT_NO_THROW(c.validate());
  c.action_horizon = 6.0;
  try {
    c.validate();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kMalformedConfig);
  }
  EXPECT_EQ(SamplerConfig::from_preset("paper").action_velocity_count, 16);
  EXPECT_THROW(SamplerConfig::from_preset("huge"), Error);
}

TEST(Sampling, NothingFitsOnAShortLane) {
  const LaneCenterline lane = LaneCenterline::straight({0, 0}, 0.0, 10.0, 12.0);
  FrenetState sdv;
  sdv.s = 9.5;
  sdv.s_dot = 10.0;
  try {
    generate_candidates(sdv, lane, SamplerConfig::desk());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEmptyCandidateSet);
  }
}
