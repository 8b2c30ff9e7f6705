#include "lookout/diverse_sampler.hpp"
#include "lookout/error.hpp"
#include "lookout/sim.hpp"

#include "fixtures.hpp"
#include "reinforce_toy.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace lookout;
using namespace reinforce;

namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;

}  // namespace

TEST(Sampler, PlanningEnergyWorkedExample) {
  // K = 2, log p = -1 for both heads, plan distance 2:
  // (1/2) * [-(-1 - 1) * 2 + -(-1 - 1) * 2] = 4.
  Eigen::MatrixXd d(2, 2);
  d << 0, 2, 2, 0;
  EXPECT_DOUBLE_EQ(energy_planning({-1.0, -1.0}, d), 4.0);
  EXPECT_DOUBLE_EQ(planning_reward(d), 2.0);
  EXPECT_DOUBLE_EQ(mean_pairwise(d), 2.0);
}

TEST(Sampler, CoefficientsAreTheLogDensityGradient) {
  std::mt19937_64 rng(1);
  Eigen::MatrixXd d = fixture::gaussian(rng, 4, 4).cwiseAbs();
  d.diagonal().setZero();
  const std::vector<double> lp{-1.0, -2.5, 0.3, -0.7};
  const Eigen::VectorXd c = reinforce_coefficients(d, 0.4);
  for (int i = 0; i < 4; ++i) {
    auto up = lp, dn = lp;
    up[static_cast<std::size_t>(i)] += 1e-6;
    dn[static_cast<std::size_t>(i)] -= 1e-6;
    const double fd = (energy_planning(up, d, 0.4) - energy_planning(dn, d, 0.4)) / 2e-6;
    EXPECT_NEAR(fd, -c(i) / 12.0, 1e-8);
  }
}

TEST(Sampler, LeaveOneOutBaselinesByHand) {
  Eigen::MatrixXd d(3, 3);
  d << 0, 1, 2,
       1, 0, 4,
       2, 4, 0;
  const Eigen::VectorXd b = leave_one_out_baselines(d);
  EXPECT_DOUBLE_EQ(b(0), 4.0);
  EXPECT_DOUBLE_EQ(b(1), 2.0);
  EXPECT_DOUBLE_EQ(b(2), 1.0);
  const Eigen::VectorXd c = reinforce_coefficients(d, b);
  EXPECT_DOUBLE_EQ(c(0), 2 * (1 - 4) + 2 * (2 - 4));
  EXPECT_EQ(leave_one_out_baselines(Eigen::MatrixXd::Ones(2, 2)), Eigen::VectorXd::Zero(2));
}

TEST(Sampler, FreshHeadsSitAtThePrior) {
  DiverseSamplerConfig sc;
  sc.k = 3;
  sc.latent_dim = 4;
  sc.hidden = 8;
  const DiverseSampler s = DiverseSampler::create(sc, 5);
  ForecastConfig fc;
  fc.latent_dim = 4;
  fc.hidden = 8;
  const Dataset data = generate_dataset(Family::kCutIn, 1, 3);
  const PreparedScene p = prepare_scene(data.samples[0].scene, fc);
  const LatentMaps m = s.maps(p);
  EXPECT_EQ(m.b.cols(), 12);
  EXPECT_DOUBLE_EQ(m.b.norm(), 0.0);
  EXPECT_DOUBLE_EQ(m.log_a.norm(), 0.0);
  EXPECT_DOUBLE_EQ(kl_to_prior(m), 0.0);
  const ForecastModel decoder = ForecastModel::create(fc, 1);
  const FutureSet f = infer_diverse(s, decoder, data.samples[0].scene);
  ASSERT_EQ(f.size(), 3);
  EXPECT_LT((f.futures[0].xy - f.futures[2].xy).norm(), 1e-12);
}

TEST(Sampler, AffineMapsAndDensity) {
  std::mt19937_64 rng(6);
  LatentMaps m;
  m.b = fixture::gaussian(rng, 2, 6);
  m.log_a = fixture::gaussian(rng, 2, 6, 0.3);
  const Eigen::MatrixXd eps = fixture::gaussian(rng, 2, 3);
  const auto z = map_latents(m, eps, 3);
  ASSERT_EQ(z.size(), 2u);
  for (int k = 0; k < 2; ++k) {
    for (int r = 0; r < 2; ++r)
      for (int c = 0; c < 3; ++c)
        EXPECT_NEAR(z[k](r, c), m.b(r, 3 * k + c) + std::exp(m.log_a(r, 3 * k + c)) * eps(r, c), 1e-12);
    double lp = 0.0;
    for (int r = 0; r < 2; ++r)
      for (int c = 0; c < 3; ++c) {
        const double s = std::exp(m.log_a(r, 3 * k + c));
        const double u = (z[k](r, c) - m.b(r, 3 * k + c)) / s;
        lp += -0.5 * u * u - std::log(s) - kHalfLog2Pi;
      }
    EXPECT_NEAR(log_density(z[k], m.mean(k, 3), m.log_scale(k, 3)), lp, 1e-10);
  }
  EXPECT_THROW(map_latents_per_head(m, {eps}, 3), Error);
}

TEST(Sampler, GeneralEnergyAndReconstruction) {
  ScenePrediction a, b;
  a.xy = Eigen::MatrixXd::Zero(1, 4);
  b.xy = a.xy;
  b.xy(0, 0) = 4.0;  // 2 m mean displacement
  EXPECT_DOUBLE_EQ(energy_general({a, a}, 10.0), 1.0);
  EXPECT_NEAR(energy_general({a, b}, 2.0), std::exp(-1.0), 1e-12);
  EXPECT_DOUBLE_EQ(energy_general({a}, 2.0), 0.0);
  EXPECT_DOUBLE_EQ(energy_reconstruction({b, a}, a.xy), 0.0);
}

TEST(Sampler, PlanMatrixReadsActionThenContingent) {
  std::vector<Vec2> act, cont;
  for (int i = 0; i <= 10; ++i) act.emplace_back(0.1 * i, 0.0);
  for (int i = 0; i <= 40; ++i) cont.emplace_back(1.0 + 0.2 * i, 1.0);
  const Eigen::MatrixXd m = plan_matrix(make_trajectory(0, 0.1, act), make_trajectory(1.0, 0.1, cont));
  ASSERT_EQ(m.cols(), 2 * kForecastSteps);
  EXPECT_NEAR(m(0, 0), 0.5, 1e-12);
  EXPECT_NEAR(m(0, 2), 1.0, 1e-12);
  EXPECT_NEAR(m(0, 4), 2.0, 1e-12);
  EXPECT_NEAR(m(0, 5), 1.0, 1e-12);
  const Eigen::MatrixXd d = plan_distances({m, m, m * 2.0});
  EXPECT_DOUBLE_EQ(d(0, 1), 0.0);
  EXPECT_DOUBLE_EQ(d(0, 2), d(2, 0));
}

TEST(Sampler, SurrogateGradientMatchesFiniteDifferences) {
  Toy toy(4, 3, 3);
  SamplerObjective obj;
  obj.w_reconstruction = 1.0;
  obj.w_general = 1.0;
  obj.beta = 1.0;
  obj.sigma_d = 5.0;
  std::mt19937_64 rng(8);
  const Eigen::MatrixXd eps = fixture::gaussian(rng, toy.prepared.num_actors(), 3);
  const fixture::GradCheck g = fixture::check_gradient(toy.sampler.params(), [&](const nn::Binding& b) {
    return sampler_loss(b, toy.sampler, toy.decoder, toy.prepared, eps, nullptr, obj).total;
  }, 20, 9);
  EXPECT_LT(g.worst_relative_error, 1e-4);
}

TEST(Sampler, ScoreFunctionGradientIsUnbiased) {
  Toy toy(3, 2, 1);
  const Eigen::VectorXd v = head_bias_direction(toy.sampler, 11);
  const Estimate truth = oracle_derivative(toy, v, 10000, 21);
  for (bool baseline : {false, true}) {
    const Estimate est = score_function_derivative(toy, v, 10000, 22, baseline);
    const double se = std::hypot(truth.se, est.se);
    EXPECT_LT(std::abs(est.mean - truth.mean), 3.0 * se)
        << "baseline " << baseline << ": " << est.mean << " vs " << truth.mean << " (se " << se << ")";
    EXPECT_GT(std::abs(truth.mean), 3.0 * se);  // the comparison has power
  }
}

TEST(Sampler, SameDrawBaselineShrinksTheGradient) {
  // The draw's own mean includes head i's pairs, so E[gradient] is scaled by
  // 1 - 2/K; at K = 3 that is a third of the true derivative.
  Toy toy(3, 2, 1);
  const Eigen::VectorXd v = head_bias_direction(toy.sampler, 11);
  const Estimate truth = oracle_derivative(toy, v, 10000, 21);
  const Estimate est = score_function_derivative(toy, v, 10000, 22, false, true);
  const double se = std::hypot(truth.se, est.se);
  EXPECT_GT(std::abs(est.mean - truth.mean), 3.0 * se);
  EXPECT_LT(std::abs(est.mean - truth.mean / 3.0), 3.0 * std::hypot(truth.se / 3.0, est.se));
}

TEST(Sampler, TrainingIsSeededAndLeavesDecoder) {
  Toy toy(3, 4, 3);
  ForecastConfig fc;
  fc.latent_dim = 4;
  fc.hidden = 8;
  const ForecastModel decoder = ForecastModel::create(fc, 1);
  const Dataset data = generate_dataset(Family::kUnprotectedLeft, 4, 10);
  SamplerTrainConfig tc;
  tc.iterations = 6;
  tc.log_every = 3;
  DiverseSamplerConfig sc;
  sc.k = 3;
  sc.latent_dim = 4;
  sc.hidden = 8;
  DiverseSampler a = DiverseSampler::create(sc, 1), b = DiverseSampler::create(sc, 1);
  const std::uint64_t before = decoder.params().checksum();
  const SamplerCurve ca = train_sampler(a, decoder, data.samples, PlanningSetup{}, tc, 4);
  const SamplerCurve cb = train_sampler(b, decoder, data.samples, PlanningSetup{}, tc, 4);
  EXPECT_EQ(decoder.params().checksum(), before);
  EXPECT_EQ(a.params().checksum(), b.params().checksum());
  EXPECT_EQ(ca.loss, cb.loss);
  EXPECT_EQ(ca.iteration, (std::vector<int>{3, 6}));
}
