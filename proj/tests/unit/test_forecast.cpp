#include "lookout/error.hpp"
#include "lookout/forecast.hpp"
#include "lookout/sim.hpp"

#include "fixtures.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <memory>
#include <random>

using namespace lookout;

namespace {

ForecastConfig small_config() {
  ForecastConfig c;
  c.latent_dim = 6;
  c.hidden = 12;
  return c;
}

Scene straight_mover(double speed, double heading) {
  Scene s;
  s.lanes = std::make_shared<const std::vector<LaneCenterline>>(
      std::vector<LaneCenterline>{LaneCenterline::straight({-100, 0}, 0.0, 300.0, 15.0)});
  s.sdv.pose = {0, 0, 0};
  ActorState a;
  a.id = 4;
  a.speed = speed;
  a.pose = {20, 1, heading};
  s.actors.push_back(a);
  std::vector<Pose2> h;
  for (int k = kHistorySteps; k >= 1; --k) {
    h.push_back({20 - speed * 0.1 * k * std::cos(heading), 1 - speed * 0.1 * k * std::sin(heading), heading});
  }
  s.history.push_back(h);
  return s;
}

}  // namespace

TEST(Forecast, ContextHistoryDeltasInActorFrame) {
  const Scene s = straight_mover(6.0, 0.7);
  const Eigen::MatrixXd x = build_contexts(s);
  ASSERT_EQ(x.rows(), 1);
  ASSERT_EQ(x.cols(), kContextDim);
  for (int k = 0; k < kHistorySteps; ++k) {
    EXPECT_NEAR(x(0, 2 * k), -0.6, 1e-9);
    EXPECT_NEAR(x(0, 2 * k + 1), 0.0, 1e-9);
  }
  EXPECT_NEAR(x(0, context_index::kSpeed), 6.0, 1e-12);
  EXPECT_DOUBLE_EQ(x(0, context_index::kClass), 1.0);
  EXPECT_NEAR(x(0, context_index::kRelX), 20.0, 1e-12);
  EXPECT_NEAR(x(0, context_index::kRelCos), std::cos(0.7), 1e-12);
  EXPECT_NEAR(x(0, context_index::kRelSin), std::sin(0.7), 1e-12);
}

TEST(Forecast, FrameConversionsInvert) {
  const Dataset d = generate_dataset(Family::kCutIn, 2, 4);
  for (const ForecastSample& s : d.samples) {
    const Eigen::MatrixXd local = to_actor_frame(s.scene, s.future);
    EXPECT_LT((to_world_frame(s.scene, local) - s.future).norm(), 1e-9);
  }
  const Scene m = straight_mover(4.0, 0.3);
  const Eigen::MatrixXd cv = constant_velocity_local(m, 3, 0.5);
  EXPECT_NEAR(cv(0, 4), 6.0, 1e-12);
  EXPECT_NEAR(cv(0, 5), 0.0, 1e-12);
}

TEST(Forecast, KlClosedFormMatchesOracle) {
  std::mt19937_64 rng(2);
  const Eigen::MatrixXd mu = fixture::gaussian(rng, 3, 5);
  const Eigen::MatrixXd ls = fixture::gaussian(rng, 3, 5, 0.5);
  double expect = 0.0;
  for (long i = 0; i < mu.size(); ++i) expect += oracle::kl_1d(mu(i), ls(i));
  EXPECT_NEAR(gaussian_kl(mu, ls), expect, 1e-12);
  nn::Tape t(false);
  EXPECT_NEAR(t.scalar_value(gaussian_kl(t, t.constant(mu), t.constant(ls))), expect, 1e-12);
  EXPECT_NEAR(gaussian_kl(Eigen::MatrixXd::Zero(2, 2), Eigen::MatrixXd::Zero(2, 2)), 0.0, 1e-15);
}

TEST(Forecast, KlMatchesMonteCarlo) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> mu_d(-2.0, 2.0), ls_d(-1.0, 1.0);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int g = 0; g < 5; ++g) {
    Eigen::MatrixXd mu(1, 16), ls(1, 16);
    for (int i = 0; i < 16; ++i) {
      mu(0, i) = mu_d(rng);
      ls(0, i) = ls_d(rng);
    }
    const double closed = gaussian_kl(mu, ls);
    double mc = 0.0;
    const int samples = 100000;
    for (int s = 0; s < samples; ++s) {
      double log_ratio = 0.0;
      for (int i = 0; i < 16; ++i) {
        const double e = n(rng);
        const double z = mu(0, i) + std::exp(ls(0, i)) * e;
        log_ratio += -ls(0, i) - 0.5 * e * e + 0.5 * z * z;
      }
      mc += log_ratio;
    }
    mc /= samples;
    EXPECT_NEAR(mc / closed, 1.0, 0.01);
  }
}

TEST(Forecast, LossGradientMatchesFiniteDifferences) {
  const Dataset d = generate_dataset(Family::kYieldOrGo, 2, 6);
  ForecastModel model = ForecastModel::create(small_config(), 3);
  std::mt19937_64 rng(4);
  fixture::jitter(model.params(), rng, 0.05);
  std::vector<PreparedScene> prepared;
  for (const ForecastSample& s : d.samples) prepared.push_back(prepare_scene(s.scene, model.config(), &s.future));
  const SceneBatch batch = SceneBatch::stack({&prepared[0], &prepared[1]});
  const Eigen::MatrixXd eps = fixture::gaussian(rng, batch.x.rows(), model.config().latent_dim);
  const fixture::GradCheck g = fixture::check_gradient(
      model.params(), [&](const nn::Binding& b) { return forecast_loss(b, model, batch, eps, 0.1, 1.0).total; }, 20, 7);
  EXPECT_EQ(g.directions, 20);
  EXPECT_LT(g.worst_relative_error, 1e-4);
}

TEST(Forecast, DecodeShapesAndPriorSampling) {
  const Dataset d = generate_dataset(Family::kUnprotectedLeft, 1, 2);
  const ForecastModel model = ForecastModel::create(small_config(), 1);
  Rng rng(5);
  const FutureSet f = forecast_prior(model, d.samples[0].scene, 4, rng);
  ASSERT_EQ(f.size(), 4);
  EXPECT_NO_THROW(f.validate());
  const int n = static_cast<int>(d.samples[0].scene.actors.size());
  for (const ScenePrediction& p : f.futures) {
    EXPECT_EQ(p.num_actors(), n);
    EXPECT_EQ(p.num_steps(), kForecastSteps);
  }
  for (double p : f.probabilities) EXPECT_DOUBLE_EQ(p, 0.25);
}

TEST(Forecast, TrainingIsSeededAndReducesLoss) {
  const Dataset d = generate_dataset(Family::kYieldOrGo, 16, 8);
  ForecastTrainConfig tc;
  tc.iterations = 150;
  tc.log_every = 50;
  tc.learning_rate = 3e-3;
  ForecastModel a = ForecastModel::create(small_config(), 1);
  ForecastModel b = ForecastModel::create(small_config(), 1);
  const TrainCurve ca = train_forecast(a, d.samples, tc, 9);
  const TrainCurve cb = train_forecast(b, d.samples, tc, 9);
  EXPECT_EQ(a.params().checksum(), b.params().checksum());
  ASSERT_EQ(ca.loss.size(), 3u);
  EXPECT_EQ(ca.loss, cb.loss);
  EXPECT_LT(ca.loss.back(), ca.loss.front());
}

TEST(Forecast, CyclicalBeta) {
  ForecastTrainConfig c;
  c.beta = 0.5;
  EXPECT_DOUBLE_EQ(beta_at(c, 123), 0.5);
  c.cyclical_beta = true;
  c.cycle_length = 100;
  EXPECT_DOUBLE_EQ(beta_at(c, 0), 0.0);
  EXPECT_NEAR(beta_at(c, 25), 0.25, 1e-12);
  EXPECT_DOUBLE_EQ(beta_at(c, 75), 0.5);
  EXPECT_DOUBLE_EQ(beta_at(c, 100), 0.0);
}

TEST(FutureSet, ValidationAndDisplacement) {
  FutureSet f;
  ScenePrediction p;
  p.xy = Eigen::MatrixXd::Zero(2, 4);
  f.futures = {p, p};
  f.probabilities = {0.7, 0.4};
  try {
    f.validate();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kShapeMismatch);
  }
  f.set_uniform();
  EXPECT_NO_THROW(f.validate());
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(2, 4), b = a;
  b(0, 0) = 3;
  b(0, 1) = 4;  // 5 m at one of four waypoints
  EXPECT_DOUBLE_EQ(mean_displacement(a, b), 5.0 / 4.0);
  EXPECT_DOUBLE_EQ(mean_displacement(Eigen::MatrixXd(0, 4), Eigen::MatrixXd(0, 4)), 0.0);
}
