#include "lookout/forecast.hpp"

#include "lookout/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace lookout {

using nn::Binding;
using nn::Matrix;
using nn::Tape;
using nn::Var;

Eigen::MatrixXd build_contexts(const Scene& scene) {
  namespace ci = context_index;
  const auto n = static_cast<Eigen::Index>(scene.actors.size());
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(n, kContextDim);
  for (Eigen::Index i = 0; i < n; ++i) {
    const ActorState& a = scene.actors[static_cast<std::size_t>(i)];
    // Sequence ending at the current pose; short histories repeat the oldest pose.
    std::vector<Vec2> seq;
    const std::vector<Pose2>* hist =
        static_cast<std::size_t>(i) < scene.history.size() ? &scene.history[static_cast<std::size_t>(i)] : nullptr;
    const std::size_t have = hist ? hist->size() : 0;
    for (int k = kHistorySteps; k >= 1; --k) {
      const std::size_t back = static_cast<std::size_t>(k);
      if (back <= have) {
        seq.push_back((*hist)[have - back].position());
      } else {
        seq.push_back(have > 0 ? hist->front().position() : a.pose.position());
      }
    }
    seq.push_back(a.pose.position());
    const double c = std::cos(a.pose.heading);
    const double s = std::sin(a.pose.heading);
    for (int k = 1; k <= kHistorySteps; ++k) {
      const Vec2 d = seq[seq.size() - 1 - static_cast<std::size_t>(k)] - seq[seq.size() - static_cast<std::size_t>(k)];
      x(i, ci::kDeltas + 2 * (k - 1)) = c * d.x() + s * d.y();
      x(i, ci::kDeltas + 2 * (k - 1) + 1) = -s * d.x() + c * d.y();
    }
    x(i, ci::kSpeed) = a.speed;
    x(i, ci::kClass + static_cast<int>(a.cls)) = 1.0;

    if (scene.lanes) {
      double best = std::numeric_limits<double>::infinity();
      for (const LaneCenterline& lane : *scene.lanes) {
        const auto p = lane.project(a.pose.position(), 10.0);
        if (!p || std::abs(p->d) >= best) continue;
        best = std::abs(p->d);
        x(i, ci::kLaneOffset) = p->d;
        x(i, ci::kLaneHeading) = normalize_angle(a.pose.heading - p->heading);
        x(i, ci::kLaneRemaining) = lane.length() - p->s;
      }
    }
    const Vec2 rel = world_to_local(scene.sdv.pose, a.pose.position());
    const double dh = a.pose.heading - scene.sdv.pose.heading;
    x(i, ci::kRelX) = rel.x();
    x(i, ci::kRelY) = rel.y();
    x(i, ci::kRelCos) = std::cos(dh);
    x(i, ci::kRelSin) = std::sin(dh);
  }
  return x;
}

Eigen::RowVectorXd context_scale() {
  namespace ci = context_index;
  Eigen::RowVectorXd s = Eigen::RowVectorXd::Ones(kContextDim);
  s.segment(ci::kDeltas, 2 * kHistorySteps).setConstant(2.0);
  s(ci::kSpeed) = 10.0;
  s(ci::kLaneOffset) = 2.0;
  s(ci::kLaneRemaining) = 50.0;
  s(ci::kRelX) = 30.0;
  s(ci::kRelY) = 30.0;
  return s;
}

Eigen::MatrixXd to_actor_frame(const Scene& scene, const Eigen::MatrixXd& world) {
  Eigen::MatrixXd out(world.rows(), world.cols());
  for (Eigen::Index i = 0; i < world.rows(); ++i) {
    const Pose2& p = scene.actors[static_cast<std::size_t>(i)].pose;
    for (Eigen::Index t = 0; t < world.cols() / 2; ++t) {
      const Vec2 l = world_to_local(p, Vec2(world(i, 2 * t), world(i, 2 * t + 1)));
      out(i, 2 * t) = l.x();
      out(i, 2 * t + 1) = l.y();
    }
  }
  return out;
}

Eigen::MatrixXd to_world_frame(const Scene& scene, const Eigen::MatrixXd& local) {
  Eigen::MatrixXd out(local.rows(), local.cols());
  for (Eigen::Index i = 0; i < local.rows(); ++i) {
    const Pose2& p = scene.actors[static_cast<std::size_t>(i % static_cast<Eigen::Index>(scene.actors.size()))].pose;
    for (Eigen::Index t = 0; t < local.cols() / 2; ++t) {
      const Vec2 w = local_to_world(p, Vec2(local(i, 2 * t), local(i, 2 * t + 1)));
      out(i, 2 * t) = w.x();
      out(i, 2 * t + 1) = w.y();
    }
  }
  return out;
}

Eigen::MatrixXd constant_velocity_local(const Scene& scene, int steps, double dt) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(scene.actors.size()), 2 * steps);
  for (std::size_t i = 0; i < scene.actors.size(); ++i) {
    for (int t = 0; t < steps; ++t) out(static_cast<Eigen::Index>(i), 2 * t) = scene.actors[i].speed * dt * (t + 1);
  }
  return out;
}

PreparedScene prepare_scene(const Scene& scene, const ForecastConfig& config,
                            const Eigen::MatrixXd* future_world) {
  PreparedScene p;
  const Eigen::MatrixXd raw = build_contexts(scene);
  p.x = raw.array().rowwise() / context_scale().array();
  for (const ActorState& a : scene.actors) p.poses.push_back(a.pose);
  p.cv_local = constant_velocity_local(scene, config.steps, config.dt);
  if (future_world) {
    if (future_world->rows() != p.x.rows() || future_world->cols() != 2 * config.steps) {
      throw Error(ErrorCode::kShapeMismatch, "ground-truth future has the wrong shape");
    }
    p.y_local = to_actor_frame(scene, *future_world);
  }
  return p;
}

SceneBatch SceneBatch::stack(const std::vector<const PreparedScene*>& scenes) {
  SceneBatch b;
  int rows = 0;
  for (const PreparedScene* s : scenes) {
    b.offsets.push_back(rows);
    rows += s->num_actors();
  }
  b.offsets.push_back(rows);
  if (scenes.empty()) return b;
  const Eigen::Index cols = scenes.front()->cv_local.cols();
  const bool with_gt = std::all_of(scenes.begin(), scenes.end(), [](const PreparedScene* s) { return s->y_local.size() > 0; });
  b.x.resize(rows, kContextDim);
  b.cv_local.resize(rows, cols);
  if (with_gt) b.y_local.resize(rows, cols);
  std::vector<Pose2> poses;
  std::vector<int> block;
  for (std::size_t k = 0; k < scenes.size(); ++k) {
    const PreparedScene& s = *scenes[k];
    const int at = b.offsets[k];
    b.x.middleRows(at, s.num_actors()) = s.x;
    b.cv_local.middleRows(at, s.num_actors()) = s.cv_local;
    if (with_gt) b.y_local.middleRows(at, s.num_actors()) = s.y_local;
    poses.insert(poses.end(), s.poses.begin(), s.poses.end());
    block.insert(block.end(), s.poses.size(), static_cast<int>(k));
  }
  b.graph = nn::Graph::build(poses, block);
  return b;
}

SceneBatch SceneBatch::replicate(const PreparedScene& scene, int copies) {
  std::vector<const PreparedScene*> all(static_cast<std::size_t>(copies), &scene);
  return stack(all);
}

ForecastModel ForecastModel::create(const ForecastConfig& config, std::uint64_t seed) {
  ForecastModel m;
  m.config_ = config;
  Rng rng = make_rng(seed, "forecast.init");
  const int T2 = 2 * config.steps;
  nn::SimConfig enc{kContextDim + T2, config.hidden, config.latent_dim, 3, 2};
  m.encoder_mu_ = nn::SceneInteraction::create(m.params_, "encoder_mu", enc, rng);
  m.encoder_log_sigma_ = nn::SceneInteraction::create(m.params_, "encoder_log_sigma", enc, rng);
  nn::SimConfig dec{kContextDim + config.latent_dim, config.hidden, T2, 3, 2};
  m.decoder_ = nn::SceneInteraction::create(m.params_, "decoder", dec, rng);
  return m;
}

GaussianVars ForecastModel::encode(const Binding& b, const SceneBatch& batch) const {
  if (batch.y_local.rows() != batch.x.rows()) throw Error(ErrorCode::kShapeMismatch, "encoder needs ground truth");
  Tape& t = b.tape;
  const Var in = t.constant((Matrix(batch.x.rows(), batch.x.cols() + batch.y_local.cols())
                                 << batch.x, batch.y_local / config_.residual_scale)
                                .finished());
  GaussianVars g;
  g.mu = encoder_mu_.forward(b, in, batch.graph);
  g.log_sigma = t.clamp(encoder_log_sigma_.forward(b, in, batch.graph), config_.log_sigma_min, config_.log_sigma_max);
  return g;
}

Var ForecastModel::decode_local(const Binding& b, const SceneBatch& batch, Var z) const {
  Tape& t = b.tape;
  if (t.value(z).rows() != batch.x.rows() || t.value(z).cols() != config_.latent_dim) {
    throw Error(ErrorCode::kShapeMismatch, "latent shape does not match the batch");
  }
  const Var in = t.concat_cols({t.constant(batch.x), z});
  const Var residual = decoder_.forward(b, in, batch.graph);
  return t.add(t.constant(batch.cv_local), t.scale(residual, config_.residual_scale));
}

std::vector<ScenePrediction> ForecastModel::decode(const Scene& scene, const PreparedScene& prepared,
                                                   const std::vector<Eigen::MatrixXd>& latents) const {
  const int n = prepared.num_actors();
  const int k = static_cast<int>(latents.size());
  std::vector<ScenePrediction> out;
  if (k == 0) return out;
  if (n == 0) {
    out.assign(static_cast<std::size_t>(k), ScenePrediction{config_.dt, Eigen::MatrixXd(0, 2 * config_.steps)});
    return out;
  }
  Matrix z(static_cast<Eigen::Index>(n) * k, config_.latent_dim);
  for (int i = 0; i < k; ++i) {
    const Eigen::MatrixXd& l = latents[static_cast<std::size_t>(i)];
    if (l.rows() != n || l.cols() != config_.latent_dim) throw Error(ErrorCode::kShapeMismatch, "latent has the wrong shape");
    z.middleRows(static_cast<Eigen::Index>(i) * n, n) = l;
  }
  const SceneBatch batch = SceneBatch::replicate(prepared, k);
  Tape tape(false);
  const Binding b = Binding::frozen(tape, params_);
  const Matrix local = tape.value(decode_local(b, batch, tape.constant(std::move(z))));
  for (int i = 0; i < k; ++i) {
    out.push_back(ScenePrediction{
        config_.dt, to_world_frame(scene, local.middleRows(static_cast<Eigen::Index>(i) * n, n))});
  }
  return out;
}

std::vector<Eigen::MatrixXd> sample_prior(int num_actors, int latent_dim, int k, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Eigen::MatrixXd> out;
  for (int i = 0; i < k; ++i) {
    Eigen::MatrixXd z(num_actors, latent_dim);
    for (Eigen::Index j = 0; j < z.size(); ++j) z(j) = normal(rng);
    out.push_back(std::move(z));
  }
  return out;
}

FutureSet forecast_prior(const ForecastModel& model, const Scene& scene, int k, Rng& rng) {
  const PreparedScene prepared = prepare_scene(scene, model.config());
  FutureSet set;
  set.latents = sample_prior(prepared.num_actors(), model.config().latent_dim, k, rng);
  set.futures = model.decode(scene, prepared, set.latents);
  set.set_uniform();
  return set;
}

double gaussian_kl(const Eigen::MatrixXd& mu, const Eigen::MatrixXd& log_sigma) {
  const Eigen::ArrayXXd var = (2.0 * log_sigma.array()).exp();
  return 0.5 * (mu.array().square() + var - 1.0 - 2.0 * log_sigma.array()).sum();
}

Var gaussian_kl(Tape& t, Var mu, Var log_sigma) {
  // 0.5 * sum(mu^2 + exp(2 log_sigma) - 1 - 2 log_sigma)
  const Var terms = t.sub(t.add(t.square(mu), t.exp(t.scale(log_sigma, 2.0))), t.scale(log_sigma, 2.0));
  return t.scale(t.add_scalar(t.sum(terms), -static_cast<double>(t.value(mu).size())), 0.5);
}

double beta_at(const ForecastTrainConfig& config, int iteration) {
  if (!config.cyclical_beta || config.cycle_length <= 1) return config.beta;
  const double phase = static_cast<double>(iteration % config.cycle_length) / config.cycle_length;
  return config.beta * std::min(1.0, 2.0 * phase);
}

ForecastLoss forecast_loss(const Binding& b, const ForecastModel& model, const SceneBatch& batch,
                           const Eigen::MatrixXd& eps, double beta, double huber_delta) {
  Tape& t = b.tape;
  const GaussianVars g = model.encode(b, batch);
  if (eps.rows() != t.value(g.mu).rows() || eps.cols() != t.value(g.mu).cols()) {
    throw Error(ErrorCode::kShapeMismatch, "posterior noise has the wrong shape");
  }
  const Var z = t.add(g.mu, t.cmul(t.exp(g.log_sigma), t.constant(eps)));
  const Var pred = model.decode_local(b, batch, z);
  const double nt = static_cast<double>(batch.x.rows()) * model.config().steps;
  const Var recon = t.scale(t.sum(t.huber(t.sub(pred, t.constant(batch.y_local)), huber_delta)), 1.0 / nt);
  const double scenes = static_cast<double>(std::max<std::size_t>(1, batch.offsets.size() - 1));
  const Var kl = t.scale(gaussian_kl(t, g.mu, g.log_sigma), 1.0 / scenes);
  return {t.add(recon, t.scale(kl, beta)), recon, kl};
}

TrainCurve train_forecast(ForecastModel& model, const std::vector<ForecastSample>& data,
                          const ForecastTrainConfig& config, std::uint64_t seed,
                          const std::function<void(int, double)>& progress) {
  if (data.empty()) throw Error(ErrorCode::kInvalidArgument, "empty training set");
  std::vector<PreparedScene> prepared;
  prepared.reserve(data.size());
  for (const ForecastSample& s : data) prepared.push_back(prepare_scene(s.scene, model.config(), &s.future));

  Rng rng = make_rng(seed, "forecast.train");
  std::uniform_int_distribution<std::size_t> pick(0, data.size() - 1);
  std::normal_distribution<double> normal(0.0, 1.0);
  nn::Adam adam({config.learning_rate});
  model.params().zero_grad();
  TrainCurve curve;
  double acc_loss = 0.0, acc_recon = 0.0, acc_kl = 0.0;
  int acc_n = 0;
  for (int it = 0; it < config.iterations; ++it) {
    std::vector<const PreparedScene*> chosen;
    for (int i = 0; i < config.batch_size; ++i) chosen.push_back(&prepared[pick(rng)]);
    const SceneBatch batch = SceneBatch::stack(chosen);
    Eigen::MatrixXd eps(batch.x.rows(), model.config().latent_dim);
    for (Eigen::Index j = 0; j < eps.size(); ++j) eps(j) = normal(rng);

    Tape tape(true);
    const Binding b = Binding::train(tape, model.params());
    const ForecastLoss loss = forecast_loss(b, model, batch, eps, beta_at(config, it), config.huber_delta);
    const double value = tape.scalar_value(loss.total);
    if (!std::isfinite(value)) {
      throw Error(ErrorCode::kNonFiniteLoss, "forecast loss became non-finite at iteration " + std::to_string(it));
    }
    tape.backward(loss.total);
    adam.step(model.params());
    acc_loss += value;
    acc_recon += tape.scalar_value(loss.reconstruction);
    acc_kl += tape.scalar_value(loss.kl);
    ++acc_n;
    if ((it + 1) % std::max(1, config.log_every) == 0 || it + 1 == config.iterations) {
      curve.iteration.push_back(it + 1);
      curve.loss.push_back(acc_loss / acc_n);
      curve.reconstruction.push_back(acc_recon / acc_n);
      curve.kl.push_back(acc_kl / acc_n);
      if (progress) progress(it + 1, acc_loss / acc_n);
      acc_loss = acc_recon = acc_kl = 0.0;
      acc_n = 0;
    }
  }
  return curve;
}

}  // namespace lookout
