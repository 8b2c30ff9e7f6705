#include "lookout/scorer.hpp"

#include "lookout/error.hpp"
#include "lookout/nn/adam.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace lookout {

using nn::Binding;
using nn::Matrix;
using nn::Tape;
using nn::Var;

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
  if (logits.size() == 0) return logits;
  const Eigen::ArrayXd e = (logits.array() - logits.maxCoeff()).exp();
  return (e / e.sum()).matrix();
}

Eigen::VectorXd target_distribution(const std::vector<ScenePrediction>& futures, const Eigen::MatrixXd& truth,
                                    double alpha) {
  if (!(alpha > 0.0)) throw Error(ErrorCode::kInvalidArgument, "alpha must be positive");
  Eigen::VectorXd l(static_cast<Eigen::Index>(futures.size()));
  for (std::size_t k = 0; k < futures.size(); ++k) {
    l(static_cast<Eigen::Index>(k)) = -alpha * mean_displacement(futures[k].xy, truth);
  }
  return softmax(l);
}

double kl_divergence(const Eigen::VectorXd& p, const Eigen::VectorXd& q, double floor) {
  if (p.size() != q.size()) throw Error(ErrorCode::kShapeMismatch, "distributions differ in size");
  double sum = 0.0;
  for (Eigen::Index k = 0; k < p.size(); ++k) {
    if (p(k) > 0.0) sum += p(k) * (std::log(p(k)) - std::log(std::max(q(k), floor)));
  }
  return sum;
}

ScorerInput make_scorer_input(const Scene& scene, const PreparedScene& prepared,
                              const std::vector<ScenePrediction>& futures, double trajectory_scale) {
  ScorerInput in;
  in.k = static_cast<int>(futures.size());
  in.num_actors = prepared.num_actors();
  if (in.k == 0) throw Error(ErrorCode::kShapeMismatch, "no futures to score");
  const int n = in.num_actors;
  const Eigen::Index t2 = futures.front().xy.cols();
  std::vector<Eigen::MatrixXd> local;
  Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(n, t2);
  for (const ScenePrediction& f : futures) {
    if (f.xy.rows() != n || f.xy.cols() != t2) throw Error(ErrorCode::kShapeMismatch, "future has the wrong shape");
    local.push_back(to_actor_frame(scene, f.xy) / trajectory_scale);
    mean += local.back();
  }
  mean /= static_cast<double>(in.k);
  in.nodes.resize(static_cast<Eigen::Index>(n) * in.k, kContextDim + 2 * t2);
  for (int k = 0; k < in.k; ++k) {
    auto rows = in.nodes.middleRows(static_cast<Eigen::Index>(k) * n, n);
    rows.leftCols(kContextDim) = prepared.x;
    rows.middleCols(kContextDim, t2) = local[static_cast<std::size_t>(k)];
    rows.rightCols(t2) = mean;
    in.poses.insert(in.poses.end(), prepared.poses.begin(), prepared.poses.end());
  }
  return in;
}

Scorer Scorer::create(const ScorerConfig& config, std::uint64_t seed) {
  if (config.k < 1) throw Error(ErrorCode::kInvalidArgument, "scorer needs k >= 1");
  Scorer s;
  s.config_ = config;
  Rng rng = make_rng(seed, "scorer.init");
  const nn::SimConfig sim{kContextDim + 4 * kForecastSteps, config.hidden, config.hidden, 3, 2};
  s.node_ = nn::SceneInteraction::create(s.params_, "scorer_node", sim, rng);
  s.head_ = nn::Mlp::create(s.params_, "scorer_head", {config.hidden, config.hidden, 1}, rng);
  return s;
}

Var Scorer::logits(const Binding& bind, const std::vector<const ScorerInput*>& inputs) const {
  Tape& t = bind.tape;
  if (inputs.empty()) throw Error(ErrorCode::kShapeMismatch, "empty scorer batch");
  const int k = inputs.front()->k;
  Eigen::Index rows = 0;
  for (const ScorerInput* in : inputs) {
    if (in->k != k) throw Error(ErrorCode::kShapeMismatch, "scenes in a batch must share K");
    if (in->num_actors == 0) throw Error(ErrorCode::kShapeMismatch, "scene without actors");
    rows += in->nodes.rows();
  }
  Matrix nodes(rows, inputs.front()->nodes.cols());
  std::vector<Pose2> poses;
  std::vector<int> block;
  Eigen::Index at = 0;
  int next_block = 0;
  for (const ScorerInput* in : inputs) {
    nodes.middleRows(at, in->nodes.rows()) = in->nodes;
    at += in->nodes.rows();
    poses.insert(poses.end(), in->poses.begin(), in->poses.end());
    for (int f = 0; f < k; ++f) {
      block.insert(block.end(), static_cast<std::size_t>(in->num_actors), next_block++);
    }
  }
  const nn::Graph graph = nn::Graph::build(poses, block);
  const Var h = node_.forward(bind, t.constant(std::move(nodes)), graph);
  const Var pooled = t.segment_mean(t.tanh(h), block, next_block);
  const Var l = head_.forward(bind, pooled);
  return t.reshape(l, static_cast<int>(inputs.size()), k);
}

Eigen::VectorXd Scorer::score(const Scene& scene, const PreparedScene& prepared,
                              const std::vector<ScenePrediction>& futures) const {
  const auto k = static_cast<Eigen::Index>(futures.size());
  if (k == 0) return Eigen::VectorXd();
  if (prepared.num_actors() == 0) return Eigen::VectorXd::Constant(k, 1.0 / static_cast<double>(k));
  const ScorerInput in = make_scorer_input(scene, prepared, futures, config_.trajectory_scale);
  Tape tape(false);
  const Matrix l = tape.value(logits(Binding::frozen(tape, params_), {&in}));
  return softmax(l.row(0).transpose());
}

void Scorer::score(const Scene& scene, FutureSet& futures, const ForecastConfig& forecast) const {
  const PreparedScene prepared = prepare_scene(scene, forecast);
  const Eigen::VectorXd p = score(scene, prepared, futures.futures);
  futures.probabilities.assign(p.data(), p.data() + p.size());
}

Var scorer_loss(const Binding& bind, const Scorer& scorer, const std::vector<const ScorerInput*>& inputs,
                const Eigen::MatrixXd& targets, bool reverse) {
  Tape& t = bind.tape;
  const Var logp = t.log_softmax_rows(scorer.logits(bind, inputs));
  if (targets.rows() != t.value(logp).rows() || targets.cols() != t.value(logp).cols()) {
    throw Error(ErrorCode::kShapeMismatch, "targets must be scenes x K");
  }
  const Matrix logq = targets.array().max(1e-12).log().matrix();
  const double scenes = static_cast<double>(targets.rows());
  if (reverse) {
    // sum q (log q - log p)
    const Var diff = t.sub(t.constant(logq), logp);
    return t.scale(t.sum(t.cmul(t.constant(targets), diff)), 1.0 / scenes);
  }
  const Var diff = t.sub(logp, t.constant(logq));
  return t.scale(t.sum(t.cmul(t.exp(logp), diff)), 1.0 / scenes);
}

ScorerCurve train_scorer(Scorer& scorer, const DiverseSampler& sampler, const ForecastModel& decoder,
                         const std::vector<ForecastSample>& data, const ScorerTrainConfig& config,
                         std::uint64_t seed, const std::function<void(int, double)>& progress) {
  if (scorer.config().k != sampler.config().k) {
    throw Error(ErrorCode::kShapeMismatch, "scorer k differs from the sampler's k");
  }
  std::vector<ScorerInput> inputs;
  std::vector<Eigen::VectorXd> targets;
  for (const ForecastSample& s : data) {
    if (s.scene.actors.empty()) continue;
    const PreparedScene prepared = prepare_scene(s.scene, decoder.config());
    const FutureSet set = infer_diverse(sampler, decoder, s.scene);
    inputs.push_back(make_scorer_input(s.scene, prepared, set.futures, scorer.config().trajectory_scale));
    targets.push_back(target_distribution(set.futures, s.future, scorer.config().alpha));
  }
  if (inputs.empty()) throw Error(ErrorCode::kInvalidArgument, "empty training set");

  Rng rng = make_rng(seed, "scorer.train");
  std::uniform_int_distribution<std::size_t> pick(0, inputs.size() - 1);
  nn::Adam adam({config.learning_rate});
  scorer.params().zero_grad();
  ScorerCurve curve;
  double acc = 0.0;
  int acc_n = 0;
  const int k = inputs.front().k;
  for (int it = 0; it < config.iterations; ++it) {
    std::vector<const ScorerInput*> batch;
    Eigen::MatrixXd q(config.batch_size, k);
    for (int i = 0; i < config.batch_size; ++i) {
      const std::size_t idx = pick(rng);
      batch.push_back(&inputs[idx]);
      q.row(i) = targets[idx].transpose();
    }
    Tape tape(true);
    const Var loss = scorer_loss(Binding::train(tape, scorer.params()), scorer, batch, q, config.reverse_kl);
    const double value = tape.scalar_value(loss);
    if (!std::isfinite(value)) {
      throw Error(ErrorCode::kNonFiniteLoss, "scorer loss became non-finite at iteration " + std::to_string(it));
    }
    tape.backward(loss);
    adam.step(scorer.params());
    acc += value;
    ++acc_n;
    if ((it + 1) % std::max(1, config.log_every) == 0 || it + 1 == config.iterations) {
      curve.iteration.push_back(it + 1);
      curve.loss.push_back(acc / acc_n);
      if (progress) progress(it + 1, acc / acc_n);
      acc = 0.0;
      acc_n = 0;
    }
  }
  return curve;
}

}  // namespace lookout
