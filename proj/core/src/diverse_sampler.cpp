#include "lookout/diverse_sampler.hpp"

#include "lookout/error.hpp"

#include "lookout/nn/adam.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace lookout {

using nn::Binding;
using nn::Matrix;
using nn::Tape;
using nn::Var;

namespace {
constexpr double kHalfLog2Pi = 0.91893853320467274178;
}

DiverseSampler DiverseSampler::create(const DiverseSamplerConfig& config, std::uint64_t seed) {
  if (config.k < 1 || config.latent_dim < 1) throw Error(ErrorCode::kInvalidArgument, "sampler needs k >= 1 and latent_dim >= 1");
  DiverseSampler s;
  s.config_ = config;
  Rng rng = make_rng(seed, "sampler.init");
  const nn::SimConfig sim{kContextDim, config.hidden, config.k * config.latent_dim, 3, 2};
  s.a_net_ = nn::SceneInteraction::create(s.params_, "sampler_a", sim, rng, true);
  s.b_net_ = nn::SceneInteraction::create(s.params_, "sampler_b", sim, rng, true);
  if (config.head_offset_init > 0.0) {
    // The output bias is the last parameter registered.
    std::normal_distribution<double> offset(0.0, config.head_offset_init);
    nn::Matrix& bias = s.params_[s.params_.size() - 1].value;
    for (Eigen::Index i = 0; i < bias.size(); ++i) bias(i) = offset(rng);
  }
  return s;
}

DiverseSampler::HeadVars DiverseSampler::heads(const Binding& bind, const SceneBatch& batch) const {
  Tape& t = bind.tape;
  const Var x = t.constant(batch.x);
  HeadVars h;
  h.log_a = t.clamp(a_net_.forward(bind, x, batch.graph), config_.log_a_min, config_.log_a_max);
  h.b = b_net_.forward(bind, x, batch.graph);
  return h;
}

LatentMaps DiverseSampler::maps(const PreparedScene& scene) const {
  LatentMaps m;
  const int width = config_.k * config_.latent_dim;
  if (scene.num_actors() == 0) {
    m.log_a.resize(0, width);
    m.b.resize(0, width);
    return m;
  }
  Tape tape(false);
  const SceneBatch batch = SceneBatch::stack({&scene});
  const HeadVars h = heads(Binding::frozen(tape, params_), batch);
  m.log_a = tape.value(h.log_a);
  m.b = tape.value(h.b);
  return m;
}

std::vector<Eigen::MatrixXd> map_latents(const LatentMaps& maps, const Eigen::MatrixXd& eps, int latent_dim) {
  if (eps.rows() != maps.b.rows() || eps.cols() != latent_dim) {
    throw Error(ErrorCode::kShapeMismatch, "shared noise must be N x L");
  }
  std::vector<Eigen::MatrixXd> out;
  const int k = maps.k(latent_dim);
  for (int i = 0; i < k; ++i) {
    out.push_back(maps.mean(i, latent_dim).array() +
                  maps.log_scale(i, latent_dim).array().exp() * eps.array());
  }
  return out;
}

FutureSet infer_diverse(const DiverseSampler& sampler, const ForecastModel& decoder, const Scene& scene) {
  if (sampler.config().latent_dim != decoder.config().latent_dim) {
    throw Error(ErrorCode::kShapeMismatch, "sampler and decoder latent sizes differ");
  }
  const PreparedScene prepared = prepare_scene(scene, decoder.config());
  const LatentMaps m = sampler.maps(prepared);
  FutureSet set;
  set.latents = map_latents(m, Eigen::MatrixXd::Zero(prepared.num_actors(), sampler.config().latent_dim),
                            sampler.config().latent_dim);
  set.futures = decoder.decode(scene, prepared, set.latents);
  set.set_uniform();
  return set;
}

double log_density(const Eigen::MatrixXd& z, const Eigen::MatrixXd& mean, const Eigen::MatrixXd& log_scale) {
  const Eigen::ArrayXXd u = (z - mean).array() * (-log_scale.array()).exp();
  return -0.5 * u.square().sum() - log_scale.sum() - kHalfLog2Pi * static_cast<double>(z.size());
}

double energy_reconstruction(const std::vector<ScenePrediction>& futures, const Eigen::MatrixXd& truth) {
  if (futures.empty()) throw Error(ErrorCode::kShapeMismatch, "no futures");
  double best = std::numeric_limits<double>::infinity();
  for (const ScenePrediction& f : futures) best = std::min(best, mean_displacement(f.xy, truth));
  return best;
}

Eigen::MatrixXd plan_matrix(const Trajectory& action, const Trajectory& contingent, double dt, int steps) {
  Eigen::MatrixXd out(1, 2 * steps);
  const double t0 = action.t0;
  for (int i = 0; i < steps; ++i) {
    const double t = t0 + dt * (i + 1);
    const Trajectory& src = t <= action.end_time() + 1e-9 ? action : contingent;
    const double u = (t - src.t0) / src.dt;
    const auto lo = static_cast<std::size_t>(std::clamp(std::floor(u + 1e-9), 0.0, static_cast<double>(src.size() - 1)));
    const std::size_t hi = std::min(lo + 1, src.size() - 1);
    const double w = std::clamp(u - static_cast<double>(lo), 0.0, 1.0);
    const Vec2 p = (1.0 - w) * src.waypoints[lo] + w * src.waypoints[hi];
    out(0, 2 * i) = p.x();
    out(0, 2 * i + 1) = p.y();
  }
  return out;
}

Eigen::MatrixXd plan_distances(const std::vector<Eigen::MatrixXd>& plans) {
  const auto k = static_cast<Eigen::Index>(plans.size());
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(k, k);
  for (Eigen::Index i = 0; i < k; ++i) {
    for (Eigen::Index j = i + 1; j < k; ++j) {
      d(i, j) = d(j, i) = mean_displacement(plans[static_cast<std::size_t>(i)], plans[static_cast<std::size_t>(j)]);
    }
  }
  return d;
}

double planning_reward(const Eigen::MatrixXd& distances) {
  const Eigen::Index k = distances.rows();
  if (k == 0) return 0.0;
  double sum = 0.0;
  for (Eigen::Index i = 0; i < k; ++i) {
    for (Eigen::Index j = 0; j < k; ++j) {
      if (i != j) sum += distances(i, j);
    }
  }
  return sum / static_cast<double>(k);
}

Eigen::VectorXd reinforce_coefficients(const Eigen::MatrixXd& distances, double baseline) {
  const Eigen::Index k = distances.rows();
  if (distances.cols() != k) throw Error(ErrorCode::kShapeMismatch, "distance matrix must be K x K");
  Eigen::VectorXd c = Eigen::VectorXd::Zero(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    for (Eigen::Index j = 0; j < k; ++j) {
      if (j != i) c(i) += (distances(i, j) - baseline) + (distances(j, i) - baseline);
    }
  }
  return c;
}

Eigen::VectorXd reinforce_coefficients(const Eigen::MatrixXd& distances, const Eigen::VectorXd& baselines) {
  const Eigen::Index k = distances.rows();
  if (distances.cols() != k || baselines.size() != k) throw Error(ErrorCode::kShapeMismatch, "distance matrix must be K x K");
  Eigen::VectorXd c = Eigen::VectorXd::Zero(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    for (Eigen::Index j = 0; j < k; ++j) {
      if (j != i) c(i) += (distances(i, j) - baselines(i)) + (distances(j, i) - baselines(i));
    }
  }
  return c;
}

Eigen::VectorXd leave_one_out_baselines(const Eigen::MatrixXd& distances) {
  const Eigen::Index k = distances.rows();
  if (distances.cols() != k) throw Error(ErrorCode::kShapeMismatch, "distance matrix must be K x K");
  Eigen::VectorXd b = Eigen::VectorXd::Zero(k);
  if (k < 3) return b;
  for (Eigen::Index i = 0; i < k; ++i) {
    double sum = 0.0;
    for (Eigen::Index p = 0; p < k; ++p) {
      for (Eigen::Index q = 0; q < k; ++q) {
        if (p != q && p != i && q != i) sum += distances(p, q);
      }
    }
    b(i) = sum / static_cast<double>((k - 1) * (k - 2));
  }
  return b;
}

double mean_pairwise(const Eigen::MatrixXd& distances) {
  const Eigen::Index k = distances.rows();
  if (k < 2) return 0.0;
  return (distances.sum() - distances.diagonal().sum()) / static_cast<double>(k * (k - 1));
}

double energy_planning(const std::vector<double>& log_p, const Eigen::MatrixXd& distances, double baseline) {
  const auto k = static_cast<Eigen::Index>(log_p.size());
  if (distances.rows() != k || distances.cols() != k) throw Error(ErrorCode::kShapeMismatch, "distance matrix must be K x K");
  if (k < 2) return 0.0;
  double sum = 0.0;
  for (Eigen::Index i = 0; i < k; ++i) {
    for (Eigen::Index j = 0; j < k; ++j) {
      if (i == j) continue;
      sum += -(log_p[static_cast<std::size_t>(i)] + log_p[static_cast<std::size_t>(j)]) * (distances(i, j) - baseline);
    }
  }
  return sum / static_cast<double>(k * (k - 1));
}

double energy_general(const std::vector<ScenePrediction>& futures, double sigma_d) {
  const std::size_t k = futures.size();
  if (k < 2) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      if (i != j) sum += std::exp(-mean_displacement(futures[i].xy, futures[j].xy) / sigma_d);
    }
  }
  return sum / static_cast<double>(k * (k - 1));
}

double kl_to_prior(const LatentMaps& maps) { return gaussian_kl(maps.b, maps.log_a); }

SamplerLossVars sampler_loss(const Binding& bind, const DiverseSampler& sampler, const ForecastModel& decoder,
                             const PreparedScene& scene, const Eigen::MatrixXd& eps,
                             const Eigen::MatrixXd* distances, const SamplerObjective& objective,
                             const Eigen::VectorXd* head_offsets, const std::vector<Eigen::MatrixXd>* planning_eps) {
  Tape& t = bind.tape;
  const int K = sampler.config().k;
  const int L = sampler.config().latent_dim;
  const int N = scene.num_actors();
  if (eps.rows() != N || eps.cols() != L) throw Error(ErrorCode::kShapeMismatch, "shared noise must be N x L");
  if (scene.y_local.rows() != N) throw Error(ErrorCode::kShapeMismatch, "sampler loss needs ground truth");

  const SceneBatch single = SceneBatch::stack({&scene});
  const DiverseSampler::HeadVars h = sampler.heads(bind, single);
  const Var e = t.constant(eps);
  std::vector<Var> zs;
  std::vector<Var> mean_k;
  std::vector<Var> log_a_k;
  for (int k = 0; k < K; ++k) {
    mean_k.push_back(t.slice_cols(h.b, k * L, L));
    log_a_k.push_back(t.slice_cols(h.log_a, k * L, L));
    zs.push_back(t.add(mean_k.back(), t.cmul(t.exp(log_a_k.back()), e)));
  }
  const SceneBatch batch = SceneBatch::replicate(scene, K);
  const Binding frozen = Binding::frozen(t, decoder.params());
  const Var pred = decoder.decode_local(frozen, batch, t.concat_rows(zs));
  std::vector<Var> pred_k;
  for (int k = 0; k < K; ++k) pred_k.push_back(t.slice_rows(pred, k * N, N));

  SamplerLossVars out;
  const Var gt = t.constant(scene.y_local);
  std::vector<Var> recon;
  for (int k = 0; k < K; ++k) recon.push_back(t.mean(t.pair_norms(t.sub(pred_k[static_cast<std::size_t>(k)], gt), objective.norm_eps)));
  out.e_r = t.min_of(recon);

  if (K >= 2) {
    std::vector<Var> pair_terms;
    for (int i = 0; i < K; ++i) {
      for (int j = i + 1; j < K; ++j) {
        const Var d = t.mean(t.pair_norms(t.sub(pred_k[static_cast<std::size_t>(i)], pred_k[static_cast<std::size_t>(j)]), objective.norm_eps));
        pair_terms.push_back(t.exp(t.scale(d, -1.0 / objective.sigma_d)));
      }
    }
    out.e_d = t.scale(t.sum(t.concat_rows(pair_terms)), 2.0 / (static_cast<double>(K) * (K - 1)));
  } else {
    out.e_d = t.scalar(0.0);
  }

  out.kl = gaussian_kl(t, h.b, h.log_a);

  if (distances && K >= 2) {
    if (distances->rows() != K || distances->cols() != K) throw Error(ErrorCode::kShapeMismatch, "distance matrix must be K x K");
    if (head_offsets && head_offsets->size() != K) throw Error(ErrorCode::kShapeMismatch, "head offsets must have K entries");
    if (planning_eps) {
      if (static_cast<int>(planning_eps->size()) != K) throw Error(ErrorCode::kShapeMismatch, "need one planning noise per head");
      for (const Eigen::MatrixXd& pe : *planning_eps) {
        if (pe.rows() != N || pe.cols() != L) throw Error(ErrorCode::kShapeMismatch, "planning noise must be N x L");
      }
    }
    Eigen::VectorXd coef = objective.baseline ? reinforce_coefficients(*distances, leave_one_out_baselines(*distances))
                                              : reinforce_coefficients(*distances, 0.0);
    if (head_offsets) coef -= *head_offsets;
    std::vector<Var> weighted;
    for (int i = 0; i < K; ++i) {
      const double c = coef(i);
      // log p(Z_i) with Z_i held fixed at its sampled value.
      const Var z_fixed =
          planning_eps ? t.stop_gradient(t.add(mean_k[static_cast<std::size_t>(i)],
                                               t.cmul(t.exp(log_a_k[static_cast<std::size_t>(i)]),
                                                      t.constant((*planning_eps)[static_cast<std::size_t>(i)]))))
                       : t.stop_gradient(zs[static_cast<std::size_t>(i)]);
      const Var u = t.cmul(t.sub(z_fixed, mean_k[static_cast<std::size_t>(i)]), t.exp(t.scale(log_a_k[static_cast<std::size_t>(i)], -1.0)));
      const Var lp = t.add_scalar(t.sub(t.scale(t.sum(t.square(u)), -0.5), t.sum(log_a_k[static_cast<std::size_t>(i)])),
                                  -kHalfLog2Pi * static_cast<double>(N * L));
      weighted.push_back(t.scale(lp, -c));
    }
    out.e_p = t.scale(t.sum(t.concat_rows(weighted)), 1.0 / (static_cast<double>(K) * (K - 1)));
  } else {
    out.e_p = t.scalar(0.0);
  }

  Var total = t.add(t.scale(out.e_r, objective.w_reconstruction), t.scale(out.e_d, objective.w_general));
  total = t.add(total, t.scale(out.kl, objective.beta));
  if (distances) total = t.add(total, t.scale(out.e_p, objective.w_planning));
  out.total = total;
  return out;
}

std::vector<Eigen::MatrixXd> map_latents_per_head(const LatentMaps& maps, const std::vector<Eigen::MatrixXd>& eps,
                                                  int latent_dim) {
  const int K = maps.k(latent_dim);
  if (static_cast<int>(eps.size()) != K) throw Error(ErrorCode::kShapeMismatch, "need one noise per head");
  std::vector<Eigen::MatrixXd> out;
  out.reserve(eps.size());
  for (int k = 0; k < K; ++k) {
    const Eigen::MatrixXd& e = eps[static_cast<std::size_t>(k)];
    if (e.rows() != maps.b.rows() || e.cols() != latent_dim) throw Error(ErrorCode::kShapeMismatch, "noise must be N x L");
    out.push_back(maps.mean(k, latent_dim) + (maps.log_scale(k, latent_dim).array().exp() * e.array()).matrix());
  }
  return out;
}

std::vector<Eigen::MatrixXd> plans_for(const Scene& scene, const FutureSet& futures, const PlanningSetup& setup) {
  const PlanningProblem problem = build_problem(scene, futures, setup.sampler, setup.weights, setup.cost);
  const PlannerOutput out = plan(setup.planner, problem.candidates, problem.table, futures.probabilities);
  std::vector<Eigen::MatrixXd> plans;
  for (const FutureContingent& fc : out.per_future_contingent) {
    plans.push_back(plan_matrix(out.chosen_action, fc.trajectory));
  }
  return plans;
}

SamplerCurve train_sampler(DiverseSampler& sampler, const ForecastModel& decoder,
                           const std::vector<ForecastSample>& data, const PlanningSetup& setup,
                           const SamplerTrainConfig& config, std::uint64_t seed,
                           const std::function<void(int, double)>& progress) {
  if (data.empty()) throw Error(ErrorCode::kInvalidArgument, "empty training set");
  const std::uint64_t decoder_sum = decoder.params().checksum();
  const int L = sampler.config().latent_dim;
  const bool use_planning = config.objective.w_planning != 0.0;
  const bool independent = config.objective.independent_planning_noise;

  std::vector<PreparedScene> prepared;
  prepared.reserve(data.size());
  for (const ForecastSample& s : data) prepared.push_back(prepare_scene(s.scene, decoder.config(), &s.future));

  Rng rng = make_rng(seed, "sampler.train");
  std::uniform_int_distribution<std::size_t> pick(0, data.size() - 1);
  std::normal_distribution<double> normal(0.0, 1.0);
  nn::Adam adam({config.learning_rate});
  sampler.params().zero_grad();
  SamplerCurve curve;
  double acc[5] = {0, 0, 0, 0, 0};
  int acc_n = 0;
  const int draws = std::max(1, config.reinforce_draws);
  for (int it = 0; it < config.iterations; ++it) {
    const std::size_t idx = pick(rng);
    const PreparedScene& scene = prepared[idx];
    const int N = scene.num_actors();
    if (N == 0) continue;
    std::vector<Eigen::MatrixXd> eps(static_cast<std::size_t>(draws), Eigen::MatrixXd(N, L));
    std::vector<Eigen::MatrixXd> distances(eps.size());
    std::vector<Eigen::VectorXd> coef(eps.size());
    std::vector<std::vector<Eigen::MatrixXd>> head_eps(eps.size());
    for (std::size_t d = 0; d < eps.size(); ++d) {
      for (Eigen::Index j = 0; j < eps[d].size(); ++j) eps[d](j) = normal(rng);
      if (!use_planning) continue;
      FutureSet futures;
      if (independent) {
        head_eps[d].assign(static_cast<std::size_t>(sampler.config().k), Eigen::MatrixXd(N, L));
        for (Eigen::MatrixXd& e : head_eps[d]) {
          for (Eigen::Index j = 0; j < e.size(); ++j) e(j) = normal(rng);
        }
        futures.latents = map_latents_per_head(sampler.maps(scene), head_eps[d], L);
      } else {
        futures.latents = map_latents(sampler.maps(scene), eps[d], L);
      }
      futures.futures = decoder.decode(data[idx].scene, scene, futures.latents);
      futures.set_uniform();
      distances[d] = plan_distances(plans_for(data[idx].scene, futures, setup));
      coef[d] = config.objective.baseline ? reinforce_coefficients(distances[d], leave_one_out_baselines(distances[d]))
                                          : reinforce_coefficients(distances[d], 0.0);
    }
    const bool loo = use_planning && config.objective.head_baseline && draws >= 2;
    for (std::size_t d = 0; d < eps.size(); ++d) {
      Eigen::VectorXd offsets;
      if (loo) {
        offsets = Eigen::VectorXd::Zero(coef[d].size());
        for (std::size_t o = 0; o < coef.size(); ++o) {
          if (o != d) offsets += coef[o];
        }
        offsets /= static_cast<double>(draws - 1);
      }
      Tape tape(true);
      const Binding bind = Binding::train(tape, sampler.params());
      const SamplerLossVars loss = sampler_loss(bind, sampler, decoder, scene, eps[d],
                                                use_planning ? &distances[d] : nullptr, config.objective,
                                                loo ? &offsets : nullptr,
                                                use_planning && independent ? &head_eps[d] : nullptr);
      const double value = tape.scalar_value(loss.total);
      if (!std::isfinite(value)) {
        throw Error(ErrorCode::kNonFiniteLoss, "sampler loss became non-finite at iteration " + std::to_string(it));
      }
      const Var scaled = tape.scale(loss.total, 1.0 / draws);
      tape.backward(scaled);
      acc[0] += value / draws;
      acc[1] += tape.scalar_value(loss.e_r) / draws;
      acc[2] += tape.scalar_value(loss.e_p) / draws;
      acc[3] += tape.scalar_value(loss.e_d) / draws;
      acc[4] += tape.scalar_value(loss.kl) / draws;
    }
    adam.step(sampler.params());
    ++acc_n;
    if ((it + 1) % std::max(1, config.log_every) == 0 || it + 1 == config.iterations) {
      curve.iteration.push_back(it + 1);
      curve.loss.push_back(acc[0] / acc_n);
      curve.e_r.push_back(acc[1] / acc_n);
      curve.e_p.push_back(acc[2] / acc_n);
      curve.e_d.push_back(acc[3] / acc_n);
      curve.kl.push_back(acc[4] / acc_n);
      if (progress) progress(it + 1, acc[0] / acc_n);
      for (double& a : acc) a = 0.0;
      acc_n = 0;
    }
  }
  if (decoder.params().checksum() != decoder_sum) {
    throw Error(ErrorCode::kDecoderMutated, "decoder parameters changed during sampler training");
  }
  return curve;
}

}  // namespace lookout
