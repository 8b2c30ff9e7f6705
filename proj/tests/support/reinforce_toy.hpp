#pragma once

// One-actor REINFORCE toy: the planner is replaced by a smooth pairwise
// latent distance, so the true gradient of the expected reward can be
// estimated by finite differences of a common-random-numbers average.

#include "lookout/diverse_sampler.hpp"
#include "lookout/sim.hpp"

#include "fixtures.hpp"

#include <cmath>
#include <random>
#include <vector>

namespace reinforce {

using namespace lookout;

struct Toy {
  ForecastModel decoder;
  DiverseSampler sampler;
  ForecastSample sample;
  PreparedScene prepared;

  Toy(int k, int latent, int actors) {
    ForecastConfig fc;
    fc.latent_dim = latent;
    fc.hidden = 8;
    decoder = ForecastModel::create(fc, 1);
    DiverseSamplerConfig sc;
    sc.k = k;
    sc.latent_dim = latent;
    sc.hidden = 8;
    sc.head_offset_init = 1.0;  // heads apart, so the pairwise distances have a gradient
    sampler = DiverseSampler::create(sc, 2);
    std::mt19937_64 rng(3);
    fixture::jitter(sampler.params(), rng, 0.1);
    sample = fixture::first_actors(generate_dataset(Family::kYieldOrGo, 1, 4).samples[0], actors);
    prepared = prepare_scene(sample.scene, fc, &sample.future);
  }
};

// Smooth stand-in for the planner: mean over ordered pairs of the Euclidean
// distance between flattened latents.
inline Eigen::MatrixXd latent_distances(const std::vector<Eigen::MatrixXd>& z) {
  const auto k = static_cast<Eigen::Index>(z.size());
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(k, k);
  for (Eigen::Index i = 0; i < k; ++i)
    for (Eigen::Index j = 0; j < k; ++j) d(i, j) = (z[static_cast<std::size_t>(i)] - z[static_cast<std::size_t>(j)]).norm();
  return d;
}

inline double mean_offdiag(const Eigen::MatrixXd& d) {
  const double k = static_cast<double>(d.rows());
  return (d.sum() - d.diagonal().sum()) / (k * (k - 1));
}

struct Estimate {
  double mean = 0.0;
  double se = 0.0;
};

inline Estimate summarize(const std::vector<double>& xs) {
  double m = 0.0;
  for (double x : xs) m += x;
  m /= static_cast<double>(xs.size());
  double v = 0.0;
  for (double x : xs) v += (x - m) * (x - m);
  v /= static_cast<double>(xs.size() - 1);
  return {m, std::sqrt(v / static_cast<double>(xs.size()))};
}

// Directional derivative of J = E[mean pairwise latent distance] by a
// central difference of a common-random-numbers Monte-Carlo estimate.
inline Estimate oracle_derivative(Toy& toy, const Eigen::VectorXd& v, int draws, std::uint64_t seed) {
  const int K = toy.sampler.config().k, L = toy.sampler.config().latent_dim, N = toy.prepared.num_actors();
  const Eigen::VectorXd theta = toy.sampler.params().flatten_values();
  const double h = 1e-5;
  toy.sampler.params().assign_values(theta + h * v);
  const LatentMaps plus = toy.sampler.maps(toy.prepared);
  toy.sampler.params().assign_values(theta - h * v);
  const LatentMaps minus = toy.sampler.maps(toy.prepared);
  toy.sampler.params().assign_values(theta);
  std::mt19937_64 rng(seed);
  std::vector<double> xs;
  for (int m = 0; m < draws; ++m) {
    std::vector<Eigen::MatrixXd> eps;
    for (int k = 0; k < K; ++k) eps.push_back(fixture::gaussian(rng, N, L));
    const double rp = mean_offdiag(latent_distances(map_latents_per_head(plus, eps, L)));
    const double rm = mean_offdiag(latent_distances(map_latents_per_head(minus, eps, L)));
    xs.push_back((rp - rm) / (2 * h));
  }
  return summarize(xs);
}

// The library's planning-energy gradient along v, negated so that its mean
// is the derivative of J.
inline Estimate score_function_derivative(Toy& toy, const Eigen::VectorXd& v, int draws, std::uint64_t seed, bool baseline,
                                   bool same_draw_baseline = false) {
  const int K = toy.sampler.config().k, L = toy.sampler.config().latent_dim, N = toy.prepared.num_actors();
  SamplerObjective obj;
  obj.w_reconstruction = 0.0;
  obj.w_general = 0.0;
  obj.beta = 0.0;
  obj.w_planning = 1.0;
  obj.baseline = baseline;
  const LatentMaps maps = toy.sampler.maps(toy.prepared);
  const Eigen::MatrixXd shared = Eigen::MatrixXd::Zero(N, L);
  std::mt19937_64 rng(seed);
  std::vector<double> xs;
  for (int m = 0; m < draws; ++m) {
    std::vector<Eigen::MatrixXd> eps;
    for (int k = 0; k < K; ++k) eps.push_back(fixture::gaussian(rng, N, L));
    const Eigen::MatrixXd d = latent_distances(map_latents_per_head(maps, eps, L));
    toy.sampler.params().zero_grad();
    nn::Tape t(true);
    const nn::Binding b = nn::Binding::train(t, toy.sampler.params());
    // Subtracting the draw's own mean pairwise distance from every head.
    const Eigen::VectorXd offsets = Eigen::VectorXd::Constant(K, 2.0 * (K - 1) * mean_offdiag(d));
    t.backward(sampler_loss(b, toy.sampler, toy.decoder, toy.prepared, shared, &d, obj,
                            same_draw_baseline ? &offsets : nullptr, &eps).total);
    xs.push_back(-toy.sampler.params().flatten_grads().dot(v));
  }
  toy.sampler.params().zero_grad();
  return summarize(xs);
}

// Unit direction over the output biases of both heads: random for the
// scale head, the current offsets (spreading the heads apart) plus noise for
// the mean head.
inline Eigen::VectorXd head_bias_direction(const DiverseSampler& s, std::uint64_t seed) {
  const nn::ParameterSet& p = s.params();
  int last_a = -1;
  for (int i = 0; i < p.size(); ++i)
    if (p[i].name.rfind("sampler_a", 0) == 0) last_a = i;
  const int last_b = p.size() - 1;
  Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p.num_scalars()));
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Index offset = 0;
  for (int i = 0; i < p.size(); ++i) {
    const Eigen::Index size = p[i].value.size();
    if (i == last_a)
      for (Eigen::Index j = 0; j < size; ++j) v(offset + j) = n(rng);
    if (i == last_b)
      for (Eigen::Index j = 0; j < size; ++j) v(offset + j) = 3.0 * p[i].value(j) + n(rng);
    offset += size;
  }
  return v.normalized();
}

}  // namespace reinforce
