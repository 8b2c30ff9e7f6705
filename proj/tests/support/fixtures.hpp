#pragma once

#include "lookout/forecast.hpp"
#include "lookout/nn/tape.hpp"
#include "lookout/sim.hpp"

#include <Eigen/Core>

#include <cmath>
#include <functional>
#include <random>
#include <vector>

namespace fixture {

inline Eigen::MatrixXd gaussian(std::mt19937_64& rng, long rows, long cols, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Eigen::MatrixXd m(rows, cols);
  for (long i = 0; i < m.size(); ++i) m(i) = n(rng);
  return m;
}

/// The sample restricted to its first `keep` actors.
inline lookout::ForecastSample first_actors(const lookout::ForecastSample& s, int keep) {
  lookout::ForecastSample out = s;
  out.scene.actors.resize(static_cast<std::size_t>(keep));
  out.scene.history.resize(static_cast<std::size_t>(keep));
  out.future = s.future.topRows(keep);
  return out;
}

/// Adds N(0, scale^2) to every parameter.
inline void jitter(lookout::nn::ParameterSet& params, std::mt19937_64& rng, double scale) {
  Eigen::VectorXd v = params.flatten_values();
  std::normal_distribution<double> n(0.0, scale);
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) += n(rng);
  params.assign_values(v);
}

struct GradCheck {
  double worst_relative_error = 0.0;
  double smallest_derivative = 0.0;
  int directions = 0;
};

/// Directional derivatives of `loss` along random unit directions against
/// central differences. The relative error is |g.v - fd| / max(|g.v|, |fd|).
inline GradCheck check_gradient(lookout::nn::ParameterSet& params,
                                const std::function<lookout::nn::Var(const lookout::nn::Binding&)>& loss,
                                int directions, std::uint64_t seed, double h = 1e-6) {
  using namespace lookout::nn;
  params.zero_grad();
  Tape tape(true);
  const Binding b = Binding::train(tape, params);
  tape.backward(loss(b));
  const Eigen::VectorXd grad = params.flatten_grads();
  params.zero_grad();

  const Eigen::VectorXd theta = params.flatten_values();
  auto eval = [&](const Eigen::VectorXd& at) {
    params.assign_values(at);
    Tape t(false);
    return t.scalar_value(loss(Binding::frozen(t, params)));
  };

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  GradCheck out;
  out.smallest_derivative = INFINITY;
  for (int d = 0; d < directions; ++d) {
    Eigen::VectorXd v(theta.size());
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = n(rng);
    v.normalize();
    const double fd = (eval(theta + h * v) - eval(theta - h * v)) / (2.0 * h);
    const double an = grad.dot(v);
    const double denom = std::max({std::abs(fd), std::abs(an), 1e-300});
    out.worst_relative_error = std::max(out.worst_relative_error, std::abs(fd - an) / denom);
    out.smallest_derivative = std::min(out.smallest_derivative, std::max(std::abs(fd), std::abs(an)));
    ++out.directions;
  }
  params.assign_values(theta);
  return out;
}

}  // namespace fixture
