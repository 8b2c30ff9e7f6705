#include "lookout/nn/adam.hpp"

#include "lookout/error.hpp"

#include <cmath>

namespace lookout::nn {

double Adam::step(ParameterSet& params) {
  auto& all = params.all();
  if (m_.empty()) {
    for (const Parameter& p : all) {
      m_.push_back(Matrix::Zero(p.value.rows(), p.value.cols()));
      v_.push_back(Matrix::Zero(p.value.rows(), p.value.cols()));
    }
  }
  if (m_.size() != all.size()) throw Error(ErrorCode::kShapeMismatch, "optimizer bound to a different parameter set");

  double sq = 0.0;
  for (const Parameter& p : all) {
    if (p.grad.size() == p.value.size()) sq += p.grad.squaredNorm();
  }
  const double norm = std::sqrt(sq);
  if (!std::isfinite(norm)) throw Error(ErrorCode::kNonFiniteLoss, "non-finite gradient");
  const double clip = config_.clip_norm > 0.0 && norm > config_.clip_norm ? config_.clip_norm / norm : 1.0;

  ++t_;
  const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < all.size(); ++i) {
    Parameter& p = all[i];
    if (p.grad.size() != p.value.size()) continue;
    const Matrix g = p.grad * clip;
    m_[i] = config_.beta1 * m_[i] + (1.0 - config_.beta1) * g;
    v_[i] = config_.beta2 * v_[i] + (1.0 - config_.beta2) * g.cwiseProduct(g);
    p.value.array() -= config_.learning_rate * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + config_.epsilon);
  }
  params.zero_grad();
  return norm;
}

}  // namespace lookout::nn
