#include "lookout/future_set.hpp"

#include "lookout/error.hpp"

#include <cmath>

namespace lookout {

void FutureSet::validate() const {
  if (futures.empty()) throw Error(ErrorCode::kShapeMismatch, "future set is empty");
  if (probabilities.size() != futures.size()) {
    throw Error(ErrorCode::kShapeMismatch, "one probability per future required");
  }
  double sum = 0.0;
  for (double p : probabilities) {
    if (!(p >= 0.0)) throw Error(ErrorCode::kShapeMismatch, "negative future probability");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-6) throw Error(ErrorCode::kShapeMismatch, "future probabilities must sum to 1");
  for (const ScenePrediction& f : futures) {
    if (f.xy.rows() != futures.front().xy.rows() || f.xy.cols() != futures.front().xy.cols()) {
      throw Error(ErrorCode::kShapeMismatch, "futures disagree in shape");
    }
  }
}

void FutureSet::set_uniform() {
  probabilities.assign(futures.size(), futures.empty() ? 0.0 : 1.0 / static_cast<double>(futures.size()));
}

double mean_displacement(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols() || a.cols() % 2 != 0) {
    throw Error(ErrorCode::kShapeMismatch, "displacement operands differ in shape");
  }
  const Eigen::Index n = a.rows();
  const Eigen::Index t = a.cols() / 2;
  if (n == 0 || t == 0) return 0.0;
  double acc = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index k = 0; k < t; ++k) {
      acc += std::hypot(a(i, 2 * k) - b(i, 2 * k), a(i, 2 * k + 1) - b(i, 2 * k + 1));
    }
  }
  return acc / static_cast<double>(n * t);
}

double mean_displacement(const ScenePrediction& a, const ScenePrediction& b) {
  return mean_displacement(a.xy, b.xy);
}

}  // namespace lookout
