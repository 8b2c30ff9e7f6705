#pragma once

#include "lookout/nn/tape.hpp"

#include <vector>

namespace lookout::nn {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double clip_norm = 10.0;  // global gradient norm clip, <= 0 disables
};

class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) {}

  /// Applies one update from the accumulated gradients, then zeroes them.
  /// Returns the pre-clip gradient norm.
  double step(ParameterSet& params);
  void set_learning_rate(double lr) { config_.learning_rate = lr; }
  long steps() const { return t_; }

 private:
  AdamConfig config_;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
  long t_ = 0;
};

}  // namespace lookout::nn
