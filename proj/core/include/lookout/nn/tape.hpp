#pragma once

// Minimal reverse-mode differentiation over dense double matrices.
//
// A Tape records every operation of one forward pass. Parameters live in a
// ParameterSet and are referenced by index, so models stay copyable and a
// tape never owns weights.

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace lookout::nn {

using Matrix = Eigen::MatrixXd;

struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;
};

class ParameterSet {
 public:
  int add(std::string name, Matrix init);

  Parameter& operator[](int i) { return params_[static_cast<std::size_t>(i)]; }
  const Parameter& operator[](int i) const { return params_[static_cast<std::size_t>(i)]; }
  int size() const { return static_cast<int>(params_.size()); }
  std::vector<Parameter>& all() { return params_; }
  const std::vector<Parameter>& all() const { return params_; }

  void zero_grad();
  std::size_t num_scalars() const;
  /// Concatenation of all values (or gradients) in registration order.
  Eigen::VectorXd flatten_values() const;
  Eigen::VectorXd flatten_grads() const;
  void assign_values(const Eigen::VectorXd& flat);
  /// FNV-1a over the raw bytes of every value.
  std::uint64_t checksum() const;

 private:
  std::vector<Parameter> params_;
};

struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

class Tape {
 public:
  explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}

  bool grad_enabled() const { return grad_enabled_; }

  Var constant(Matrix value);
  Var scalar(double value);
  /// Reads a parameter. Gradients reach it only when `trainable` is set.
  Var param(ParameterSet& set, int index, bool trainable = true);
  /// Reads a parameter as a constant.
  Var param(const ParameterSet& set, int index);

  const Matrix& value(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].value; }
  double scalar_value(Var v) const { return value(v)(0, 0); }
  /// Gradient of the last backward() with respect to a recorded node.
  const Matrix& grad(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].grad; }

  /// Seeds d loss / d loss = 1 for a 1x1 node and accumulates into the grad
  /// of every reachable trainable parameter.
  void backward(Var loss);

  Var matmul(Var a, Var b);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var cmul(Var a, Var b);
  /// Adds a 1 x c row to every row of a.
  Var add_row(Var a, Var row);
  /// Multiplies every row of a elementwise by a 1 x c row.
  Var mul_row(Var a, Var row);
  Var scale(Var a, double s);
  Var add_scalar(Var a, double s);
  /// a (any shape) times a 1x1 node.
  Var scale_by(Var a, Var s);

  Var tanh(Var a);
  Var sigmoid(Var a);
  Var exp(Var a);
  Var log(Var a);
  Var square(Var a);
  Var clamp(Var a, double lo, double hi);
  Var huber(Var a, double delta);

  Var concat_cols(const std::vector<Var>& parts);
  Var concat_rows(const std::vector<Var>& parts);
  Var slice_cols(Var a, int start, int count);
  Var slice_rows(Var a, int start, int count);
  Var gather_rows(Var a, std::vector<int> index);
  /// Row-major reinterpretation to rows x cols.
  Var reshape(Var a, int rows, int cols);

  /// out[s] = columnwise max of rows of `a` with segment[r] == s, or the
  /// 1 x c `fallback` row for empty segments.
  Var segment_max(Var a, std::vector<int> segment, int num_segments, Var fallback);
  Var segment_mean(Var a, std::vector<int> segment, int num_segments);

  Var sum(Var a);
  Var mean(Var a);
  /// Per-row Euclidean norm of consecutive (x, y) column pairs:
  /// N x 2T -> N x T, sqrt(x^2 + y^2 + eps).
  Var pair_norms(Var a, double eps);
  /// Smallest of several 1x1 nodes; the gradient goes to the first minimum.
  Var min_of(const std::vector<Var>& scalars);
  Var log_softmax_rows(Var a);
  Var stop_gradient(Var a);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    ParameterSet* set = nullptr;
    int param_index = -1;
    std::function<void(Tape&, int)> backward;
  };

  Var push(Matrix value, bool requires_grad, std::function<void(Tape&, int)> backward);
  bool needs(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].requires_grad; }
  Matrix& grad_ref(int id);
  void accumulate(Var v, const Matrix& g);
  template <typename Expr>
  void accumulate_expr(Var v, const Expr& g);
  const Matrix& out_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].grad; }

  bool grad_enabled_;
  std::vector<Node> nodes_;
};

}  // namespace lookout::nn
