#include "lookout/nn/tape.hpp"

#include "lookout/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

namespace lookout::nn {

int ParameterSet::add(std::string name, Matrix init) {
  Parameter p;
  p.name = std::move(name);
  p.grad = Matrix::Zero(init.rows(), init.cols());
  p.value = std::move(init);
  params_.push_back(std::move(p));
  return static_cast<int>(params_.size()) - 1;
}

void ParameterSet::zero_grad() {
  for (Parameter& p : params_) p.grad.setZero(p.value.rows(), p.value.cols());
}

std::size_t ParameterSet::num_scalars() const {
  std::size_t n = 0;
  for (const Parameter& p : params_) n += static_cast<std::size_t>(p.value.size());
  return n;
}

Eigen::VectorXd ParameterSet::flatten_values() const {
  Eigen::VectorXd out(static_cast<Eigen::Index>(num_scalars()));
  Eigen::Index at = 0;
  for (const Parameter& p : params_) {
    out.segment(at, p.value.size()) = p.value.reshaped();
    at += p.value.size();
  }
  return out;
}

Eigen::VectorXd ParameterSet::flatten_grads() const {
  Eigen::VectorXd out(static_cast<Eigen::Index>(num_scalars()));
  Eigen::Index at = 0;
  for (const Parameter& p : params_) {
    if (p.grad.size() == p.value.size()) {
      out.segment(at, p.value.size()) = p.grad.reshaped();
    } else {
      out.segment(at, p.value.size()).setZero();
    }
    at += p.value.size();
  }
  return out;
}

void ParameterSet::assign_values(const Eigen::VectorXd& flat) {
  if (flat.size() != static_cast<Eigen::Index>(num_scalars())) {
    throw Error(ErrorCode::kShapeMismatch, "flat parameter vector has the wrong length");
  }
  Eigen::Index at = 0;
  for (Parameter& p : params_) {
    p.value.reshaped() = flat.segment(at, p.value.size());
    at += p.value.size();
  }
}

std::uint64_t ParameterSet::checksum() const {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](const void* data, std::size_t bytes) {
    const auto* c = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < bytes; ++i) {
      h ^= c[i];
      h *= 1099511628211ull;
    }
  };
  for (const Parameter& p : params_) {
    const std::int64_t shape[2] = {p.value.rows(), p.value.cols()};
    mix(shape, sizeof(shape));
    mix(p.value.data(), sizeof(double) * static_cast<std::size_t>(p.value.size()));
  }
  return h;
}

// ---------------------------------------------------------------------------

Var Tape::push(Matrix value, bool requires_grad, std::function<void(Tape&, int)> backward) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = grad_enabled_ && requires_grad;
  if (n.requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Matrix& Tape::grad_ref(int id) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (n.grad.size() == 0) n.grad.setZero(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::accumulate(Var v, const Matrix& g) {
  if (needs(v)) grad_ref(v.id) += g;
}

template <typename Expr>
void Tape::accumulate_expr(Var v, const Expr& g) {
  if (needs(v)) grad_ref(v.id) += g;
}

namespace {

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw Error(ErrorCode::kShapeMismatch, std::string(op) + ": operand shapes differ");
  }
}

}  // namespace

Var Tape::constant(Matrix value) { return push(std::move(value), false, nullptr); }

Var Tape::scalar(double value) { return constant(Matrix::Constant(1, 1, value)); }

Var Tape::param(ParameterSet& set, int index, bool trainable) {
  Var v = push(set[index].value, trainable, [](Tape&, int) {});
  Node& n = nodes_.back();
  if (n.requires_grad) {
    n.set = &set;
    n.param_index = index;
  }
  return v;
}

Var Tape::param(const ParameterSet& set, int index) { return constant(set[index].value); }

void Tape::backward(Var loss) {
  if (!grad_enabled_) throw Error(ErrorCode::kInvalidArgument, "backward on a tape without gradients");
  if (value(loss).size() != 1) throw Error(ErrorCode::kShapeMismatch, "backward needs a scalar loss");
  for (Node& n : nodes_) n.grad.resize(0, 0);
  if (!needs(loss)) return;
  grad_ref(loss.id).setOnes();
  for (int id = loss.id; id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.requires_grad || n.grad.size() == 0) continue;
    if (n.set) {
      Parameter& p = (*n.set)[n.param_index];
      if (p.grad.size() != p.value.size()) p.grad.setZero(p.value.rows(), p.value.cols());
      p.grad += n.grad;
    } else if (n.backward) {
      n.backward(*this, id);
    }
  }
}

Var Tape::matmul(Var a, Var b) {
  if (value(a).cols() != value(b).rows()) throw Error(ErrorCode::kShapeMismatch, "matmul: inner dimensions differ");
  return push(value(a) * value(b), needs(a) || needs(b), [a, b](Tape& t, int id) {
    const Matrix& g = t.out_grad(id);
    if (t.needs(a)) t.grad_ref(a.id).noalias() += g * t.value(b).transpose();
    if (t.needs(b)) t.grad_ref(b.id).noalias() += t.value(a).transpose() * g;
  });
}

Var Tape::add(Var a, Var b) {
  require_same_shape(value(a), value(b), "add");
  return push(value(a) + value(b), needs(a) || needs(b), [a, b](Tape& t, int id) {
    t.accumulate(a, t.out_grad(id));
    t.accumulate(b, t.out_grad(id));
  });
}

Var Tape::sub(Var a, Var b) {
  require_same_shape(value(a), value(b), "sub");
  return push(value(a) - value(b), needs(a) || needs(b), [a, b](Tape& t, int id) {
    t.accumulate(a, t.out_grad(id));
    t.accumulate_expr(b, -t.out_grad(id));
  });
}

Var Tape::cmul(Var a, Var b) {
  require_same_shape(value(a), value(b), "cmul");
  return push(value(a).cwiseProduct(value(b)), needs(a) || needs(b), [a, b](Tape& t, int id) {
    const Matrix& g = t.out_grad(id);
    t.accumulate_expr(a, g.cwiseProduct(t.value(b)));
    t.accumulate_expr(b, g.cwiseProduct(t.value(a)));
  });
}

Var Tape::add_row(Var a, Var row) {
  if (value(row).rows() != 1 || value(row).cols() != value(a).cols()) {
    throw Error(ErrorCode::kShapeMismatch, "add_row: row shape mismatch");
  }
  Matrix out = value(a).rowwise() + value(row).row(0);
  return push(std::move(out), needs(a) || needs(row), [a, row](Tape& t, int id) {
    const Matrix& g = t.out_grad(id);
    t.accumulate(a, g);
    t.accumulate_expr(row, g.colwise().sum());
  });
}

Var Tape::mul_row(Var a, Var row) {
  if (value(row).rows() != 1 || value(row).cols() != value(a).cols()) {
    throw Error(ErrorCode::kShapeMismatch, "mul_row: row shape mismatch");
  }
  Matrix out = value(a).array().rowwise() * value(row).row(0).array();
  return push(std::move(out), needs(a) || needs(row), [a, row](Tape& t, int id) {
    const Matrix& g = t.out_grad(id);
    if (t.needs(a)) t.grad_ref(a.id).array() += g.array().rowwise() * t.value(row).row(0).array();
    t.accumulate_expr(row, g.cwiseProduct(t.value(a)).colwise().sum());
  });
}

Var Tape::scale(Var a, double s) {
  return push(value(a) * s, needs(a), [a, s](Tape& t, int id) { t.accumulate_expr(a, t.out_grad(id) * s); });
}

Var Tape::add_scalar(Var a, double s) {
  return push(value(a).array() + s, needs(a), [a](Tape& t, int id) { t.accumulate(a, t.out_grad(id)); });
}

Var Tape::scale_by(Var a, Var s) {
  if (value(s).size() != 1) throw Error(ErrorCode::kShapeMismatch, "scale_by: factor must be 1x1");
  return push(value(a) * value(s)(0, 0), needs(a) || needs(s), [a, s](Tape& t, int id) {
    const Matrix& g = t.out_grad(id);
    t.accumulate_expr(a, g * t.value(s)(0, 0));
    if (t.needs(s)) t.grad_ref(s.id)(0, 0) += g.cwiseProduct(t.value(a)).sum();
  });
}

Var Tape::tanh(Var a) {
  Matrix y = value(a).array().tanh();
  return push(std::move(y), needs(a), [a](Tape& t, int id) {
    const Matrix& y = t.value(Var{id});
    t.accumulate_expr(a, (t.out_grad(id).array() * (1.0 - y.array().square())).matrix());
  });
}

Var Tape::sigmoid(Var a) {
  Matrix y = (1.0 + (-value(a).array()).exp()).inverse();
  return push(std::move(y), needs(a), [a](Tape& t, int id) {
    const Matrix& y = t.value(Var{id});
    t.accumulate_expr(a, (t.out_grad(id).array() * y.array() * (1.0 - y.array())).matrix());
  });
}

Var Tape::exp(Var a) {
  Matrix y = value(a).array().exp();
  return push(std::move(y), needs(a), [a](Tape& t, int id) {
    t.accumulate_expr(a, t.out_grad(id).cwiseProduct(t.value(Var{id})));
  });
}

Var Tape::log(Var a) {
  Matrix y = value(a).array().log();
  return push(std::move(y), needs(a), [a](Tape& t, int id) {
    t.accumulate_expr(a, t.out_grad(id).cwiseQuotient(t.value(a)));
  });
}

Var Tape::square(Var a) {
  Matrix y = value(a).array().square();
  return push(std::move(y), needs(a), [a](Tape& t, int id) {
    t.accumulate_expr(a, (2.0 * t.out_grad(id).array() * t.value(a).array()).matrix());
  });
}

Var Tape::clamp(Var a, double lo, double hi) {
  Matrix y = value(a).cwiseMax(lo).cwiseMin(hi);
  return push(std::move(y), needs(a), [a, lo, hi](Tape& t, int id) {
    const Matrix& x = t.value(a);
    const Matrix& g = t.out_grad(id);
    Matrix& ga = t.grad_ref(a.id);
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      if (x(i) >= lo && x(i) <= hi) ga(i) += g(i);
    }
  });
}

Var Tape::huber(Var a, double delta) {
  const Matrix& x = value(a);
  Matrix y(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double ax = std::abs(x(i));
    y(i) = ax <= delta ? 0.5 * x(i) * x(i) : delta * (ax - 0.5 * delta);
  }
  return push(std::move(y), needs(a), [a, delta](Tape& t, int id) {
    const Matrix& x = t.value(a);
    const Matrix& g = t.out_grad(id);
    Matrix& ga = t.grad_ref(a.id);
    for (Eigen::Index i = 0; i < x.size(); ++i) ga(i) += g(i) * std::clamp(x(i), -delta, delta);
  });
}

Var Tape::concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw Error(ErrorCode::kShapeMismatch, "concat_cols: no parts");
  const Eigen::Index rows = value(parts[0]).rows();
  Eigen::Index cols = 0;
  bool req = false;
  for (Var p : parts) {
    if (value(p).rows() != rows) throw Error(ErrorCode::kShapeMismatch, "concat_cols: row counts differ");
    cols += value(p).cols();
    req = req || needs(p);
  }
  Matrix out(rows, cols);
  Eigen::Index at = 0;
  for (Var p : parts) {
    out.middleCols(at, value(p).cols()) = value(p);
    at += value(p).cols();
  }
  return push(std::move(out), req, [parts](Tape& t, int id) {
    const Matrix& g = t.out_grad(id);
    Eigen::Index at = 0;
    for (Var p : parts) {
      const Eigen::Index c = t.value(p).cols();
      t.accumulate_expr(p, g.middleCols(at, c));
      at += c;
    }
  });
}

Var Tape::concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw Error(ErrorCode::kShapeMismatch, "concat_rows: no parts");
  const Eigen::Index cols = value(parts[0]).cols();
  Eigen::Index rows = 0;
  bool req = false;
  for (Var p : parts) {
    if (value(p).cols() != cols) throw Error(ErrorCode::kShapeMismatch, "concat_rows: column counts differ");
    rows += value(p).rows();
    req = req || needs(p);
  }
  Matrix out(rows, cols);
  Eigen::Index at = 0;
  for (Var p : parts) {
    out.middleRows(at, value(p).rows()) = value(p);
    at += value(p).rows();
  }
  return push(std::move(out), req, [parts](Tape& t, int id) {
    const Matrix& g = t.out_grad(id);
    Eigen::Index at = 0;
    for (Var p : parts) {
      const Eigen::Index r = t.value(p).rows();
      t.accumulate_expr(p, g.middleRows(at, r));
      at += r;
    }
  });
}

Var Tape::slice_cols(Var a, int start, int count) {
  if (start < 0 || count < 0 || start + count > value(a).cols()) {
    throw Error(ErrorCode::kShapeMismatch, "slice_cols out of range");
  }
  return push(value(a).middleCols(start, count), needs(a), [a, start, count](Tape& t, int id) {
    t.grad_ref(a.id).middleCols(start, count) += t.out_grad(id);
  });
}

Var Tape::slice_rows(Var a, int start, int count) {
  if (start < 0 || count < 0 || start + count > value(a).rows()) {
    throw Error(ErrorCode::kShapeMismatch, "slice_rows out of range");
  }
  return push(value(a).middleRows(start, count), needs(a), [a, start, count](Tape& t, int id) {
    t.grad_ref(a.id).middleRows(start, count) += t.out_grad(id);
  });
}

Var Tape::gather_rows(Var a, std::vector<int> index) {
  const Matrix& x = value(a);
  Matrix out(static_cast<Eigen::Index>(index.size()), x.cols());
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] < 0 || index[i] >= x.rows()) throw Error(ErrorCode::kShapeMismatch, "gather_rows index out of range");
    out.row(static_cast<Eigen::Index>(i)) = x.row(index[i]);
  }
  return push(std::move(out), needs(a), [a, index = std::move(index)](Tape& t, int id) {
    const Matrix& g = t.out_grad(id);
    Matrix& ga = t.grad_ref(a.id);
    for (std::size_t i = 0; i < index.size(); ++i) ga.row(index[i]) += g.row(static_cast<Eigen::Index>(i));
  });
}

Var Tape::reshape(Var a, int rows, int cols) {
  const Matrix& x = value(a);
  if (static_cast<Eigen::Index>(rows) * cols != x.size()) throw Error(ErrorCode::kShapeMismatch, "reshape size mismatch");
  Matrix out(rows, cols);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      const Eigen::Index flat = i * x.cols() + j;
      out(flat / cols, flat % cols) = x(i, j);
    }
  }
  return push(std::move(out), needs(a), [a, cols](Tape& t, int id) {
    const Matrix& g = t.out_grad(id);
    Matrix& ga = t.grad_ref(a.id);
    for (Eigen::Index i = 0; i < ga.rows(); ++i) {
      for (Eigen::Index j = 0; j < ga.cols(); ++j) {
        const Eigen::Index flat = i * ga.cols() + j;
        ga(i, j) += g(flat / cols, flat % cols);
      }
    }
  });
}

Var Tape::segment_max(Var a, std::vector<int> segment, int num_segments, Var fallback) {
  const Matrix& x = value(a);
  const Matrix& fb = value(fallback);
  if (static_cast<Eigen::Index>(segment.size()) != x.rows() || fb.rows() != 1 ||
      (x.rows() > 0 && fb.cols() != x.cols())) {
    throw Error(ErrorCode::kShapeMismatch, "segment_max shape mismatch");
  }
  const Eigen::Index c = fb.cols();
  Matrix out(num_segments, c);
  // argmax[s * c + j] is the winning row, or -1 when the fallback is used.
  std::vector<int> argmax(static_cast<std::size_t>(num_segments * c), -1);
  for (std::size_t r = 0; r < segment.size(); ++r) {
    const int s = segment[r];
    if (s < 0 || s >= num_segments) throw Error(ErrorCode::kShapeMismatch, "segment id out of range");
    for (Eigen::Index j = 0; j < c; ++j) {
      int& w = argmax[static_cast<std::size_t>(s * c + j)];
      if (w < 0 || x(static_cast<Eigen::Index>(r), j) > x(w, j)) w = static_cast<int>(r);
    }
  }
  for (int s = 0; s < num_segments; ++s) {
    for (Eigen::Index j = 0; j < c; ++j) {
      const int w = argmax[static_cast<std::size_t>(s * c + j)];
      out(s, j) = w < 0 ? fb(0, j) : x(w, j);
    }
  }
  return push(std::move(out), needs(a) || needs(fallback),
              [a, fallback, c, num_segments, argmax = std::move(argmax)](Tape& t, int id) {
                const Matrix& g = t.out_grad(id);
                const bool need_a = t.needs(a);
                const bool need_fb = t.needs(fallback);
                for (int s = 0; s < num_segments; ++s) {
                  for (Eigen::Index j = 0; j < c; ++j) {
                    const int w = argmax[static_cast<std::size_t>(s * c + j)];
                    if (w >= 0) {
                      if (need_a) t.grad_ref(a.id)(w, j) += g(s, j);
                    } else if (need_fb) {
                      t.grad_ref(fallback.id)(0, j) += g(s, j);
                    }
                  }
                }
              });
}

Var Tape::segment_mean(Var a, std::vector<int> segment, int num_segments) {
  const Matrix& x = value(a);
  if (static_cast<Eigen::Index>(segment.size()) != x.rows()) throw Error(ErrorCode::kShapeMismatch, "segment_mean shape mismatch");
  Matrix out = Matrix::Zero(num_segments, x.cols());
  std::vector<double> count(static_cast<std::size_t>(num_segments), 0.0);
  for (std::size_t r = 0; r < segment.size(); ++r) {
    const int s = segment[r];
    if (s < 0 || s >= num_segments) throw Error(ErrorCode::kShapeMismatch, "segment id out of range");
    out.row(s) += x.row(static_cast<Eigen::Index>(r));
    count[static_cast<std::size_t>(s)] += 1.0;
  }
  for (int s = 0; s < num_segments; ++s) {
    if (count[static_cast<std::size_t>(s)] > 0.0) out.row(s) /= count[static_cast<std::size_t>(s)];
  }
  return push(std::move(out), needs(a), [a, segment = std::move(segment), count = std::move(count)](Tape& t, int id) {
    const Matrix& g = t.out_grad(id);
    Matrix& ga = t.grad_ref(a.id);
    for (std::size_t r = 0; r < segment.size(); ++r) {
      const int s = segment[r];
      ga.row(static_cast<Eigen::Index>(r)) += g.row(s) / count[static_cast<std::size_t>(s)];
    }
  });
}

Var Tape::sum(Var a) {
  return push(Matrix::Constant(1, 1, value(a).sum()), needs(a), [a](Tape& t, int id) {
    t.grad_ref(a.id).array() += t.out_grad(id)(0, 0);
  });
}

Var Tape::mean(Var a) {
  const double n = static_cast<double>(std::max<Eigen::Index>(1, value(a).size()));
  return push(Matrix::Constant(1, 1, value(a).sum() / n), needs(a), [a, n](Tape& t, int id) {
    t.grad_ref(a.id).array() += t.out_grad(id)(0, 0) / n;
  });
}

Var Tape::pair_norms(Var a, double eps) {
  const Matrix& x = value(a);
  if (x.cols() % 2 != 0) throw Error(ErrorCode::kShapeMismatch, "pair_norms needs an even column count");
  Matrix out(x.rows(), x.cols() / 2);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index k = 0; k < out.cols(); ++k) {
      const double dx = x(i, 2 * k);
      const double dy = x(i, 2 * k + 1);
      out(i, k) = std::sqrt(dx * dx + dy * dy + eps);
    }
  }
  return push(std::move(out), needs(a), [a](Tape& t, int id) {
    const Matrix& x = t.value(a);
    const Matrix& y = t.value(Var{id});
    const Matrix& g = t.out_grad(id);
    Matrix& ga = t.grad_ref(a.id);
    for (Eigen::Index i = 0; i < y.rows(); ++i) {
      for (Eigen::Index k = 0; k < y.cols(); ++k) {
        if (y(i, k) <= 0.0) continue;
        ga(i, 2 * k) += g(i, k) * x(i, 2 * k) / y(i, k);
        ga(i, 2 * k + 1) += g(i, k) * x(i, 2 * k + 1) / y(i, k);
      }
    }
  });
}

Var Tape::min_of(const std::vector<Var>& scalars) {
  if (scalars.empty()) throw Error(ErrorCode::kShapeMismatch, "min_of: no inputs");
  std::size_t best = 0;
  for (std::size_t i = 1; i < scalars.size(); ++i) {
    if (scalar_value(scalars[i]) < scalar_value(scalars[best])) best = i;
  }
  const Var w = scalars[best];
  return push(value(w), needs(w), [w](Tape& t, int id) { t.accumulate(w, t.out_grad(id)); });
}

Var Tape::log_softmax_rows(Var a) {
  const Matrix& x = value(a);
  Matrix y(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double m = x.row(i).maxCoeff();
    const double lse = m + std::log((x.row(i).array() - m).exp().sum());
    y.row(i) = x.row(i).array() - lse;
  }
  return push(std::move(y), needs(a), [a](Tape& t, int id) {
    const Matrix& y = t.value(Var{id});
    const Matrix& g = t.out_grad(id);
    Matrix& ga = t.grad_ref(a.id);
    for (Eigen::Index i = 0; i < y.rows(); ++i) {
      const double gs = g.row(i).sum();
      ga.row(i).array() += g.row(i).array() - y.row(i).array().exp() * gs;
    }
  });
}

Var Tape::stop_gradient(Var a) { return constant(value(a)); }

}  // namespace lookout::nn
