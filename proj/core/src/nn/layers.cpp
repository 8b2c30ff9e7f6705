#include "lookout/nn/layers.hpp"

#include "lookout/error.hpp"

#include <cmath>

namespace lookout::nn {

Linear Linear::create(ParameterSet& params, const std::string& name, int in, int out, Rng& rng, bool zero) {
  Linear l;
  l.in = in;
  l.out = out;
  Matrix w = Matrix::Zero(in, out);
  if (!zero) {
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (Eigen::Index i = 0; i < w.size(); ++i) w(i) = dist(rng);
  }
  l.weight = params.add(name + ".w", std::move(w));
  l.bias = params.add(name + ".b", Matrix::Zero(1, out));
  return l;
}

Var Linear::forward(const Binding& b, Var x) const {
  if (b.tape.value(x).cols() != in) throw Error(ErrorCode::kShapeMismatch, "linear layer input width mismatch");
  return b.tape.add_row(b.tape.matmul(x, b.get(weight)), b.get(bias));
}

Mlp Mlp::create(ParameterSet& params, const std::string& name, const std::vector<int>& widths, Rng& rng,
                bool final_tanh, bool zero_last) {
  Mlp m;
  m.final_tanh = final_tanh;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    const bool last = i + 2 == widths.size();
    m.layers.push_back(Linear::create(params, name + "." + std::to_string(i), widths[i], widths[i + 1], rng,
                                      last && zero_last));
  }
  return m;
}

Var Mlp::forward(const Binding& b, Var x) const {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    x = layers[i].forward(b, x);
    if (i + 1 < layers.size() || final_tanh) x = b.tape.tanh(x);
  }
  return x;
}

GruCell GruCell::create(ParameterSet& params, const std::string& name, int in, int hidden, Rng& rng) {
  GruCell g;
  g.hidden = hidden;
  g.input_gates = Linear::create(params, name + ".x", in, 3 * hidden, rng);
  g.hidden_gates = Linear::create(params, name + ".h", hidden, 2 * hidden, rng);
  g.hidden_cand = Linear::create(params, name + ".hc", hidden, hidden, rng);
  return g;
}

Var GruCell::forward(const Binding& b, Var x, Var h) const {
  Tape& t = b.tape;
  const int H = hidden;
  const Var xi = input_gates.forward(b, x);
  const Var hi = hidden_gates.forward(b, h);
  const Var z = t.sigmoid(t.add(t.slice_cols(xi, 0, H), t.slice_cols(hi, 0, H)));
  const Var r = t.sigmoid(t.add(t.slice_cols(xi, H, H), t.slice_cols(hi, H, H)));
  const Var n = t.tanh(t.add(t.slice_cols(xi, 2 * H, H), hidden_cand.forward(b, t.cmul(r, h))));
  // h' = n + z * (h - n)
  return t.add(n, t.cmul(z, t.sub(h, n)));
}

Graph Graph::build(const std::vector<Pose2>& poses, const std::vector<int>& block) {
  if (poses.size() != block.size()) throw Error(ErrorCode::kShapeMismatch, "graph poses and blocks differ in length");
  Graph g;
  g.num_nodes = static_cast<int>(poses.size());
  for (int i = 0; i < g.num_nodes; ++i) {
    for (int j = 0; j < g.num_nodes; ++j) {
      if (i != j && block[static_cast<std::size_t>(i)] == block[static_cast<std::size_t>(j)]) {
        g.dst.push_back(i);
        g.src.push_back(j);
      }
    }
  }
  g.edge_features.resize(static_cast<Eigen::Index>(g.dst.size()), kEdgeFeatures);
  for (std::size_t e = 0; e < g.dst.size(); ++e) {
    const Pose2& pi = poses[static_cast<std::size_t>(g.dst[e])];
    const Pose2& pj = poses[static_cast<std::size_t>(g.src[e])];
    const Vec2 rel = world_to_local(pi, pj.position());
    const double dh = pj.heading - pi.heading;
    const auto r = static_cast<Eigen::Index>(e);
    g.edge_features(r, 0) = rel.x() / kDistanceScale;
    g.edge_features(r, 1) = rel.y() / kDistanceScale;
    g.edge_features(r, 2) = std::cos(dh);
    g.edge_features(r, 3) = std::sin(dh);
    g.edge_features(r, 4) = rel.norm() / kDistanceScale;
  }
  return g;
}

Graph Graph::replicated(const std::vector<Pose2>& poses, int copies) {
  std::vector<Pose2> all;
  std::vector<int> block;
  all.reserve(poses.size() * static_cast<std::size_t>(copies));
  for (int k = 0; k < copies; ++k) {
    all.insert(all.end(), poses.begin(), poses.end());
    block.insert(block.end(), poses.size(), k);
  }
  return build(all, block);
}

SceneInteraction SceneInteraction::create(ParameterSet& params, const std::string& name,
                                          const SimConfig& config, Rng& rng, bool zero_output) {
  SceneInteraction s;
  s.config_ = config;
  const int H = config.hidden;
  s.input_ = Linear::create(params, name + ".in", config.in_dim, H, rng);
  std::vector<int> edge_widths{2 * H + Graph::kEdgeFeatures};
  for (int i = 0; i < config.edge_layers; ++i) edge_widths.push_back(H);
  s.edge_ = Mlp::create(params, name + ".edge", edge_widths, rng, true);
  s.default_message_ = params.add(name + ".default_message", Matrix::Zero(1, H));
  s.gru_ = GruCell::create(params, name + ".gru", H, H, rng);
  std::vector<int> out_widths;
  for (int i = 0; i < config.out_layers; ++i) out_widths.push_back(H);
  out_widths.push_back(config.out_dim);
  s.output_ = Mlp::create(params, name + ".out", out_widths, rng, false, zero_output);
  return s;
}

Var SceneInteraction::forward(const Binding& b, Var x, const Graph& graph) const {
  Tape& t = b.tape;
  if (t.value(x).rows() != graph.num_nodes) throw Error(ErrorCode::kShapeMismatch, "node count differs from graph");
  const Var h = t.tanh(input_.forward(b, x));
  Var message;
  if (graph.dst.empty()) {
    message = t.segment_max(t.constant(Matrix(0, config_.hidden)), {}, graph.num_nodes, b.get(default_message_));
  } else {
    const Var edge_in = t.concat_cols(
        {t.gather_rows(h, graph.dst), t.gather_rows(h, graph.src), t.constant(graph.edge_features)});
    message = t.segment_max(edge_.forward(b, edge_in), graph.dst, graph.num_nodes, b.get(default_message_));
  }
  return output_.forward(b, gru_.forward(b, message, h));
}

}  // namespace lookout::nn
