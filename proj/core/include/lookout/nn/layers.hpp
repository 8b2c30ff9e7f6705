#pragma once

// Dense layers, a GRU cell and the scene interaction module: one round of
// message passing over fully connected actor graphs.

#include "lookout/geom.hpp"
#include "lookout/nn/tape.hpp"
#include "lookout/rng.hpp"

#include <string>
#include <vector>

namespace lookout::nn {

/// Tape plus the parameter set a model reads from. Gradients flow into the
/// parameters only for a trainable binding.
struct Binding {
  Tape& tape;
  const ParameterSet& params;
  ParameterSet* trainable = nullptr;

  static Binding train(Tape& tape, ParameterSet& params) { return {tape, params, &params}; }
  static Binding frozen(Tape& tape, const ParameterSet& params) { return {tape, params, nullptr}; }

  Var get(int index) const {
    return trainable ? tape.param(*trainable, index, true) : tape.param(params, index);
  }
};

struct Linear {
  int weight = -1;
  int bias = -1;
  int in = 0;
  int out = 0;

  /// Xavier-uniform weights and zero bias; `zero` gives all-zero weights.
  static Linear create(ParameterSet& params, const std::string& name, int in, int out, Rng& rng,
                       bool zero = false);
  Var forward(const Binding& b, Var x) const;
};

/// Linear layers with tanh between them (and after the last one when
/// `final_tanh` is set).
struct Mlp {
  std::vector<Linear> layers;
  bool final_tanh = false;

  static Mlp create(ParameterSet& params, const std::string& name, const std::vector<int>& widths,
                    Rng& rng, bool final_tanh = false, bool zero_last = false);
  Var forward(const Binding& b, Var x) const;
};

struct GruCell {
  Linear input_gates;   // in -> 3H (update, reset, candidate)
  Linear hidden_gates;  // H -> 2H (update, reset)
  Linear hidden_cand;   // H -> H
  int hidden = 0;

  static GruCell create(ParameterSet& params, const std::string& name, int in, int hidden, Rng& rng);
  Var forward(const Binding& b, Var x, Var h) const;
};

/// Fully connected graphs over disjoint node blocks; edges never cross
/// blocks. Edge features describe the source in the destination's frame.
struct Graph {
  int num_nodes = 0;
  std::vector<int> dst;
  std::vector<int> src;
  Matrix edge_features;  // E x kEdgeFeatures

  static constexpr int kEdgeFeatures = 5;
  static constexpr double kDistanceScale = 20.0;

  static Graph build(const std::vector<Pose2>& poses, const std::vector<int>& block);
  /// `copies` blocks that each repeat the same poses.
  static Graph replicated(const std::vector<Pose2>& poses, int copies);
};

struct SimConfig {
  int in_dim = 0;
  int hidden = 64;
  int out_dim = 0;
  int edge_layers = 3;
  int out_layers = 2;
};

class SceneInteraction {
 public:
  SceneInteraction() = default;
  /// With `zero_output` the final layer starts at zero.
  static SceneInteraction create(ParameterSet& params, const std::string& name, const SimConfig& config,
                                 Rng& rng, bool zero_output = false);

  const SimConfig& config() const { return config_; }
  /// x: num_nodes x in_dim -> num_nodes x out_dim.
  Var forward(const Binding& b, Var x, const Graph& graph) const;

 private:
  SimConfig config_;
  Linear input_;
  Mlp edge_;
  int default_message_ = -1;
  GruCell gru_;
  Mlp output_;
};

}  // namespace lookout::nn
