#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "hybridflow/ops.hpp"
#include "hybridflow/random.hpp"
#include "hybridflow/tensor.hpp"

namespace hf::graph {

inline constexpr double kLeakySlope = 0.1;

// Per-node neighbour lists over a feature space, row-major n x k.
struct DynamicGraph {
  std::size_t k = 0;
  std::vector<std::size_t> neighbors;

  std::size_t nodes() const { return k == 0 ? 0 : neighbors.size() / k; }
  std::span<const std::size_t> of(std::size_t i) const {
    return std::span<const std::size_t>(neighbors).subspan(i * k, k);
  }
};

// k nearest neighbours of every row of an n x d feature matrix by Euclidean
// distance, self excluded, ties to the lower index. Requires k < n.
DynamicGraph build_dynamic_graph(const ad::Tensor &features, std::size_t k_nn);

// Parameters bound through a non-const module become tape leaves that
// receive gradients; through a const module they are recorded as constants.
struct Linear {
  ad::Tensor weight; // in x out
  ad::Tensor bias;   // out

  static Linear create(std::size_t in, std::size_t out, Rng &rng);
  std::size_t in() const { return weight.dim(0); }
  std::size_t out() const { return weight.dim(1); }

  ad::Var forward(ad::Var x);
  ad::Var forward(ad::Var x) const;

  // fn(name, tensor) for every parameter; const-ness follows the module.
  template <class F> void visit(const std::string &prefix, F &&fn) {
    fn(prefix + ".weight", weight);
    fn(prefix + ".bias", bias);
  }
  template <class F> void visit(const std::string &prefix, F &&fn) const {
    fn(prefix + ".weight", weight);
    fn(prefix + ".bias", bias);
  }
};

// linear -> leaky_relu(0.1) -> linear
struct Mlp {
  Linear fc1;
  Linear fc2;

  static Mlp create(std::size_t in, std::size_t hidden, std::size_t out, Rng &rng);

  ad::Var forward(ad::Var x);
  ad::Var forward(ad::Var x) const;

  template <class F> void visit(const std::string &prefix, F &&fn) {
    fc1.visit(prefix + ".fc1", fn);
    fc2.visit(prefix + ".fc2", fn);
  }
  template <class F> void visit(const std::string &prefix, F &&fn) const {
    fc1.visit(prefix + ".fc1", fn);
    fc2.visit(prefix + ".fc2", fn);
  }
};

struct LayerWidths {
  std::size_t in = 0;
  std::size_t hidden = 0;
  std::size_t out = 0;
  friend bool operator==(const LayerWidths &, const LayerWidths &) = default;
};

// h_i' = MLP_self(h_i) + max_{j in N(i)} MLP_edge(h_i || h_j - h_i),
// optionally followed by leaky_relu.
struct EdgeConvLayer {
  Mlp self_mlp;
  Mlp edge_mlp; // input width 2 * in
  bool activate = true;

  static EdgeConvLayer create(const LayerWidths &w, bool activate, Rng &rng);
  std::size_t in() const { return self_mlp.fc1.in(); }
  std::size_t out() const { return self_mlp.fc2.out(); }

  ad::Var forward(ad::Var h, const DynamicGraph &graph);
  ad::Var forward(ad::Var h, const DynamicGraph &graph) const;

  // Same map evaluated by materializing every (h_i || h_j - h_i) edge row.
  // Slower; kept as an independent route for verification.
  ad::Var forward_by_concat(ad::Var h, const DynamicGraph &graph);

  template <class F> void visit(const std::string &prefix, F &&fn) {
    self_mlp.visit(prefix + ".self", fn);
    edge_mlp.visit(prefix + ".edge", fn);
  }
  template <class F> void visit(const std::string &prefix, F &&fn) const {
    self_mlp.visit(prefix + ".self", fn);
    edge_mlp.visit(prefix + ".edge", fn);
  }
};

// Per-point stand-in for an EdgeConv layer with identical widths and
// parameter count: MLP_self(h_i) + MLP_point(h_i || h_i).
struct PointwiseLayer {
  Mlp self_mlp;
  Mlp point_mlp; // input width 2 * in
  bool activate = true;

  static PointwiseLayer create(const LayerWidths &w, bool activate, Rng &rng);

  ad::Var forward(ad::Var h);
  ad::Var forward(ad::Var h) const;

  template <class F> void visit(const std::string &prefix, F &&fn) {
    self_mlp.visit(prefix + ".self", fn);
    point_mlp.visit(prefix + ".point", fn);
  }
  template <class F> void visit(const std::string &prefix, F &&fn) const {
    self_mlp.visit(prefix + ".self", fn);
    point_mlp.visit(prefix + ".point", fn);
  }
};

struct EncoderConfig {
  std::vector<LayerWidths> layers;
  std::size_t k_nn = 32;

  std::size_t in_width() const { return layers.front().in; }
  std::size_t out_width() const { return layers.back().out; }
  void validate() const;
};

enum class DecoderKind { graph_conv, fully_connected };

DecoderKind parse_decoder_kind(std::string_view name);
std::string_view to_string(DecoderKind kind);

struct DecoderConfig {
  std::vector<LayerWidths> layers;
  std::size_t k_nn = 8;
  DecoderKind kind = DecoderKind::graph_conv;

  std::size_t in_width() const { return layers.front().in; }
  std::size_t out_width() const { return layers.back().out; }
  void validate() const;
};

// Desk-scale defaults: encoder 3 -> (32) -> 64 -> (64) -> 96 and decoder
// d -> (64) -> 32 -> (32) -> 3, parenthesized values being MLP hidden widths.
EncoderConfig default_encoder_config(std::size_t in_width);
DecoderConfig default_decoder_config(std::size_t in_width, DecoderKind kind);

// Stack of EdgeConv layers; the graph is rebuilt from the current features
// before every layer.
class Encoder {
public:
  Encoder() = default;
  Encoder(const EncoderConfig &config, Rng &rng);

  const EncoderConfig &config() const { return config_; }
  ad::Var forward(ad::Var x);
  ad::Var forward(ad::Var x) const;

  template <class F> void visit(const std::string &prefix, F &&fn) {
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      layers_[i].visit(prefix + ".layer" + std::to_string(i), fn);
    }
  }
  template <class F> void visit(const std::string &prefix, F &&fn) const {
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      layers_[i].visit(prefix + ".layer" + std::to_string(i), fn);
    }
  }

private:
  EncoderConfig config_;
  std::vector<EdgeConvLayer> layers_;
};

// Graph-convolutional (dynamic EdgeConv) or per-point decoder producing
// unconstrained n x out displacements; the last layer has no activation.
class Decoder {
public:
  Decoder() = default;
  Decoder(const DecoderConfig &config, Rng &rng);

  const DecoderConfig &config() const { return config_; }
  ad::Var forward(ad::Var features);
  ad::Var forward(ad::Var features) const;

  template <class F> void visit(const std::string &prefix, F &&fn) {
    for (std::size_t i = 0; i < graph_layers_.size(); ++i) {
      graph_layers_[i].visit(prefix + ".layer" + std::to_string(i), fn);
    }
    for (std::size_t i = 0; i < point_layers_.size(); ++i) {
      point_layers_[i].visit(prefix + ".layer" + std::to_string(i), fn);
    }
  }
  template <class F> void visit(const std::string &prefix, F &&fn) const {
    for (std::size_t i = 0; i < graph_layers_.size(); ++i) {
      graph_layers_[i].visit(prefix + ".layer" + std::to_string(i), fn);
    }
    for (std::size_t i = 0; i < point_layers_.size(); ++i) {
      point_layers_[i].visit(prefix + ".layer" + std::to_string(i), fn);
    }
  }

private:
  DecoderConfig config_;
  std::vector<EdgeConvLayer> graph_layers_;
  std::vector<PointwiseLayer> point_layers_;
};

} // namespace hf::graph
