#include "hybridflow/graphnet.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace hf::graph {

using ad::Tape;
using ad::Tensor;
using ad::Var;

namespace {

Var bind(Tape &tape, Tensor &param) { return tape.leaf(param); }
Var bind(Tape &tape, const Tensor &param) { return tape.constant(Tensor(param.shape, param.values)); }

template <class L> Var linear_impl(L &layer, Var x) {
  if (x.value().rank() != 2 || x.dim(1) != layer.in()) {
    throw std::invalid_argument("linear: input shape " + ad::shape_string(x.shape()) +
                                " does not match weight " +
                                ad::shape_string(layer.weight.shape));
  }
  Tape &tape = x.tape();
  return ad::add_bias(ad::matmul(x, bind(tape, layer.weight)), bind(tape, layer.bias));
}

template <class M> Var mlp_impl(M &mlp, Var x) {
  return mlp.fc2.forward(ad::leaky_relu(mlp.fc1.forward(x), kLeakySlope));
}

void check_graph(const DynamicGraph &graph, Var h, std::size_t in_width, const char *op) {
  if (h.value().rank() != 2 || h.dim(1) != in_width) {
    throw std::invalid_argument(std::string(op) + ": feature shape " +
                                ad::shape_string(h.shape()) + " does not match layer input width " +
                                std::to_string(in_width));
  }
  if (graph.nodes() != h.dim(0)) {
    throw std::invalid_argument(std::string(op) + ": graph has " + std::to_string(graph.nodes()) +
                                " nodes, features have " + std::to_string(h.dim(0)) + " rows");
  }
}

std::vector<std::size_t> edge_centers(const DynamicGraph &graph) {
  std::vector<std::size_t> centers(graph.neighbors.size());
  for (std::size_t i = 0; i < centers.size(); ++i) centers[i] = i / graph.k;
  return centers;
}

Var max_over_neighbors(Var edge_values, const DynamicGraph &graph) {
  const std::size_t n = graph.nodes();
  const std::size_t width = edge_values.dim(1);
  return ad::reduce_max_over_axis(ad::reshape(edge_values, {n, graph.k, width}), 1).values;
}

// The first edge linear on (h_i || h_j - h_i) with weight [W_top; W_bot]
// equals h_i (W_top - W_bot) + h_j W_bot, so it is evaluated per node and
// gathered per edge.
template <class L> Var edge_conv_impl(L &layer, Var h, const DynamicGraph &graph) {
  check_graph(graph, h, layer.in(), "edge_conv");
  const std::size_t d = layer.in();
  Var self = layer.self_mlp.forward(h);

  Tape &tape = h.tape();
  Var w1 = bind(tape, layer.edge_mlp.fc1.weight);
  Var b1 = bind(tape, layer.edge_mlp.fc1.bias);
  Var top = ad::slice_rows(w1, 0, d);
  Var bottom = ad::slice_rows(w1, d, 2 * d);
  Var per_center = ad::matmul(h, top - bottom);
  Var per_neighbor = ad::matmul(h, bottom);
  Var hidden = ad::gather_sum_bias_leaky(per_center, edge_centers(graph), per_neighbor,
                                         graph.neighbors, b1, kLeakySlope);
  Var pooled = ad::grouped_max_affine(hidden,
                                      bind(tape, layer.edge_mlp.fc2.weight),
                                      bind(tape, layer.edge_mlp.fc2.bias), graph.k);

  Var out = self + pooled;
  return layer.activate ? ad::leaky_relu(out, kLeakySlope) : out;
}

template <class L> Var pointwise_impl(L &layer, Var h) {
  Var out = layer.self_mlp.forward(h) + layer.point_mlp.forward(ad::concat_lastdim(h, h));
  return layer.activate ? ad::leaky_relu(out, kLeakySlope) : out;
}

template <class Layers> Var encoder_impl(Layers &layers, std::size_t k_nn, Var x) {
  Var h = x;
  for (auto &layer : layers) {
    const DynamicGraph graph = build_dynamic_graph(h.value(), k_nn);
    h = layer.forward(h, graph);
  }
  return h;
}

template <class Point> Var pointwise_stack(Point &layers, Var x) {
  Var h = x;
  for (auto &layer : layers) {
    h = layer.forward(h);
  }
  return h;
}

void validate_chain(const std::vector<LayerWidths> &layers, const char *what) {
  if (layers.empty()) {
    throw std::invalid_argument(std::string(what) + ": at least one layer required");
  }
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto &w = layers[i];
    if (w.in == 0 || w.hidden == 0 || w.out == 0) {
      throw std::invalid_argument(std::string(what) + ": layer " + std::to_string(i) +
                                  " has a zero width");
    }
    if (i > 0 && layers[i - 1].out != w.in) {
      throw std::invalid_argument(std::string(what) + ": layer " + std::to_string(i) +
                                  " input width " + std::to_string(w.in) +
                                  " does not match previous output " +
                                  std::to_string(layers[i - 1].out));
    }
  }
}

} // namespace

DynamicGraph build_dynamic_graph(const Tensor &features, std::size_t k_nn) {
  if (features.rank() != 2) {
    throw std::invalid_argument("build_dynamic_graph: features must be n x d, got " +
                                ad::shape_string(features.shape));
  }
  const std::size_t n = features.dim(0);
  const std::size_t d = features.dim(1);
  if (k_nn == 0 || k_nn >= n) {
    throw std::invalid_argument("build_dynamic_graph: k_nn = " + std::to_string(k_nn) +
                                " must be in [1, n) with n = " + std::to_string(n));
  }
  DynamicGraph graph;
  graph.k = k_nn;
  graph.neighbors.resize(n * k_nn);
  std::vector<std::pair<double, std::size_t>> dist(n - 1);
  // Feature-major copy so the distance accumulation runs contiguously over
  // nodes, summing coordinates in order for every pair.
  std::vector<double> by_feature(n * d);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t c = 0; c < d; ++c) by_feature[c * n + j] = features.values[j * d + c];
  }
  std::vector<double> sq(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::fill(sq.begin(), sq.end(), 0.0);
    for (std::size_t c = 0; c < d; ++c) {
      const double fi = features.values[i * d + c];
      const double *col = by_feature.data() + c * n;
      for (std::size_t j = 0; j < n; ++j) {
        const double diff = col[j] - fi;
        sq[j] += diff * diff;
      }
    }
    std::size_t slot = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) dist[slot++] = {sq[j], j};
    }
    // (distance, index) pairs are totally ordered, so ties go to the lower index.
    const auto kth = dist.begin() + static_cast<std::ptrdiff_t>(k_nn);
    std::nth_element(dist.begin(), kth - 1, dist.end());
    std::sort(dist.begin(), kth);
    for (std::size_t r = 0; r < k_nn; ++r) graph.neighbors[i * k_nn + r] = dist[r].second;
  }
  return graph;
}

Linear Linear::create(std::size_t in, std::size_t out, Rng &rng) {
  // Kaiming-uniform bound for leaky_relu(0.1).
  const double bound =
      std::sqrt(6.0 / ((1.0 + kLeakySlope * kLeakySlope) * static_cast<double>(in)));
  Linear layer;
  layer.weight = Tensor::zeros({in, out}, true);
  for (double &w : layer.weight.values) w = rng.uniform(-bound, bound);
  layer.bias = Tensor::zeros({out}, true);
  return layer;
}

Var Linear::forward(Var x) { return linear_impl(*this, x); }
Var Linear::forward(Var x) const { return linear_impl(*this, x); }

Mlp Mlp::create(std::size_t in, std::size_t hidden, std::size_t out, Rng &rng) {
  Mlp mlp;
  mlp.fc1 = Linear::create(in, hidden, rng);
  mlp.fc2 = Linear::create(hidden, out, rng);
  return mlp;
}

Var Mlp::forward(Var x) { return mlp_impl(*this, x); }
Var Mlp::forward(Var x) const { return mlp_impl(*this, x); }

EdgeConvLayer EdgeConvLayer::create(const LayerWidths &w, bool activate, Rng &rng) {
  EdgeConvLayer layer;
  layer.self_mlp = Mlp::create(w.in, w.hidden, w.out, rng);
  layer.edge_mlp = Mlp::create(2 * w.in, w.hidden, w.out, rng);
  layer.activate = activate;
  return layer;
}

Var EdgeConvLayer::forward(Var h, const DynamicGraph &graph) {
  return edge_conv_impl(*this, h, graph);
}
Var EdgeConvLayer::forward(Var h, const DynamicGraph &graph) const {
  return edge_conv_impl(*this, h, graph);
}

Var EdgeConvLayer::forward_by_concat(Var h, const DynamicGraph &graph) {
  check_graph(graph, h, in(), "edge_conv");
  Var self = self_mlp.forward(h);
  Var center = ad::gather_rows(h, edge_centers(graph));
  Var neighbor = ad::gather_rows(h, graph.neighbors);
  Var edge = edge_mlp.forward(ad::concat_lastdim(center, neighbor - center));
  Var out = self + max_over_neighbors(edge, graph);
  return activate ? ad::leaky_relu(out, kLeakySlope) : out;
}

PointwiseLayer PointwiseLayer::create(const LayerWidths &w, bool activate, Rng &rng) {
  PointwiseLayer layer;
  layer.self_mlp = Mlp::create(w.in, w.hidden, w.out, rng);
  layer.point_mlp = Mlp::create(2 * w.in, w.hidden, w.out, rng);
  layer.activate = activate;
  return layer;
}

Var PointwiseLayer::forward(Var h) { return pointwise_impl(*this, h); }
Var PointwiseLayer::forward(Var h) const { return pointwise_impl(*this, h); }

void EncoderConfig::validate() const {
  validate_chain(layers, "encoder config");
  if (k_nn == 0) throw std::invalid_argument("encoder config: k_nn must be >= 1");
}

void DecoderConfig::validate() const {
  validate_chain(layers, "decoder config");
  if (k_nn == 0) throw std::invalid_argument("decoder config: k_nn must be >= 1");
}

DecoderKind parse_decoder_kind(std::string_view name) {
  if (name == "graph" || name == "graph_conv") return DecoderKind::graph_conv;
  if (name == "fc" || name == "fully_connected") return DecoderKind::fully_connected;
  throw std::invalid_argument("unknown decoder kind '" + std::string(name) + "'");
}

std::string_view to_string(DecoderKind kind) {
  return kind == DecoderKind::graph_conv ? "graph" : "fc";
}

EncoderConfig default_encoder_config(std::size_t in_width) {
  return EncoderConfig{{{in_width, 32, 64}, {64, 64, 96}}, 32};
}

DecoderConfig default_decoder_config(std::size_t in_width, DecoderKind kind) {
  return DecoderConfig{{{in_width, 64, 32}, {32, 32, 3}}, 8, kind};
}

Encoder::Encoder(const EncoderConfig &config, Rng &rng) : config_(config) {
  config_.validate();
  for (const auto &w : config_.layers) {
    layers_.push_back(EdgeConvLayer::create(w, true, rng));
  }
}

Var Encoder::forward(Var x) { return encoder_impl(layers_, config_.k_nn, x); }
Var Encoder::forward(Var x) const { return encoder_impl(layers_, config_.k_nn, x); }

Decoder::Decoder(const DecoderConfig &config, Rng &rng) : config_(config) {
  config_.validate();
  for (std::size_t i = 0; i < config_.layers.size(); ++i) {
    const bool last = i + 1 == config_.layers.size();
    if (config_.kind == DecoderKind::graph_conv) {
      graph_layers_.push_back(EdgeConvLayer::create(config_.layers[i], !last, rng));
    } else {
      point_layers_.push_back(PointwiseLayer::create(config_.layers[i], !last, rng));
    }
  }
}

Var Decoder::forward(Var features) {
  return config_.kind == DecoderKind::graph_conv
             ? encoder_impl(graph_layers_, config_.k_nn, features)
             : pointwise_stack(point_layers_, features);
}

Var Decoder::forward(Var features) const {
  return config_.kind == DecoderKind::graph_conv
             ? encoder_impl(graph_layers_, config_.k_nn, features)
             : pointwise_stack(point_layers_, features);
}

} // namespace hf::graph
