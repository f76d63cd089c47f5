#include "hybridflow/hybrid.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>

#include "hybridflow/metrics.hpp"
#include "hybridflow/ops.hpp"

namespace hf::hybrid {

using ad::Tape;
using ad::Tensor;
using ad::Var;

namespace {

std::size_t layer_parameters(const graph::LayerWidths &w) {
  const std::size_t self = w.in * w.hidden + w.hidden + w.hidden * w.out + w.out;
  const std::size_t edge = 2 * w.in * w.hidden + w.hidden + w.hidden * w.out + w.out;
  return self + edge;
}

std::size_t stack_parameters(const std::vector<graph::LayerWidths> &layers) {
  std::size_t total = 0;
  for (const auto &w : layers) total += layer_parameters(w);
  return total;
}

std::size_t inference_parameters(const ModelConfig &c) {
  std::size_t total = stack_parameters(c.short_encoder.layers) + stack_parameters(c.short_decoder.layers);
  if (c.long_encoder) total += stack_parameters(c.long_encoder->layers);
  return total;
}

// "3:32:64,64:64:96"
std::string format_layers(const std::vector<graph::LayerWidths> &layers) {
  std::string out;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (i > 0) out += ',';
    out += std::to_string(layers[i].in) + ':' + std::to_string(layers[i].hidden) + ':' +
           std::to_string(layers[i].out);
  }
  return out;
}

std::size_t parse_size(const std::string &text, const std::string &what) {
  if (text.empty() || text.find_first_not_of("0123456789") != std::string::npos) {
    throw std::runtime_error("checkpoint: bad integer '" + text + "' in " + what);
  }
  return std::stoull(text);
}

std::vector<graph::LayerWidths> parse_layers(const std::string &text, const std::string &what) {
  std::vector<graph::LayerWidths> layers;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t end = std::min(text.find(',', start), text.size());
    const std::string item = text.substr(start, end - start);
    const std::size_t c1 = item.find(':');
    const std::size_t c2 = item.find(':', c1 == std::string::npos ? c1 : c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos) {
      throw std::runtime_error("checkpoint: bad layer widths '" + item + "' in " + what);
    }
    layers.push_back({parse_size(item.substr(0, c1), what),
                      parse_size(item.substr(c1 + 1, c2 - c1 - 1), what),
                      parse_size(item.substr(c2 + 1), what)});
    start = end + 1;
  }
  return layers;
}

const std::string &meta_value(const ad::Checkpoint &ckpt, const std::string &key) {
  auto it = ckpt.meta.find(key);
  if (it == ckpt.meta.end()) throw std::runtime_error("checkpoint: missing meta key '" + key + "'");
  return it->second;
}

void put_encoder(ad::Checkpoint &ckpt, const std::string &name, const graph::EncoderConfig &c) {
  ckpt.meta[name + ".layers"] = format_layers(c.layers);
  ckpt.meta[name + ".k_nn"] = std::to_string(c.k_nn);
}

void put_decoder(ad::Checkpoint &ckpt, const std::string &name, const graph::DecoderConfig &c) {
  ckpt.meta[name + ".layers"] = format_layers(c.layers);
  ckpt.meta[name + ".k_nn"] = std::to_string(c.k_nn);
  ckpt.meta[name + ".kind"] = std::string(graph::to_string(c.kind));
}

graph::EncoderConfig get_encoder(const ad::Checkpoint &ckpt, const std::string &name) {
  graph::EncoderConfig c;
  c.layers = parse_layers(meta_value(ckpt, name + ".layers"), name);
  c.k_nn = parse_size(meta_value(ckpt, name + ".k_nn"), name);
  return c;
}

graph::DecoderConfig get_decoder(const ad::Checkpoint &ckpt, const std::string &name) {
  graph::DecoderConfig c;
  c.layers = parse_layers(meta_value(ckpt, name + ".layers"), name);
  c.k_nn = parse_size(meta_value(ckpt, name + ".k_nn"), name);
  c.kind = graph::parse_decoder_kind(meta_value(ckpt, name + ".kind"));
  return c;
}

Var point_constant(Tape &tape, std::span<const Vec3> points) { return tape.constant(to_tensor(points)); }

void check_points(Var v, std::size_t n, const char *op) {
  if (v.value().rank() != 2 || v.dim(0) != n || v.dim(1) != 3) {
    throw std::invalid_argument(std::string(op) + ": expected [" + std::to_string(n) +
                                "x3], got " + ad::shape_string(v.shape()));
  }
}

} // namespace

Variant parse_variant(std::string_view name) {
  if (name == "hybrid") return Variant::hybrid;
  if (name == "baseline_score" || name == "baseline") return Variant::baseline_score;
  if (name == "fc_decoder") return Variant::fc_decoder;
  if (name == "l2_loss") return Variant::l2_loss;
  throw std::invalid_argument("unknown variant '" + std::string(name) + "'");
}

std::string_view to_string(Variant variant) {
  switch (variant) {
  case Variant::hybrid:
    return "hybrid";
  case Variant::baseline_score:
    return "baseline_score";
  case Variant::fc_decoder:
    return "fc_decoder";
  case Variant::l2_loss:
    return "l2_loss";
  }
  return "unknown";
}

ShortLoss parse_short_loss(std::string_view name) {
  if (name == "emd") return ShortLoss::emd;
  if (name == "l2") return ShortLoss::l2;
  throw std::invalid_argument("unknown loss '" + std::string(name) + "' (expected emd or l2)");
}

std::string_view to_string(ShortLoss loss) { return loss == ShortLoss::emd ? "emd" : "l2"; }

void ModelConfig::validate() const {
  if (long_encoder.has_value() != long_decoder.has_value()) {
    throw std::invalid_argument("model: long encoder and decoder must be configured together");
  }
  short_encoder.validate();
  short_decoder.validate();
  std::size_t expected_in = 3;
  if (long_encoder) {
    long_encoder->validate();
    long_decoder->validate();
    if (long_encoder->in_width() != 3) throw std::invalid_argument("model: long encoder input must be 3");
    if (long_decoder->in_width() != long_encoder->out_width() || long_decoder->out_width() != 3) {
      throw std::invalid_argument("model: long decoder must map encoder features to 3");
    }
    expected_in += long_encoder->out_width();
  }
  if (short_encoder.in_width() != expected_in) {
    throw std::invalid_argument("model: short encoder input must be " + std::to_string(expected_in));
  }
  if (short_decoder.in_width() != short_encoder.out_width() || short_decoder.out_width() != 3) {
    throw std::invalid_argument("model: short decoder must map encoder features to 3");
  }
}

ModelConfig hybrid_model_config(graph::DecoderKind decoder) {
  ModelConfig c;
  c.long_encoder = graph::default_encoder_config(3);
  c.long_decoder = graph::default_decoder_config(c.long_encoder->out_width(), decoder);
  c.short_encoder = graph::default_encoder_config(3 + c.long_encoder->out_width());
  c.short_decoder = graph::default_decoder_config(c.short_encoder.out_width(), decoder);
  return c;
}

ModelConfig baseline_model_config() {
  const std::size_t target = inference_parameters(hybrid_model_config());
  const auto base_enc = graph::default_encoder_config(3);
  const auto base_dec = graph::default_decoder_config(base_enc.out_width(), graph::DecoderKind::graph_conv);
  ModelConfig best;
  std::size_t best_gap = std::numeric_limits<std::size_t>::max();
  // Uniformly widen every internal width (input and output stay at 3).
  for (int percent = 100; percent <= 300; ++percent) {
    auto widen = [percent](std::size_t w) {
      return std::max<std::size_t>(1, (w * static_cast<std::size_t>(percent) + 50) / 100);
    };
    ModelConfig c;
    c.short_encoder = base_enc;
    c.short_decoder = base_dec;
    for (auto &w : c.short_encoder.layers) {
      if (&w != &c.short_encoder.layers.front()) w.in = widen(w.in);
      w.hidden = widen(w.hidden);
      w.out = widen(w.out);
    }
    for (auto &w : c.short_decoder.layers) {
      w.in = widen(w.in);
      w.hidden = widen(w.hidden);
      if (&w != &c.short_decoder.layers.back()) w.out = widen(w.out);
    }
    const std::size_t count = inference_parameters(c);
    const std::size_t gap = count > target ? count - target : target - count;
    if (gap < best_gap) {
      best_gap = gap;
      best = c;
    }
  }
  return best;
}

ModelConfig model_config_for(Variant variant) {
  switch (variant) {
  case Variant::hybrid:
  case Variant::l2_loss:
    return hybrid_model_config(graph::DecoderKind::graph_conv);
  case Variant::fc_decoder:
    return hybrid_model_config(graph::DecoderKind::fully_connected);
  case Variant::baseline_score:
    return baseline_model_config();
  }
  throw std::invalid_argument("unknown variant");
}

HybridModel::HybridModel(const ModelConfig &config, std::uint64_t seed) : config_(config) {
  config_.validate();
  Rng rng(seed);
  if (config_.long_encoder) {
    long_encoder_.emplace(*config_.long_encoder, rng);
    long_decoder_.emplace(*config_.long_decoder, rng);
  }
  short_encoder_ = graph::Encoder(config_.short_encoder, rng);
  short_decoder_ = graph::Decoder(config_.short_decoder, rng);
}

HybridModel::LongOutput HybridModel::long_forward(Var xt) {
  if (!long_encoder_) throw std::logic_error("long_forward: model has no long-range module");
  Var features = long_encoder_->forward(xt);
  return {features, long_decoder_->forward(features)};
}

Var HybridModel::long_features(Var xt) {
  if (!long_encoder_) throw std::logic_error("long_features: model has no long-range module");
  return long_encoder_->forward(xt);
}

Var HybridModel::long_features(Var xt) const {
  if (!long_encoder_) throw std::logic_error("long_features: model has no long-range module");
  return std::as_const(*long_encoder_).forward(xt);
}

namespace {

Var short_input(Var xt, const std::optional<Var> &f_long, bool conditioned) {
  if (conditioned != f_long.has_value()) {
    throw std::invalid_argument(conditioned ? "short_forward: conditioned model needs long features"
                                            : "short_forward: unconditioned model takes no features");
  }
  return f_long ? ad::concat_lastdim(xt, *f_long) : xt;
}

} // namespace

Var HybridModel::short_forward(Var xt, std::optional<Var> f_long) {
  return short_decoder_.forward(short_encoder_.forward(short_input(xt, f_long, conditioned())));
}

Var HybridModel::short_forward(Var xt, std::optional<Var> f_long) const {
  const Var in = short_input(xt, f_long, conditioned());
  return short_decoder_.forward(short_encoder_.forward(in));
}

std::vector<Tensor *> HybridModel::parameters() {
  std::vector<Tensor *> out;
  visit([&](const std::string &, Tensor &t) { out.push_back(&t); });
  return out;
}

std::size_t HybridModel::parameter_count() const {
  std::size_t total = 0;
  visit([&](const std::string &, const Tensor &t) { total += t.numel(); });
  return total;
}

std::size_t HybridModel::inference_parameter_count() const {
  std::size_t total = 0;
  visit([&](const std::string &name, const Tensor &t) {
    if (name.rfind("long_decoder.", 0) != 0) total += t.numel();
  });
  return total;
}

ad::Checkpoint HybridModel::to_checkpoint() const {
  ad::Checkpoint ckpt;
  ckpt.meta["conditioned"] = conditioned() ? "1" : "0";
  if (config_.long_encoder) {
    put_encoder(ckpt, "long_encoder", *config_.long_encoder);
    put_decoder(ckpt, "long_decoder", *config_.long_decoder);
  }
  put_encoder(ckpt, "short_encoder", config_.short_encoder);
  put_decoder(ckpt, "short_decoder", config_.short_decoder);
  visit([&](const std::string &name, const Tensor &t) {
    ckpt.tensors[name] = Tensor(t.shape, t.values);
  });
  return ckpt;
}

HybridModel HybridModel::from_checkpoint(const ad::Checkpoint &ckpt) {
  ModelConfig config;
  const std::string &conditioned = meta_value(ckpt, "conditioned");
  if (conditioned != "0" && conditioned != "1") {
    throw std::runtime_error("checkpoint: bad 'conditioned' value '" + conditioned + "'");
  }
  if (conditioned == "1") {
    config.long_encoder = get_encoder(ckpt, "long_encoder");
    config.long_decoder = get_decoder(ckpt, "long_decoder");
  }
  config.short_encoder = get_encoder(ckpt, "short_encoder");
  config.short_decoder = get_decoder(ckpt, "short_decoder");
  HybridModel model(config, 0);
  std::size_t matched = 0;
  model.visit([&](const std::string &name, Tensor &t) {
    auto it = ckpt.tensors.find(name);
    if (it == ckpt.tensors.end()) throw std::runtime_error("checkpoint: missing tensor '" + name + "'");
    if (it->second.shape != t.shape) {
      throw std::runtime_error("checkpoint: tensor '" + name + "' has shape " +
                               ad::shape_string(it->second.shape) + ", expected " +
                               ad::shape_string(t.shape));
    }
    t.values = it->second.values;
    ++matched;
  });
  if (matched != ckpt.tensors.size()) {
    throw std::runtime_error("checkpoint: " + std::to_string(ckpt.tensors.size() - matched) +
                             " tensors do not belong to the model");
  }
  return model;
}

Tensor to_tensor(std::span<const Vec3> points) {
  std::vector<double> values;
  values.reserve(points.size() * 3);
  for (const auto &p : points) {
    values.push_back(p.x);
    values.push_back(p.y);
    values.push_back(p.z);
  }
  return Tensor({points.size(), 3}, std::move(values));
}

Points to_points(const Tensor &tensor) {
  if (tensor.rank() != 2 || tensor.dim(1) != 3) {
    throw std::invalid_argument("to_points: expected [n x 3], got " + ad::shape_string(tensor.shape));
  }
  Points out(tensor.dim(0));
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = {tensor.values[3 * i], tensor.values[3 * i + 1], tensor.values[3 * i + 2]};
  }
  return out;
}

Var loss_long(Var v_pred, std::span<const Vec3> x0, std::span<const Vec3> x1) {
  if (x0.size() != x1.size()) throw std::invalid_argument("loss_long: x0/x1 size mismatch");
  check_points(v_pred, x0.size(), "loss_long");
  Points target(x0.size());
  for (std::size_t i = 0; i < target.size(); ++i) target[i] = x1[i] - x0[i];
  // mse averages over 3n entries; the loss averages over n points.
  return ad::mse(v_pred, point_constant(v_pred.tape(), target)) * 3.0;
}

Var loss_short_l2(Var s_pred, std::span<const Vec3> xt, std::span<const Vec3> x1) {
  if (xt.size() != x1.size()) throw std::invalid_argument("loss_short_l2: xt/x1 size mismatch");
  check_points(s_pred, xt.size(), "loss_short_l2");
  Points target(xt.size());
  for (std::size_t i = 0; i < target.size(); ++i) target[i] = x1[i] - xt[i];
  return ad::mse(s_pred, point_constant(s_pred.tape(), target)) * 3.0;
}

Var loss_short_emd(Var x_filtered, std::span<const Vec3> x1) {
  check_points(x_filtered, x1.size(), "loss_short_emd");
  const std::size_t n = x1.size();
  const Points current = to_points(x_filtered.value());
  const auto matched = metrics::emd_exact(current, x1).assignment;
  Var target = ad::gather_rows(point_constant(x_filtered.tape(), x1), matched);
  return ad::sum(ad::l2norm_rows(x_filtered - target)) * (1.0 / static_cast<double>(n));
}

Var loss_hybrid(Var short_loss, std::optional<Var> long_loss, double lambda) {
  Var weighted = short_loss * lambda;
  return long_loss ? weighted + *long_loss : weighted;
}

TrainingSample make_training_sample(const Patch &clean_patch, double sigma_h, Rng &rng) {
  if (!(sigma_h >= 0.0) || !std::isfinite(sigma_h)) {
    throw std::invalid_argument("make_training_sample: sigma must be finite and non-negative");
  }
  TrainingSample s;
  s.x1 = clean_patch.points;
  s.x0.reserve(s.x1.size());
  for (const auto &p : s.x1) {
    const double a = rng.normal();
    const double b = rng.normal();
    const double c = rng.normal();
    s.x0.push_back(p + Vec3{a, b, c} * sigma_h);
  }
  s.t = rng.uniform();
  s.xt = interpolate(s.x0, s.x1, s.t);
  return s;
}

} // namespace hf::hybrid
