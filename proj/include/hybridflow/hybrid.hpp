#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hybridflow/checkpoint.hpp"
#include "hybridflow/geometry.hpp"
#include "hybridflow/graphnet.hpp"
#include "hybridflow/random.hpp"

namespace hf::hybrid {

// Model/training variants compared by the ablation harness.
enum class Variant {
  hybrid,         // conditioned short module, graph decoders, EMD short loss
  baseline_score, // short module only, no long-range conditioning
  fc_decoder,     // hybrid with per-point decoders
  l2_loss,        // hybrid trained with the L2 short loss
};

Variant parse_variant(std::string_view name);
std::string_view to_string(Variant variant);

enum class ShortLoss { emd, l2 };

ShortLoss parse_short_loss(std::string_view name);
std::string_view to_string(ShortLoss loss);

struct ModelConfig {
  // Absent long encoder/decoder configs mean an unconditioned model.
  std::optional<graph::EncoderConfig> long_encoder;
  std::optional<graph::DecoderConfig> long_decoder;
  graph::EncoderConfig short_encoder;
  graph::DecoderConfig short_decoder;

  bool conditioned() const { return long_encoder.has_value(); }
  void validate() const;
};

ModelConfig hybrid_model_config(graph::DecoderKind decoder = graph::DecoderKind::graph_conv);

// Unconditioned short module whose widths are scaled so that its parameter
// count is close to the hybrid model's inference path (long encoder, short
// encoder, short decoder).
ModelConfig baseline_model_config();

ModelConfig model_config_for(Variant variant);

class HybridModel {
public:
  explicit HybridModel(const ModelConfig &config, std::uint64_t seed = 0);

  const ModelConfig &config() const { return config_; }
  bool conditioned() const { return config_.conditioned(); }

  struct LongOutput {
    ad::Var features; // n x d_long
    ad::Var velocity; // n x 3
  };

  // Long encoder followed by the long decoder; training only.
  LongOutput long_forward(ad::Var xt);

  // Long encoder features alone.
  ad::Var long_features(ad::Var xt);
  ad::Var long_features(ad::Var xt) const;

  // Score for the current state. `f_long` is required for conditioned
  // models and must be absent otherwise.
  ad::Var short_forward(ad::Var xt, std::optional<ad::Var> f_long);
  ad::Var short_forward(ad::Var xt, std::optional<ad::Var> f_long) const;

  // Parameter groups: long_encoder.*, long_decoder.*, short_encoder.*,
  // short_decoder.*.
  template <class F> void visit(F &&fn) {
    if (long_encoder_) long_encoder_->visit("long_encoder", fn);
    if (long_decoder_) long_decoder_->visit("long_decoder", fn);
    short_encoder_.visit("short_encoder", fn);
    short_decoder_.visit("short_decoder", fn);
  }
  template <class F> void visit(F &&fn) const {
    if (long_encoder_) long_encoder_->visit("long_encoder", fn);
    if (long_decoder_) long_decoder_->visit("long_decoder", fn);
    short_encoder_.visit("short_encoder", fn);
    short_decoder_.visit("short_decoder", fn);
  }

  std::vector<ad::Tensor *> parameters();
  std::size_t parameter_count() const;
  // Parameters reachable at filtering time (no long decoder).
  std::size_t inference_parameter_count() const;

  ad::Checkpoint to_checkpoint() const;
  static HybridModel from_checkpoint(const ad::Checkpoint &checkpoint);

private:
  ModelConfig config_;
  std::optional<graph::Encoder> long_encoder_;
  std::optional<graph::Decoder> long_decoder_;
  graph::Encoder short_encoder_;
  graph::Decoder short_decoder_;
};

ad::Tensor to_tensor(std::span<const Vec3> points);
Points to_points(const ad::Tensor &tensor);

// Mean over points of |v_pred - (x1 - x0)|^2.
ad::Var loss_long(ad::Var v_pred, std::span<const Vec3> x0, std::span<const Vec3> x1);

// Mean over points of |s_pred - (x1 - xt)|^2.
ad::Var loss_short_l2(ad::Var s_pred, std::span<const Vec3> xt, std::span<const Vec3> x1);

// Minimum over bijections of the summed distances between the filtered and
// clean patches, divided by the point count. The optimal assignment is held
// fixed for differentiation.
ad::Var loss_short_emd(ad::Var x_filtered, std::span<const Vec3> x1);

// lambda * short + long (long absent for unconditioned models).
ad::Var loss_hybrid(ad::Var short_loss, std::optional<ad::Var> long_loss, double lambda);

struct TrainingSample {
  Points x0; // high-noise variant
  Points x1; // clean patch
  double t = 0.0;
  Points xt; // (1 - t) x0 + t x1
};

// sigma_h must already be expressed in the patch's normalized frame.
TrainingSample make_training_sample(const Patch &clean_patch, double sigma_h, Rng &rng);

struct TrainConfig {
  double lambda = 10.0;
  // Fraction of the cloud's bounding-sphere radius.
  double sigma_h = 0.02;
  double learning_rate = 1e-4;
  std::size_t steps = 5000;
  std::size_t patch_k = 256;
  std::uint64_t seed = 0;
  ShortLoss short_loss = ShortLoss::emd;

  void validate() const;
};

struct LossRecord {
  std::size_t step = 0;
  double long_loss = 0.0;
  double short_loss = 0.0;
  double hybrid_loss = 0.0;
};

using StepCallback = std::function<void(const LossRecord &)>;

// One clean patch per step: sample, long/short forward, joint loss,
// backward, and a joint Adam update. Throws std::runtime_error naming the
// step if the loss becomes non-finite.
std::vector<LossRecord> train(HybridModel &model, std::span<const PointCloud> dataset,
                              const TrainConfig &config, const StepCallback &on_step = {});

// CSV with header "step,L_long,L_short,L_hybrid".
void write_loss_csv(const std::filesystem::path &path, std::span<const LossRecord> records);

} // namespace hf::hybrid
