#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>

#include "hybridflow/adam.hpp"
#include "hybridflow/hybrid.hpp"
#include "hybridflow/io.hpp"
#include "hybridflow/ops.hpp"

namespace hf::hybrid {

void TrainConfig::validate() const {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw std::invalid_argument("train: lambda must be positive");
  if (!(sigma_h > 0.0) || !std::isfinite(sigma_h)) throw std::invalid_argument("train: sigma_h must be positive");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw std::invalid_argument("train: learning rate must be positive");
  }
  if (patch_k < 2) throw std::invalid_argument("train: patch_k must be at least 2");
}

std::vector<LossRecord> train(HybridModel &model, std::span<const PointCloud> dataset,
                              const TrainConfig &config, const StepCallback &on_step) {
  config.validate();
  if (dataset.empty()) throw std::invalid_argument("train: empty dataset");
  std::vector<double> radii;
  for (const auto &cloud : dataset) {
    if (cloud.size() < config.patch_k) {
      throw std::invalid_argument("train: cloud has " + std::to_string(cloud.size()) +
                                  " points, fewer than patch_k = " + std::to_string(config.patch_k));
    }
    radii.push_back(bounding_sphere_radius(cloud));
  }

  std::size_t widest_k = model.config().short_encoder.k_nn;
  if (model.conditioned()) widest_k = std::max(widest_k, model.config().long_encoder->k_nn);
  if (config.patch_k <= widest_k) {
    throw std::invalid_argument("train: patch_k = " + std::to_string(config.patch_k) +
                                " must exceed the encoder neighbourhood size " + std::to_string(widest_k));
  }

  const auto params = model.parameters();
  ad::AdamState adam(ad::AdamOptions{.learning_rate = config.learning_rate}, params);
  Rng rng(config.seed);
  std::vector<LossRecord> records;
  records.reserve(config.steps);

  for (std::size_t step = 0; step < config.steps; ++step) {
    const std::size_t which = rng.index(dataset.size());
    const PointCloud &cloud = dataset[which];
    const Patch patch = extract_patch(cloud, rng.index(cloud.size()), config.patch_k);
    const TrainingSample sample = make_training_sample(patch, config.sigma_h * radii[which] / patch.scale, rng);

    for (auto *p : params) p->zero_grad();
    LossRecord record;
    record.step = step;
    try {
      ad::Tape tape;
      ad::Var xt = tape.constant(to_tensor(sample.xt));
      std::optional<ad::Var> long_loss;
      std::optional<ad::Var> features;
      if (model.conditioned()) {
        const auto out = model.long_forward(xt);
        features = out.features;
        long_loss = loss_long(out.velocity, sample.x0, sample.x1);
      }
      ad::Var score = model.short_forward(xt, features);
      ad::Var short_loss = config.short_loss == ShortLoss::emd
                               ? loss_short_emd(xt + score, sample.x1)
                               : loss_short_l2(score, sample.xt, sample.x1);
      ad::Var total = loss_hybrid(short_loss, long_loss, config.lambda);
      record.long_loss = long_loss ? long_loss->value().item() : 0.0;
      record.short_loss = short_loss.value().item();
      record.hybrid_loss = total.value().item();
      tape.backward(total);
    } catch (const std::domain_error &e) {
      throw std::runtime_error("training diverged at step " + std::to_string(step) + ": " + e.what());
    }
    ad::adam_step(params, adam);
    records.push_back(record);
    if (on_step) on_step(record);
  }
  return records;
}

void write_loss_csv(const std::filesystem::path &path, std::span<const LossRecord> records) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out << "step,L_long,L_short,L_hybrid\n";
  for (const auto &r : records) {
    out << r.step << ',' << io::format_real(r.long_loss) << ',' << io::format_real(r.short_loss) << ','
        << io::format_real(r.hybrid_loss) << '\n';
  }
  if (!out) throw std::runtime_error("failed writing '" + path.string() + "'");
}

} // namespace hf::hybrid
