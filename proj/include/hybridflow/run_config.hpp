#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "hybridflow/ablation.hpp"
#include "hybridflow/filtering.hpp"
#include "hybridflow/geometry.hpp"
#include "hybridflow/graphnet.hpp"
#include "hybridflow/hybrid.hpp"
#include "hybridflow/shapes.hpp"

namespace hf {

// Settings for every subcommand. Files use one `key = value` per line with
// '#' comments; keys match the long CLI flags with '-' replaced by '_'.
//
//   key               default     meaning
//   seed              0           model init, sampling, noise and shape seed
//   input             -           input cloud (.xyz)
//   clean             -           clean reference cloud for eval (.xyz)
//   mesh              -           reference mesh for eval (.off, optional)
//   data              -           comma-separated training clouds (.xyz)
//   checkpoint        -           model checkpoint
//   out               -           output file (or stem for gen)
//   dump_trajectory   -           per-step filter trajectory CSV
//   loss_csv          -           training loss CSV (default <checkpoint>.loss.csv)
//   shape             sphere      gen: sphere | torus | cube | plane
//   resolution        5000        gen: number of points
//   size              1           gen: radius / major radius / edge / side
//   minor_radius      0.3         gen: torus tube radius
//   sigma             0.02        noise level, fraction of bounding radius
//   noise_kind        gaussian    gaussian | non_isotropic | uniform | laplace
//   variant           hybrid      hybrid | baseline_score | fc_decoder | l2_loss
//   decoder           graph       graph | fc (overrides the variant's decoder)
//   loss              emd         emd | l2
//   lambda            10          short-loss weight
//   sigma_h           0.02        training high-noise level
//   lr                1e-4        Adam learning rate
//   steps             5000        training steps
//   patch_k           256         points per patch
//   alpha             0.8         update step size
//   n_steps           4           filter iterations
//   threads           1           filter worker threads
//   ablate_variants   all four    comma-separated variants
//   ablate_n          1,2,3,4,6,8 comma-separated N values
//   ablate_lambdas    2,5,10,20   comma-separated lambda values
struct RunConfig {
  std::uint64_t seed = 0;
  std::filesystem::path input;
  std::filesystem::path clean;
  std::filesystem::path mesh;
  std::vector<std::filesystem::path> data;
  std::filesystem::path checkpoint;
  std::filesystem::path out;
  std::filesystem::path dump_trajectory;
  std::filesystem::path loss_csv;

  shapes::ShapeSpec shape;
  NoiseSpec noise{NoiseKind::gaussian, 0.02, 0};
  hybrid::Variant variant = hybrid::Variant::hybrid;
  bool decoder_set = false;
  graph::DecoderKind decoder = graph::DecoderKind::graph_conv;
  bool loss_set = false;
  hybrid::TrainConfig train;
  filtering::FilterConfig filter;
  std::vector<hybrid::Variant> ablate_variants = ablation::AblationConfig{}.variants;
  std::vector<std::size_t> ablate_n = ablation::AblationConfig{}.n_values;
  std::vector<double> ablate_lambdas = ablation::AblationConfig{}.lambdas;

  // Applies one setting; throws std::invalid_argument for unknown keys or
  // malformed values.
  void set(std::string_view key, std::string_view value);

  // Reads a key=value file, applying settings in order.
  void load(const std::filesystem::path &path);

  // Model architecture implied by variant and decoder.
  hybrid::ModelConfig model_config() const;
  hybrid::ShortLoss short_loss() const;

  // Checks that the files a subcommand reads exist and that its outputs can
  // be created, before any work starts.
  void validate_for(std::string_view subcommand) const;
};

std::vector<std::string_view> run_config_keys();

} // namespace hf
