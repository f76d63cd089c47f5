#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "hybridflow/filtering.hpp"
#include "hybridflow/geometry.hpp"
#include "hybridflow/hybrid.hpp"
#include "hybridflow/shapes.hpp"

namespace hf::ablation {

// Sphere and torus clouds used for training; shape seeds are seed + 1 and
// seed + 2.
std::vector<shapes::Shape> training_corpus(std::size_t resolution, std::uint64_t seed);

struct EvalCase {
  std::string name;
  shapes::Shape clean;
  PointCloud noisy;
};

// Held-out clouds (shape seeds seed + 101, ...) perturbed by `noise` with
// noise seeds noise.seed + 0, 1, ...
std::vector<EvalCase> held_out_cases(std::span<const shapes::ShapeKind> kinds, std::size_t resolution,
                                     const NoiseSpec &noise, std::uint64_t seed);

struct AblationConfig {
  std::vector<hybrid::Variant> variants = {hybrid::Variant::baseline_score, hybrid::Variant::fc_decoder,
                                           hybrid::Variant::l2_loss, hybrid::Variant::hybrid};
  std::vector<std::size_t> n_values = {1, 2, 3, 4, 6, 8};
  std::vector<double> lambdas = {2.0, 5.0, 10.0, 20.0};
  // lambda and short_loss are set per grid cell; seed drives sampling.
  hybrid::TrainConfig train;
  // n_steps is set per grid cell.
  filtering::FilterConfig filter;
  std::size_t resolution = 5000;
  std::vector<shapes::ShapeKind> test_shapes = {shapes::ShapeKind::sphere, shapes::ShapeKind::torus};
  NoiseSpec test_noise{NoiseKind::gaussian, 0.02, 1000};
  // Model initialization and data generation.
  std::uint64_t seed = 0;

  void validate() const;
};

struct AblationRow {
  hybrid::Variant variant = hybrid::Variant::hybrid;
  double lambda = 0.0;
  std::size_t n_steps = 0;
  double alpha = 0.0;
  double sigma = 0.0;
  std::size_t parameters = 0;
  // Means over the held-out cases.
  double cd = 0.0;
  double p2m = 0.0;
  double cd_noisy = 0.0;
};

using Logger = std::function<void(const std::string &)>;

// Trains one model per (variant, lambda) with identical seeds and budget,
// then evaluates every N. Rows are ordered variant-major, then lambda, then N.
std::vector<AblationRow> run_ablation(const AblationConfig &config, const Logger &log = {});

// CSV "variant,lambda,n_steps,alpha,sigma,parameters,cd_x1e4,p2m_x1e4,cd_noisy_x1e4".
void write_ablation_csv(const std::filesystem::path &path, std::span<const AblationRow> rows);

} // namespace hf::ablation
