#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "hybridflow/tensor.hpp"

namespace hf::ad {

struct AdamOptions {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  AdamOptions options;
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
  std::uint64_t step = 0;

  AdamState() = default;
  AdamState(AdamOptions opts, std::span<Tensor *const> params);
};

// One bias-corrected Adam update of every parameter from its grad; a
// parameter without grad is treated as having zero gradient. Throws on
// moment/parameter shape mismatch.
void adam_step(std::span<Tensor *const> params, AdamState &state);

} // namespace hf::ad
