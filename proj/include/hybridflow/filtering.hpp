#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "hybridflow/geometry.hpp"
#include "hybridflow/hybrid.hpp"

namespace hf::filtering {

struct FilterConfig {
  double alpha = 0.8;
  std::size_t n_steps = 4;
  std::size_t patch_k = 256;
  // Worker threads for patch-level parallelism; results do not depend on it.
  std::size_t threads = 1;

  void validate() const;
};

// states[0] is the input, states[k] the state after k updates; scores[k] is
// the short-module output evaluated at states[k].
struct PatchTrajectory {
  std::vector<Points> states;
  std::vector<Points> scores;

  const Points &output() const { return states.back(); }
};

// Iterates x <- x + alpha * S(x, E_L(x)) for n_steps in the patch's
// normalized frame. The long decoder is never evaluated. Throws
// std::runtime_error naming the step when a non-finite value appears.
PatchTrajectory filter_patch(std::span<const Vec3> xt, const hybrid::HybridModel &model,
                             const FilterConfig &config);

struct FilterResult {
  PointCloud cloud;
  // Per-patch data in reference order; patch points are the filtered,
  // normalized coordinates.
  std::vector<Patch> patches;
  std::vector<PatchTrajectory> trajectories;
};

// Covers the cloud with kNN patches, filters each one and averages every
// point's denormalized copies.
FilterResult filter_cloud(const PointCloud &noisy, const hybrid::HybridModel &model,
                          const FilterConfig &config);

// Stitched cloud after `step` updates (0 <= step <= n_steps). Updates do not
// depend on the total step count, so one run at the largest N yields every
// smaller N as well.
PointCloud stitch_state(const PointCloud &noisy, const FilterResult &result, std::size_t step);

// CSV "patch_id,step,point_index,x,y,z" in world coordinates, where
// point_index is the index in the input cloud.
void write_trajectory_csv(const std::filesystem::path &path, const FilterResult &result);

} // namespace hf::filtering
