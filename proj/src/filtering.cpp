#include "hybridflow/filtering.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <stdexcept>
#include <string>
#include <thread>

#include "hybridflow/io.hpp"
#include "hybridflow/ops.hpp"

namespace hf::filtering {

void FilterConfig::validate() const {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw std::invalid_argument("filter: alpha must be positive");
  if (n_steps == 0) throw std::invalid_argument("filter: n_steps must be at least 1");
  if (patch_k < 2) throw std::invalid_argument("filter: patch_k must be at least 2");
  if (threads == 0) throw std::invalid_argument("filter: threads must be at least 1");
}

PatchTrajectory filter_patch(std::span<const Vec3> xt, const hybrid::HybridModel &model,
                             const FilterConfig &config) {
  config.validate();
  PatchTrajectory traj;
  traj.states.emplace_back(xt.begin(), xt.end());
  for (std::size_t step = 0; step < config.n_steps; ++step) {
    const Points &current = traj.states.back();
    Points score;
    try {
      ad::Tape tape;
      ad::Var x = tape.constant(hybrid::to_tensor(current));
      std::optional<ad::Var> features;
      if (model.conditioned()) features = model.long_features(x);
      score = hybrid::to_points(model.short_forward(x, features).value());
    } catch (const std::domain_error &e) {
      throw std::runtime_error("filtering produced a non-finite value at step " + std::to_string(step + 1) +
                               ": " + e.what());
    }
    Points next(current.size());
    for (std::size_t i = 0; i < next.size(); ++i) {
      next[i] = current[i] + score[i] * config.alpha;
      if (!is_finite(next[i])) {
        throw std::runtime_error("filtering produced a non-finite value at step " + std::to_string(step + 1));
      }
    }
    traj.scores.push_back(std::move(score));
    traj.states.push_back(std::move(next));
  }
  return traj;
}

FilterResult filter_cloud(const PointCloud &noisy, const hybrid::HybridModel &model,
                          const FilterConfig &config) {
  config.validate();
  if (noisy.size() < config.patch_k) {
    throw std::invalid_argument("filter: cloud has " + std::to_string(noisy.size()) +
                                " points, fewer than patch_k = " + std::to_string(config.patch_k));
  }
  std::size_t widest_k = model.config().short_encoder.k_nn;
  if (model.conditioned()) widest_k = std::max(widest_k, model.config().long_encoder->k_nn);
  if (config.patch_k <= widest_k) {
    throw std::invalid_argument("filter: patch_k = " + std::to_string(config.patch_k) +
                                " must exceed the encoder neighbourhood size " + std::to_string(widest_k));
  }
  const auto refs = sample_reference_points(noisy, config.patch_k);
  FilterResult result{noisy, {}, {}};
  result.patches.resize(refs.size());
  result.trajectories.resize(refs.size());

  // Each patch writes only its own slot, so the output is independent of
  // scheduling.
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  auto worker = [&]() {
    for (std::size_t i = next++; i < refs.size() && !failed; i = next++) {
      try {
        Patch patch = extract_patch(noisy, refs[i], config.patch_k);
        result.trajectories[i] = filter_patch(patch.points, model, config);
        patch.points = result.trajectories[i].output();
        result.patches[i] = std::move(patch);
      } catch (...) {
        if (!failed.exchange(true)) failure = std::current_exception();
      }
    }
  };
  const std::size_t n_threads = std::min(config.threads, refs.size());
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto &t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  result.cloud = stitch(noisy, result.patches);
  return result;
}

PointCloud stitch_state(const PointCloud &noisy, const FilterResult &result, std::size_t step) {
  std::vector<Patch> patches = result.patches;
  for (std::size_t i = 0; i < patches.size(); ++i) {
    const auto &states = result.trajectories.at(i).states;
    if (step >= states.size()) {
      throw std::out_of_range("stitch_state: step " + std::to_string(step) + " beyond trajectory of " +
                              std::to_string(states.size() - 1) + " updates");
    }
    patches[i].points = states[step];
  }
  return stitch(noisy, patches);
}

void write_trajectory_csv(const std::filesystem::path &path, const FilterResult &result) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out << "patch_id,step,point_index,x,y,z\n";
  for (std::size_t p = 0; p < result.trajectories.size(); ++p) {
    const Patch &patch = result.patches[p];
    const auto &states = result.trajectories[p].states;
    for (std::size_t s = 0; s < states.size(); ++s) {
      for (std::size_t i = 0; i < states[s].size(); ++i) {
        const Vec3 w = patch.denormalize(states[s][i]);
        out << p << ',' << s << ',' << patch.source_indices[i] << ',' << io::format_real(w.x) << ','
            << io::format_real(w.y) << ',' << io::format_real(w.z) << '\n';
      }
    }
  }
  if (!out) throw std::runtime_error("failed writing '" + path.string() + "'");
}

} // namespace hf::filtering
