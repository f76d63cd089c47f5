#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <string>

#include "hybridflow/filtering.hpp"
#include "hybridflow/shapes.hpp"

using namespace hf;
using namespace hf::filtering;
using hybrid::HybridModel;

namespace {

hybrid::ModelConfig small_config(bool conditioned) {
  hybrid::ModelConfig c;
  if (conditioned) {
    c.long_encoder = graph::EncoderConfig{{{3, 8, 8}, {8, 8, 6}}, 6};
    c.long_decoder = graph::DecoderConfig{{{6, 8, 6}, {6, 6, 3}}, 4, graph::DecoderKind::graph_conv};
  }
  c.short_encoder = graph::EncoderConfig{{{conditioned ? 9u : 3u, 8, 8}, {8, 8, 6}}, 6};
  c.short_decoder = graph::DecoderConfig{{{6, 8, 6}, {6, 6, 3}}, 4, graph::DecoderKind::graph_conv};
  return c;
}

// Random initial weights give scores of order one in the normalized frame;
// shrink the output layer so trajectories stay in a sensible range.
HybridModel small_model(bool conditioned, std::uint64_t seed) {
  HybridModel m(small_config(conditioned), seed);
  m.visit([](const std::string &name, ad::Tensor &t) {
    if (name.starts_with("short_decoder.layer1") && name.find("fc2") != std::string::npos) {
      for (double &v : t.values) v *= 0.1;
    }
  });
  return m;
}

PointCloud noisy_sphere(std::size_t n, std::uint64_t seed) {
  const auto shape = shapes::generate({shapes::ShapeKind::sphere, n, 1.0, 0.3, seed});
  return add_noise(shape.cloud, {NoiseKind::gaussian, 0.02, seed + 1});
}

double max_abs_diff(std::span<const Vec3> a, std::span<const Vec3> b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const Vec3 d = a[i] - b[i];
    worst = std::max({worst, std::abs(d.x), std::abs(d.y), std::abs(d.z)});
  }
  return worst;
}

} // namespace

TEST_CASE("filter configuration is validated") {
  FilterConfig c;
  CHECK_NOTHROW(c.validate());
  c.alpha = 0.0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = {};
  c.n_steps = 0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = {};
  c.threads = 0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);

  const HybridModel model = small_model(true, 0);
  FilterConfig big;
  big.patch_k = 500;
  CHECK_THROWS_AS(filter_cloud(noisy_sphere(300, 1), model, big), std::invalid_argument);
  FilterConfig tight;
  tight.patch_k = 6; // equals the encoder neighbourhood size
  CHECK_THROWS_AS(filter_cloud(noisy_sphere(300, 1), model, tight), std::invalid_argument);
}

TEST_CASE("every trajectory telescopes to its summed scores") {
  const HybridModel model = small_model(true, 1);
  FilterConfig c;
  c.patch_k = 64;
  c.n_steps = 5;
  c.alpha = 0.7;
  const FilterResult r = filter_cloud(noisy_sphere(600, 2), model, c);
  REQUIRE_FALSE(r.trajectories.empty());
  double worst = 0.0;
  for (const auto &traj : r.trajectories) {
    REQUIRE(traj.states.size() == 6);
    REQUIRE(traj.scores.size() == 5);
    Points summed = traj.states.front();
    for (const auto &s : traj.scores) {
      for (std::size_t i = 0; i < summed.size(); ++i) summed[i] += s[i] * c.alpha;
    }
    worst = std::max(worst, max_abs_diff(summed, traj.output()));
    // The closed form from the start state, accumulating the scores first.
    Points total(summed.size());
    for (const auto &s : traj.scores) {
      for (std::size_t i = 0; i < total.size(); ++i) total[i] += s[i];
    }
    Points closed(summed.size());
    for (std::size_t i = 0; i < closed.size(); ++i) closed[i] = traj.states.front()[i] + total[i] * c.alpha;
    worst = std::max(worst, max_abs_diff(closed, traj.output()));
  }
  CHECK(worst <= 1e-12);
}

TEST_CASE("a single step is linear in alpha") {
  const HybridModel model = small_model(true, 3);
  Rng rng(3);
  Points x;
  for (int i = 0; i < 48; ++i) x.push_back({rng.normal() * 0.3, rng.normal() * 0.3, rng.normal() * 0.3});
  FilterConfig c;
  c.n_steps = 1;
  c.alpha = 1.0;
  const PatchTrajectory unit = filter_patch(x, model, c);
  for (double alpha : {0.1, 0.5, 0.8, 2.0}) {
    c.alpha = alpha;
    const PatchTrajectory t = filter_patch(x, model, c);
    CHECK(t.scores[0] == unit.scores[0]);
    for (std::size_t i = 0; i < x.size(); ++i) {
      const Vec3 expect = x[i] + unit.scores[0][i] * alpha;
      CHECK(t.output()[i].x == expect.x);
      CHECK(t.output()[i].y == expect.y);
      CHECK(t.output()[i].z == expect.z);
    }
  }
}

TEST_CASE("a model with a zero short decoder leaves the cloud unchanged") {
  HybridModel model = small_model(true, 4);
  model.visit([](const std::string &name, ad::Tensor &t) {
    if (name.starts_with("short_decoder")) std::fill(t.values.begin(), t.values.end(), 0.0);
  });
  const PointCloud noisy = noisy_sphere(500, 5);
  FilterConfig c;
  c.patch_k = 64;
  const FilterResult r = filter_cloud(noisy, model, c);
  CHECK(max_abs_diff(r.cloud.points(), noisy.points()) <= 1e-12);
}

TEST_CASE("filtering never evaluates the long decoder") {
  HybridModel clean_model = small_model(true, 6);
  HybridModel poisoned = clean_model;
  poisoned.visit([](const std::string &name, ad::Tensor &t) {
    if (name.starts_with("long_decoder")) std::fill(t.values.begin(), t.values.end(), std::nan(""));
  });
  const PointCloud noisy = noisy_sphere(400, 7);
  FilterConfig c;
  c.patch_k = 64;
  const FilterResult a = filter_cloud(noisy, clean_model, c);
  const FilterResult b = filter_cloud(noisy, poisoned, c);
  CHECK(a.cloud.points() == b.cloud.points());
}

TEST_CASE("unconditioned models filter without long features") {
  const HybridModel model = small_model(false, 8);
  FilterConfig c;
  c.patch_k = 64;
  const FilterResult r = filter_cloud(noisy_sphere(400, 9), model, c);
  CHECK(r.cloud.size() == 400);
}

TEST_CASE("results do not depend on the thread count") {
  const HybridModel model = small_model(true, 10);
  const PointCloud noisy = noisy_sphere(800, 11);
  FilterConfig c;
  c.patch_k = 64;
  c.threads = 1;
  const FilterResult one = filter_cloud(noisy, model, c);
  for (std::size_t threads : {2u, 3u, 8u}) {
    c.threads = threads;
    const FilterResult many = filter_cloud(noisy, model, c);
    CHECK(many.cloud.points() == one.cloud.points());
    REQUIRE(many.trajectories.size() == one.trajectories.size());
    for (std::size_t p = 0; p < one.trajectories.size(); ++p) {
      CHECK(many.trajectories[p].states == one.trajectories[p].states);
    }
  }
}

TEST_CASE("intermediate states stitch to the run with fewer steps") {
  const HybridModel model = small_model(true, 12);
  const PointCloud noisy = noisy_sphere(500, 13);
  FilterConfig c;
  c.patch_k = 64;
  c.n_steps = 4;
  const FilterResult full = filter_cloud(noisy, model, c);
  CHECK(stitch_state(noisy, full, 4).points() == full.cloud.points());
  CHECK(max_abs_diff(stitch_state(noisy, full, 0).points(), noisy.points()) <= 1e-12);
  c.n_steps = 2;
  const FilterResult two = filter_cloud(noisy, model, c);
  CHECK(stitch_state(noisy, full, 2).points() == two.cloud.points());
  CHECK_THROWS_AS(stitch_state(noisy, full, 5), std::out_of_range);
}

TEST_CASE("non-finite scores stop filtering with the step number") {
  HybridModel model = small_model(true, 14);
  model.visit([](const std::string &name, ad::Tensor &t) {
    if (name == "short_decoder.layer1.self.fc2.bias") t.values[0] = std::numeric_limits<double>::infinity();
  });
  FilterConfig c;
  c.patch_k = 64;
  try {
    filter_cloud(noisy_sphere(300, 15), model, c);
    FAIL("expected an error");
  } catch (const std::runtime_error &e) {
    CHECK(std::string(e.what()).find("step 1") != std::string::npos);
  }
}

TEST_CASE("trajectory CSV lists every state in world coordinates") {
  const HybridModel model = small_model(true, 16);
  const PointCloud noisy = noisy_sphere(300, 17);
  FilterConfig c;
  c.patch_k = 64;
  c.n_steps = 2;
  const FilterResult r = filter_cloud(noisy, model, c);
  const auto path = std::filesystem::temp_directory_path() / "hybridflow_test_trajectory.csv";
  write_trajectory_csv(path, r);
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  CHECK(line == "patch_id,step,point_index,x,y,z");
  std::size_t rows = 0;
  double worst = 0.0;
  while (std::getline(in, line)) {
    ++rows;
    std::size_t patch = 0, step = 0, index = 0;
    double x = 0, y = 0, z = 0;
    REQUIRE(std::sscanf(line.c_str(), "%zu,%zu,%zu,%lf,%lf,%lf", &patch, &step, &index, &x, &y, &z) == 6);
    if (step == 0) worst = std::max(worst, distance(Vec3{x, y, z}, noisy.points()[index]));
  }
  CHECK(rows == r.patches.size() * 3 * 64);
  CHECK(worst < 1e-12);
}
