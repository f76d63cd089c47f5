#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "hybridflow/metrics.hpp"
#include "hybridflow/random.hpp"
#include "hybridflow/shapes.hpp"

using namespace hf;
using namespace hf::metrics;

namespace {

Points random_points(std::size_t n, Rng &rng) {
  Points p;
  for (std::size_t i = 0; i < n; ++i) p.push_back({rng.normal(), rng.normal(), rng.normal()});
  return p;
}

std::array<Vec3, 3> random_triangle(Rng &rng) {
  for (;;) {
    std::array<Vec3, 3> t{Vec3{rng.normal(), rng.normal(), rng.normal()},
                          Vec3{rng.normal(), rng.normal(), rng.normal()},
                          Vec3{rng.normal(), rng.normal(), rng.normal()}};
    if (norm(cross(t[1] - t[0], t[2] - t[0])) > 1e-3) return t;
  }
}

// Minimum distance over a barycentric grid of the triangle.
double sampled_triangle_distance(const Vec3 &p, const std::array<Vec3, 3> &t, int res) {
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= res; ++i) {
    for (int j = 0; i + j <= res; ++j) {
      const double u = static_cast<double>(i) / res;
      const double v = static_cast<double>(j) / res;
      const Vec3 q = t[0] + (t[1] - t[0]) * u + (t[2] - t[0]) * v;
      best = std::min(best, distance(p, q));
    }
  }
  return best;
}

} // namespace

TEST_CASE("chamfer on a hand example") {
  const Points a{{0, 0, 0}};
  const Points b{{1, 0, 0}, {2, 0, 0}};
  // a -> b: 1, b -> a: (1 + 4) / 2.
  CHECK(chamfer(a, b) == doctest::Approx(1.75).epsilon(1e-15));
  CHECK_THROWS_AS(chamfer(a, Points{}), std::invalid_argument);
}

TEST_CASE("chamfer symmetry, identity and translation invariance") {
  Rng rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const Points a = random_points(50 + trial, rng);
    const Points b = random_points(80 - trial, rng);
    const double ab = chamfer(a, b);
    CHECK(std::abs(ab - chamfer(b, a)) <= 1e-12 * ab);
    CHECK(chamfer(a, a) == 0.0);
    const Vec3 shift{rng.normal() * 3, rng.normal() * 3, rng.normal() * 3};
    Points as = a;
    Points bs = b;
    for (auto &p : as) p += shift;
    for (auto &p : bs) p += shift;
    CHECK(std::abs(chamfer(as, bs) - ab) <= 1e-12 * std::max(1.0, ab));
  }
}

TEST_CASE("closest point on a triangle in each region") {
  const std::array<Vec3, 3> t{Vec3{0, 0, 0}, Vec3{1, 0, 0}, Vec3{0, 1, 0}};
  CHECK(point_triangle_distance({0.2, 0.2, 3}, t) == doctest::Approx(3.0));
  CHECK(point_triangle_distance({-1, -1, 0}, t) == doctest::Approx(std::sqrt(2.0)));
  CHECK(point_triangle_distance({0.5, -2, 0}, t) == doctest::Approx(2.0));
  CHECK(point_triangle_distance({1, 1, 0}, t) == doctest::Approx(std::sqrt(0.5)));
  CHECK(point_triangle_distance({3, 0, 4}, t) == doctest::Approx(std::sqrt(4.0 + 16.0)));
  const Vec3 q = closest_point_on_triangle({0.25, 0.25, -1}, t);
  CHECK(distance(q, Vec3{0.25, 0.25, 0}) < 1e-15);
  CHECK_THROWS(point_triangle_distance({0, 0, 0}, {Vec3{0, 0, 0}, Vec3{1, 1, 1}, Vec3{2, 2, 2}}));
}

TEST_CASE("point-triangle distance never loses to dense sampling") {
  Rng rng(2);
  int beaten = 0;
  double worst_gap = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto t = random_triangle(rng);
    const Vec3 p{rng.normal() * 2, rng.normal() * 2, rng.normal() * 2};
    const double exact = point_triangle_distance(p, t);
    const double sampled = sampled_triangle_distance(p, t, 60);
    if (exact > sampled + 1e-12) ++beaten;
    worst_gap = std::max(worst_gap, sampled - exact);
    // The closest point lies on the triangle.
    const Vec3 q = closest_point_on_triangle(p, t);
    const Vec3 n = cross(t[1] - t[0], t[2] - t[0]);
    CHECK(std::abs(dot(q - t[0], n)) <= 1e-10 * norm(n));
  }
  CHECK(beaten == 0);
  // The grid resolution bounds how far the sampled minimum can lag.
  CHECK(worst_gap < 0.1);
}

TEST_CASE("point2mesh of on-surface samples is tiny for every generated shape") {
  for (auto kind : {shapes::ShapeKind::sphere, shapes::ShapeKind::torus, shapes::ShapeKind::cube,
                    shapes::ShapeKind::plane}) {
    const auto shape = shapes::generate({kind, 2000, 1.0, 0.3, 3});
    INFO(shapes::to_string(kind));
    CHECK(point2mesh(shape.cloud.points(), shape.mesh) < 1e-4);
  }
}

TEST_CASE("point2mesh agrees with a scan over every triangle") {
  const auto shape = shapes::generate({shapes::ShapeKind::torus, 100, 1.0, 0.3, 4});
  Rng rng(4);
  Points pts = random_points(200, rng);
  double expect = 0.0;
  for (const auto &p : pts) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < shape.mesh.triangles().size(); ++t) {
      best = std::min(best, std::pow(point_triangle_distance(p, shape.mesh.corners(t)), 2));
    }
    expect += best;
  }
  expect /= static_cast<double>(pts.size());
  CHECK(point2mesh(pts, shape.mesh) == doctest::Approx(expect).epsilon(1e-12));
  CHECK_THROWS_AS(point2mesh(Points{}, shape.mesh), std::invalid_argument);
}

TEST_CASE("assignment and EMD match brute force") {
  Rng rng(5);
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + trial % 7;
    const Points a = random_points(n, rng);
    const Points b = random_points(n, rng);
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    double best = std::numeric_limits<double>::infinity();
    do {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += distance(a[i], b[perm[i]]);
      best = std::min(best, s);
    } while (std::next_permutation(perm.begin(), perm.end()));
    const EmdResult r = emd_exact(a, b);
    worst = std::max(worst, std::abs(r.cost - best));
    std::vector<std::size_t> sorted = r.assignment;
    std::sort(sorted.begin(), sorted.end());
    std::vector<std::size_t> ident(n);
    std::iota(ident.begin(), ident.end(), 0);
    CHECK(sorted == ident);
  }
  CHECK(worst < 1e-12);
  CHECK_THROWS_AS(emd_exact(random_points(3, rng), random_points(4, rng)), std::invalid_argument);
}

TEST_CASE("assignment on an integer cost matrix") {
  // Optimal: row 0 -> 1, row 1 -> 0, row 2 -> 2 with cost 1 + 2 + 2.
  const std::vector<double> cost{4, 1, 3, 2, 0, 5, 3, 2, 2};
  CHECK(min_cost_assignment(cost, 3) == std::vector<std::size_t>{1, 0, 2});
}

TEST_CASE("EMD of a set with itself is zero") {
  Rng rng(6);
  const Points a = random_points(300, rng);
  Points shuffled = a;
  std::reverse(shuffled.begin(), shuffled.end());
  CHECK(emd_exact(a, shuffled).cost == 0.0);
}

TEST_CASE("evaluate fills optional metrics when applicable") {
  const auto shape = shapes::generate({shapes::ShapeKind::sphere, 300, 1.0, 0.3, 7});
  const auto noisy = add_noise(shape.cloud, {NoiseKind::gaussian, 0.02, 8});
  const MetricReport full = evaluate(noisy.points(), shape.cloud.points(), &shape.mesh);
  CHECK(full.cd == chamfer(noisy.points(), shape.cloud.points()));
  REQUIRE(full.p2m);
  REQUIRE(full.emd);
  CHECK(full.cd_scaled() == full.cd * 1e4);
  const Points half(noisy.points().begin(), noisy.points().begin() + 150);
  const MetricReport part = evaluate(half, shape.cloud.points(), nullptr);
  CHECK_FALSE(part.p2m);
  CHECK_FALSE(part.emd);
  const MetricReport same = evaluate(shape.cloud.points(), shape.cloud.points(), &shape.mesh);
  CHECK(same.cd == 0.0);
  CHECK(*same.emd == 0.0);
}
