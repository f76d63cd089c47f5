#include "hybridflow/metrics.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>
#include <string>

namespace hf::metrics {

double chamfer(std::span<const Vec3> a, std::span<const Vec3> b) {
  if (a.empty() || b.empty()) {
    throw std::invalid_argument("chamfer: empty point set");
  }
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> best_a(a.size(), kInf);
  std::vector<double> best_b(b.size(), kInf);
  for (std::size_t i = 0; i < a.size(); ++i) {
    double bi = kInf;
    for (std::size_t j = 0; j < b.size(); ++j) {
      const double d = squared_distance(a[i], b[j]);
      bi = std::min(bi, d);
      best_b[j] = std::min(best_b[j], d);
    }
    best_a[i] = bi;
  }
  double sum_a = 0.0;
  for (double d : best_a) sum_a += d;
  double sum_b = 0.0;
  for (double d : best_b) sum_b += d;
  const double mean_a = sum_a / static_cast<double>(a.size());
  const double mean_b = sum_b / static_cast<double>(b.size());
  return (mean_a + mean_b) / 2.0;
}

// Region-based closest point (Voronoi regions of vertices, edges, face).
Vec3 closest_point_on_triangle(const Vec3 &p, const std::array<Vec3, 3> &tri) {
  const auto &[a, b, c] = tri;
  const Vec3 ab = b - a;
  const Vec3 ac = c - a;
  const Vec3 ap = p - a;
  const double d1 = dot(ab, ap);
  const double d2 = dot(ac, ap);
  if (d1 <= 0.0 && d2 <= 0.0) return a;

  const Vec3 bp = p - b;
  const double d3 = dot(ab, bp);
  const double d4 = dot(ac, bp);
  if (d3 >= 0.0 && d4 <= d3) return b;

  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
    return a + ab * (d1 / (d1 - d3));
  }

  const Vec3 cp = p - c;
  const double d5 = dot(ab, cp);
  const double d6 = dot(ac, cp);
  if (d6 >= 0.0 && d5 <= d6) return c;

  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
    return a + ac * (d2 / (d2 - d6));
  }

  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
    return b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6)));
  }

  const double denom = 1.0 / (va + vb + vc);
  return a + ab * (vb * denom) + ac * (vc * denom);
}

double point_triangle_distance(const Vec3 &p, const std::array<Vec3, 3> &tri) {
  if (squared_norm(cross(tri[1] - tri[0], tri[2] - tri[0])) == 0.0) {
    throw std::invalid_argument("point_triangle_distance: degenerate triangle");
  }
  return distance(p, closest_point_on_triangle(p, tri));
}

double point2mesh(std::span<const Vec3> points, const Mesh &mesh) {
  if (points.empty() || mesh.triangles().empty()) {
    throw std::invalid_argument("point2mesh: empty input");
  }
  const std::size_t nt = mesh.triangles().size();
  std::vector<std::array<Vec3, 3>> tris(nt);
  // Bounding spheres allow skipping triangles that cannot beat the current best.
  std::vector<Vec3> centers(nt);
  std::vector<double> radii(nt);
  for (std::size_t t = 0; t < nt; ++t) {
    tris[t] = mesh.corners(t);
    centers[t] = (tris[t][0] + tris[t][1] + tris[t][2]) / 3.0;
    radii[t] = std::max({distance(centers[t], tris[t][0]), distance(centers[t], tris[t][1]),
                         distance(centers[t], tris[t][2])});
  }
  double total = 0.0;
  for (const auto &p : points) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < nt; ++t) {
      const double lower = distance(p, centers[t]) - radii[t];
      if (lower > 0.0 && lower * lower >= best) continue;
      best = std::min(best, squared_distance(p, closest_point_on_triangle(p, tris[t])));
    }
    total += best;
  }
  return total / static_cast<double>(points.size());
}

EmdResult emd_exact(std::span<const Vec3> a, std::span<const Vec3> b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("emd_exact: size mismatch " + std::to_string(a.size()) + " vs " +
                                std::to_string(b.size()));
  }
  if (a.size() > kMaxEmdPoints) {
    throw std::invalid_argument("emd_exact: at most " + std::to_string(kMaxEmdPoints) +
                                " points supported");
  }
  const std::size_t n = a.size();
  std::vector<double> cost(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) cost[i * n + j] = distance(a[i], b[j]);
  }
  EmdResult result;
  result.assignment = min_cost_assignment(cost, n);
  for (std::size_t i = 0; i < n; ++i) result.cost += cost[i * n + result.assignment[i]];
  return result;
}

MetricReport evaluate(std::span<const Vec3> filtered, std::span<const Vec3> clean,
                      const Mesh *mesh) {
  MetricReport report;
  report.cd = chamfer(filtered, clean);
  if (mesh != nullptr) {
    report.p2m = point2mesh(filtered, *mesh);
  }
  if (filtered.size() == clean.size() && filtered.size() <= kMaxEmdPoints) {
    report.emd = emd_exact(filtered, clean).cost;
  }
  return report;
}

} // namespace hf::metrics
