#include "hybridflow/geometry.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

#include "hybridflow/random.hpp"

namespace hf {

PointCloud::PointCloud(Points points) : points_(std::move(points)) {
  if (points_.empty()) {
    throw std::invalid_argument("empty point cloud");
  }
  for (std::size_t i = 0; i < points_.size(); ++i) {
    if (!is_finite(points_[i])) {
      throw std::invalid_argument("point cloud: non-finite coordinate at index " +
                                  std::to_string(i));
    }
  }
}

Mesh::Mesh(Points vertices, std::vector<Triangle> triangles)
    : vertices_(std::move(vertices)), triangles_(std::move(triangles)) {
  for (std::size_t t = 0; t < triangles_.size(); ++t) {
    for (std::size_t idx : triangles_[t]) {
      if (idx >= vertices_.size()) {
        throw std::invalid_argument("mesh: triangle " + std::to_string(t) +
                                    " references vertex " + std::to_string(idx) + " of " +
                                    std::to_string(vertices_.size()));
      }
    }
    const auto [a, b, c] = corners(t);
    if (squared_norm(cross(b - a, c - a)) == 0.0) {
      throw std::invalid_argument("mesh: degenerate triangle " + std::to_string(t));
    }
  }
}

Points Patch::denormalized() const {
  Points out;
  out.reserve(points.size());
  for (const auto &p : points) {
    out.push_back(denormalize(p));
  }
  return out;
}

NoiseKind parse_noise_kind(std::string_view name) {
  if (name == "gaussian") return NoiseKind::gaussian;
  if (name == "non_isotropic_gaussian" || name == "non_isotropic") {
    return NoiseKind::non_isotropic_gaussian;
  }
  if (name == "uniform_sphere" || name == "uniform") return NoiseKind::uniform_sphere;
  if (name == "laplace") return NoiseKind::laplace;
  throw std::invalid_argument("unknown noise kind '" + std::string(name) + "'");
}

std::string_view to_string(NoiseKind kind) {
  switch (kind) {
  case NoiseKind::gaussian:
    return "gaussian";
  case NoiseKind::non_isotropic_gaussian:
    return "non_isotropic_gaussian";
  case NoiseKind::uniform_sphere:
    return "uniform_sphere";
  case NoiseKind::laplace:
    return "laplace";
  }
  return "unknown";
}

Vec3 centroid(std::span<const Vec3> points) {
  if (points.empty()) {
    throw std::invalid_argument("empty point cloud");
  }
  Vec3 sum;
  for (const auto &p : points) {
    sum += p;
  }
  return sum / static_cast<double>(points.size());
}

double bounding_sphere_radius(std::span<const Vec3> points) {
  const Vec3 c = centroid(points);
  double best = 0.0;
  for (const auto &p : points) {
    best = std::max(best, squared_distance(p, c));
  }
  return std::sqrt(best);
}

namespace {

// Lower Cholesky factor of [[1,-1/2,-1/4],[-1/2,1,-1/4],[-1/4,-1/4,1]].
struct AnisotropicFactor {
  double l11 = 1.0;
  double l21 = -0.5;
  double l31 = -0.25;
  double l22 = std::sqrt(0.75);
  double l32 = (-0.25 - l31 * l21) / l22;
  double l33 = std::sqrt(1.0 - l31 * l31 - l32 * l32);
};

} // namespace

Vec3 sample_noise(NoiseKind kind, double scale, Rng &rng) {
  switch (kind) {
  case NoiseKind::gaussian:
    return Vec3{rng.normal(), rng.normal(), rng.normal()} * scale;
  case NoiseKind::non_isotropic_gaussian: {
    static const AnisotropicFactor f;
    const double a = rng.normal();
    const double b = rng.normal();
    const double c = rng.normal();
    return Vec3{f.l11 * a, f.l21 * a + f.l22 * b, f.l31 * a + f.l32 * b + f.l33 * c} * scale;
  }
  case NoiseKind::uniform_sphere: {
    Vec3 dir;
    double len = 0.0;
    do {
      dir = Vec3{rng.normal(), rng.normal(), rng.normal()};
      len = norm(dir);
    } while (len == 0.0);
    const double radius = scale * std::cbrt(rng.uniform());
    return dir * (radius / len);
  }
  case NoiseKind::laplace:
    return Vec3{rng.laplace(scale), rng.laplace(scale), rng.laplace(scale)};
  }
  throw std::invalid_argument("sample_noise: unknown kind");
}

PointCloud add_noise(const PointCloud &cloud, const NoiseSpec &spec) {
  if (!(spec.sigma >= 0.0) || !std::isfinite(spec.sigma)) {
    throw std::invalid_argument("add_noise: sigma must be finite and >= 0");
  }
  if (spec.sigma == 0.0) {
    return cloud;
  }
  const double scale = spec.sigma * bounding_sphere_radius(cloud);
  Rng rng(spec.seed);
  Points out = cloud.points();
  for (auto &p : out) {
    p += sample_noise(spec.kind, scale, rng);
  }
  return PointCloud(std::move(out));
}

Points interpolate(std::span<const Vec3> x0, std::span<const Vec3> x1, double t) {
  if (!(t >= 0.0 && t <= 1.0)) {
    throw std::invalid_argument("interpolate: t must lie in [0, 1]");
  }
  if (x0.size() != x1.size()) {
    throw std::invalid_argument("interpolate: size mismatch " + std::to_string(x0.size()) +
                                " vs " + std::to_string(x1.size()));
  }
  Points out(x0.size());
  for (std::size_t i = 0; i < x0.size(); ++i) {
    out[i] = (1.0 - t) * x0[i] + t * x1[i];
  }
  return out;
}

std::vector<std::size_t> knn(std::span<const Vec3> points, const Vec3 &query, std::size_t k) {
  if (k > points.size()) {
    throw std::invalid_argument("knn: k = " + std::to_string(k) + " exceeds point count " +
                                std::to_string(points.size()));
  }
  std::vector<std::pair<double, std::size_t>> dist(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    dist[i] = {squared_distance(points[i], query), i};
  }
  std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
  std::vector<std::size_t> out(k);
  for (std::size_t i = 0; i < k; ++i) {
    out[i] = dist[i].second;
  }
  return out;
}

std::vector<std::size_t> sample_reference_points(const PointCloud &cloud, std::size_t patch_k) {
  const auto &pts = cloud.points();
  if (patch_k == 0 || patch_k > pts.size()) {
    throw std::invalid_argument("sample_reference_points: patch_k must be in [1, " +
                                std::to_string(pts.size()) + "]");
  }
  std::vector<std::size_t> refs;
  std::vector<char> covered(pts.size(), 0);
  std::size_t uncovered = pts.size();
  std::vector<double> min_dist(pts.size(), std::numeric_limits<double>::infinity());

  std::size_t next = 0;
  while (true) {
    refs.push_back(next);
    for (std::size_t idx : knn(pts, pts[next], patch_k)) {
      if (!covered[idx]) {
        covered[idx] = 1;
        --uncovered;
      }
    }
    if (uncovered == 0) {
      break;
    }
    std::size_t farthest = 0;
    double best = -1.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      min_dist[i] = std::min(min_dist[i], squared_distance(pts[i], pts[next]));
      if (min_dist[i] > best) {
        best = min_dist[i];
        farthest = i;
      }
    }
    next = farthest;
  }
  return refs;
}

Patch extract_patch(const PointCloud &cloud, std::size_t reference, std::size_t k) {
  if (reference >= cloud.size()) {
    throw std::invalid_argument("extract_patch: reference index out of range");
  }
  Patch patch;
  patch.reference_index = reference;
  patch.source_indices = knn(cloud.points(), cloud[reference], k);
  patch.center = cloud[reference];
  double radius = 0.0;
  for (std::size_t idx : patch.source_indices) {
    radius = std::max(radius, distance(cloud[idx], patch.center));
  }
  patch.scale = radius > 0.0 ? radius : 1.0;
  patch.points.reserve(k);
  for (std::size_t idx : patch.source_indices) {
    patch.points.push_back(patch.normalize(cloud[idx]));
  }
  return patch;
}

PointCloud stitch(const PointCloud &cloud, std::span<const Patch> filtered_patches) {
  Points sum(cloud.size());
  std::vector<std::size_t> count(cloud.size(), 0);
  for (const auto &patch : filtered_patches) {
    if (patch.points.size() != patch.source_indices.size()) {
      throw std::invalid_argument("stitch: patch point/index count mismatch");
    }
    for (std::size_t j = 0; j < patch.points.size(); ++j) {
      const std::size_t idx = patch.source_indices[j];
      if (idx >= cloud.size()) {
        throw std::invalid_argument("stitch: source index out of range");
      }
      sum[idx] += patch.denormalize(patch.points[j]);
      ++count[idx];
    }
  }
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (count[i] == 0) {
      throw std::invalid_argument("point not covered by any patch");
    }
    sum[i] = count[i] == 1 ? sum[i] : sum[i] / static_cast<double>(count[i]);
  }
  return PointCloud(std::move(sum));
}

} // namespace hf
