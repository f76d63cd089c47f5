#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace hf {

class Rng;

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  double operator[](std::size_t i) const { return i == 0 ? x : (i == 1 ? y : z); }
  double &operator[](std::size_t i) { return i == 0 ? x : (i == 1 ? y : z); }

  Vec3 &operator+=(const Vec3 &o) {
    x += o.x;
    y += o.y;
    z += o.z;
    return *this;
  }
  Vec3 &operator-=(const Vec3 &o) {
    x -= o.x;
    y -= o.y;
    z -= o.z;
    return *this;
  }
  Vec3 &operator*=(double s) {
    x *= s;
    y *= s;
    z *= s;
    return *this;
  }

  friend Vec3 operator+(Vec3 a, const Vec3 &b) { return a += b; }
  friend Vec3 operator-(Vec3 a, const Vec3 &b) { return a -= b; }
  friend Vec3 operator*(Vec3 a, double s) { return a *= s; }
  friend Vec3 operator*(double s, Vec3 a) { return a *= s; }
  friend Vec3 operator/(Vec3 a, double s) { return Vec3{a.x / s, a.y / s, a.z / s}; }
  friend Vec3 operator-(const Vec3 &a) { return Vec3{-a.x, -a.y, -a.z}; }
  friend bool operator==(const Vec3 &, const Vec3 &) = default;
};

inline double dot(const Vec3 &a, const Vec3 &b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline Vec3 cross(const Vec3 &a, const Vec3 &b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double squared_norm(const Vec3 &a) { return dot(a, a); }
inline double norm(const Vec3 &a) { return std::sqrt(dot(a, a)); }
inline double squared_distance(const Vec3 &a, const Vec3 &b) { return squared_norm(a - b); }
inline double distance(const Vec3 &a, const Vec3 &b) { return norm(a - b); }
inline bool is_finite(const Vec3 &a) {
  return std::isfinite(a.x) && std::isfinite(a.y) && std::isfinite(a.z);
}

using Points = std::vector<Vec3>;

// Non-empty ordered set of finite 3D positions; a point's index is its
// position in the set.
class PointCloud {
public:
  explicit PointCloud(Points points);

  std::size_t size() const { return points_.size(); }
  const Points &points() const { return points_; }
  const Vec3 &operator[](std::size_t i) const { return points_[i]; }

  friend bool operator==(const PointCloud &, const PointCloud &) = default;

private:
  Points points_;
};

using Triangle = std::array<std::size_t, 3>;

class Mesh {
public:
  // Throws on out-of-range indices and zero-area triangles.
  Mesh(Points vertices, std::vector<Triangle> triangles);

  const Points &vertices() const { return vertices_; }
  const std::vector<Triangle> &triangles() const { return triangles_; }
  std::array<Vec3, 3> corners(std::size_t t) const {
    const auto &tri = triangles_[t];
    return {vertices_[tri[0]], vertices_[tri[1]], vertices_[tri[2]]};
  }

private:
  Points vertices_;
  std::vector<Triangle> triangles_;
};

// k points around a reference point, expressed in a frame centered at the
// reference and scaled by the patch radius.
struct Patch {
  Points points;
  std::size_t reference_index = 0;
  std::vector<std::size_t> source_indices;
  Vec3 center;
  double scale = 1.0;

  Vec3 normalize(const Vec3 &p) const { return (p - center) / scale; }
  Vec3 denormalize(const Vec3 &p) const { return p * scale + center; }
  Points denormalized() const;
};

enum class NoiseKind { gaussian, non_isotropic_gaussian, uniform_sphere, laplace };

NoiseKind parse_noise_kind(std::string_view name);
std::string_view to_string(NoiseKind kind);

struct NoiseSpec {
  NoiseKind kind = NoiseKind::gaussian;
  // Fraction of the bounding-sphere radius.
  double sigma = 0.0;
  std::uint64_t seed = 0;
};

Vec3 centroid(std::span<const Vec3> points);

// Max distance from the centroid to any point.
double bounding_sphere_radius(std::span<const Vec3> points);
inline double bounding_sphere_radius(const PointCloud &cloud) {
  return bounding_sphere_radius(cloud.points());
}

// One perturbation of absolute scale `scale` drawn from the given noise model.
Vec3 sample_noise(NoiseKind kind, double scale, Rng &rng);

PointCloud add_noise(const PointCloud &cloud, const NoiseSpec &spec);

// Elementwise (1 - t) * x0 + t * x1.
Points interpolate(std::span<const Vec3> x0, std::span<const Vec3> x1, double t);

// Indices of the k nearest points, ascending by distance, ties to lower index.
std::vector<std::size_t> knn(std::span<const Vec3> points, const Vec3 &query, std::size_t k);

// Farthest-point sampling from index 0 until the patch_k neighbourhoods of
// the chosen references cover every point.
std::vector<std::size_t> sample_reference_points(const PointCloud &cloud, std::size_t patch_k);

Patch extract_patch(const PointCloud &cloud, std::size_t reference, std::size_t k);

// Averages the denormalized copies of each point across patches.
PointCloud stitch(const PointCloud &cloud, std::span<const Patch> filtered_patches);

} // namespace hf
