#include "hybridflow/shapes.hpp"

#include <cmath>
#include <map>
#include <numbers>
#include <stdexcept>
#include <string>

#include "hybridflow/random.hpp"

namespace hf::shapes {

namespace {

constexpr double kPi = std::numbers::pi;

Mesh icosphere(double radius, int subdivisions) {
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  Points v = {{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
              {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
  for (auto &p : v) p = p * (radius / norm(p));
  std::vector<Triangle> f = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
                             {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
                             {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
                             {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
  for (int s = 0; s < subdivisions; ++s) {
    std::map<std::pair<std::size_t, std::size_t>, std::size_t> midpoints;
    auto midpoint = [&](std::size_t a, std::size_t b) {
      const auto key = std::minmax(a, b);
      auto it = midpoints.find(key);
      if (it != midpoints.end()) return it->second;
      Vec3 m = (v[a] + v[b]) * 0.5;
      v.push_back(m * (radius / norm(m)));
      midpoints.emplace(key, v.size() - 1);
      return v.size() - 1;
    };
    std::vector<Triangle> next;
    next.reserve(f.size() * 4);
    for (const auto &tri : f) {
      const std::size_t ab = midpoint(tri[0], tri[1]);
      const std::size_t bc = midpoint(tri[1], tri[2]);
      const std::size_t ca = midpoint(tri[2], tri[0]);
      next.push_back({tri[0], ab, ca});
      next.push_back({tri[1], bc, ab});
      next.push_back({tri[2], ca, bc});
      next.push_back({ab, bc, ca});
    }
    f = std::move(next);
  }
  return Mesh(std::move(v), std::move(f));
}

Vec3 torus_point(double major, double minor, double u, double v) {
  const double ring = major + minor * std::cos(v);
  return {ring * std::cos(u), ring * std::sin(u), minor * std::sin(v)};
}

Mesh torus_mesh(double major, double minor, std::size_t nu, std::size_t nv) {
  Points verts;
  verts.reserve(nu * nv);
  for (std::size_t i = 0; i < nu; ++i) {
    for (std::size_t j = 0; j < nv; ++j) {
      verts.push_back(torus_point(major, minor, 2.0 * kPi * static_cast<double>(i) / nu,
                                  2.0 * kPi * static_cast<double>(j) / nv));
    }
  }
  std::vector<Triangle> tris;
  tris.reserve(2 * nu * nv);
  auto id = [nv](std::size_t i, std::size_t j) { return i * nv + j; };
  for (std::size_t i = 0; i < nu; ++i) {
    for (std::size_t j = 0; j < nv; ++j) {
      const std::size_t i1 = (i + 1) % nu;
      const std::size_t j1 = (j + 1) % nv;
      tris.push_back({id(i, j), id(i1, j), id(i1, j1)});
      tris.push_back({id(i, j), id(i1, j1), id(i, j1)});
    }
  }
  return Mesh(std::move(verts), std::move(tris));
}

Mesh cube_mesh(double edge) {
  const double h = edge / 2.0;
  Points v;
  for (int i = 0; i < 8; ++i) {
    v.push_back({(i & 1) ? h : -h, (i & 2) ? h : -h, (i & 4) ? h : -h});
  }
  std::vector<Triangle> f = {{0, 2, 3}, {0, 3, 1}, {4, 5, 7}, {4, 7, 6}, {0, 1, 5}, {0, 5, 4},
                             {2, 6, 7}, {2, 7, 3}, {0, 4, 6}, {0, 6, 2}, {1, 3, 7}, {1, 7, 5}};
  return Mesh(std::move(v), std::move(f));
}

Mesh plane_mesh(double side) {
  const double h = side / 2.0;
  return Mesh({{-h, -h, 0}, {h, -h, 0}, {h, h, 0}, {-h, h, 0}}, {{0, 1, 2}, {0, 2, 3}});
}

} // namespace

ShapeKind parse_shape_kind(std::string_view name) {
  if (name == "sphere") return ShapeKind::sphere;
  if (name == "torus") return ShapeKind::torus;
  if (name == "cube") return ShapeKind::cube;
  if (name == "plane") return ShapeKind::plane;
  throw std::invalid_argument("unknown shape kind '" + std::string(name) + "'");
}

std::string_view to_string(ShapeKind kind) {
  switch (kind) {
  case ShapeKind::sphere:
    return "sphere";
  case ShapeKind::torus:
    return "torus";
  case ShapeKind::cube:
    return "cube";
  case ShapeKind::plane:
    return "plane";
  }
  return "unknown";
}

void ShapeSpec::validate() const {
  if (resolution == 0) throw std::invalid_argument("shape: resolution must be positive");
  if (!(size > 0.0) || !std::isfinite(size)) {
    throw std::invalid_argument("shape: size must be positive");
  }
  if (kind == ShapeKind::torus && !(minor_radius > 0.0 && minor_radius < size)) {
    throw std::invalid_argument("shape: torus needs 0 < minor_radius < major radius");
  }
}

Shape generate(const ShapeSpec &spec) {
  spec.validate();
  Rng rng(spec.seed);
  Points pts;
  pts.reserve(spec.resolution);
  switch (spec.kind) {
  case ShapeKind::sphere: {
    for (std::size_t i = 0; i < spec.resolution; ++i) {
      Vec3 d;
      double len = 0.0;
      do {
        d = Vec3{rng.normal(), rng.normal(), rng.normal()};
        len = norm(d);
      } while (len == 0.0);
      pts.push_back(d * (spec.size / len));
    }
    return {PointCloud(std::move(pts)), icosphere(spec.size, 4)};
  }
  case ShapeKind::torus: {
    const double major = spec.size;
    const double minor = spec.minor_radius;
    // Area element is proportional to (major + minor cos v).
    while (pts.size() < spec.resolution) {
      const double u = rng.uniform(0.0, 2.0 * kPi);
      const double v = rng.uniform(0.0, 2.0 * kPi);
      const double accept = rng.uniform();
      if (accept * (major + minor) <= major + minor * std::cos(v)) {
        pts.push_back(torus_point(major, minor, u, v));
      }
    }
    return {PointCloud(std::move(pts)), torus_mesh(major, minor, 96, 48)};
  }
  case ShapeKind::cube: {
    const double h = spec.size / 2.0;
    for (std::size_t i = 0; i < spec.resolution; ++i) {
      const std::size_t face = rng.index(6);
      const double a = rng.uniform(-h, h);
      const double b = rng.uniform(-h, h);
      const double s = (face % 2 == 0) ? -h : h;
      switch (face / 2) {
      case 0:
        pts.push_back({s, a, b});
        break;
      case 1:
        pts.push_back({a, s, b});
        break;
      default:
        pts.push_back({a, b, s});
        break;
      }
    }
    return {PointCloud(std::move(pts)), cube_mesh(spec.size)};
  }
  case ShapeKind::plane: {
    const double h = spec.size / 2.0;
    for (std::size_t i = 0; i < spec.resolution; ++i) {
      pts.push_back({rng.uniform(-h, h), rng.uniform(-h, h), 0.0});
    }
    return {PointCloud(std::move(pts)), plane_mesh(spec.size)};
  }
  }
  throw std::invalid_argument("shape: unknown kind");
}

} // namespace hf::shapes
