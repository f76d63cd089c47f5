#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>

#include "hybridflow/geometry.hpp"

namespace hf::shapes {

enum class ShapeKind { sphere, torus, cube, plane };

ShapeKind parse_shape_kind(std::string_view name);
std::string_view to_string(ShapeKind kind);

struct ShapeSpec {
  ShapeKind kind = ShapeKind::sphere;
  std::size_t resolution = 5000;
  // Sphere radius, torus major radius, cube edge length or plane side length.
  double size = 1.0;
  // Torus tube radius.
  double minor_radius = 0.3;
  std::uint64_t seed = 0;

  void validate() const;
};

struct Shape {
  PointCloud cloud;
  Mesh mesh;
};

// Area-uniform surface samples plus a triangle mesh of the same surface:
// icosphere (sphere), parametric grid (torus), and exact planar meshes
// (cube, plane).
Shape generate(const ShapeSpec &spec);

} // namespace hf::shapes
