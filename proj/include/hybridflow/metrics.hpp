#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "hybridflow/geometry.hpp"

namespace hf::metrics {

// Minimum-cost perfect matching on a dense row-major n x n cost matrix
// (shortest augmenting path with potentials, O(n^3)). Returns the column
// assigned to each row.
std::vector<std::size_t> min_cost_assignment(std::span<const double> cost, std::size_t n);

// Symmetric Chamfer distance: the two directed means of squared
// nearest-neighbour distances, averaged.
double chamfer(std::span<const Vec3> a, std::span<const Vec3> b);

Vec3 closest_point_on_triangle(const Vec3 &p, const std::array<Vec3, 3> &tri);

// Exact distance to the closed triangle. Throws on zero-area triangles.
double point_triangle_distance(const Vec3 &p, const std::array<Vec3, 3> &tri);

// Mean over points of the squared distance to the nearest mesh triangle.
double point2mesh(std::span<const Vec3> points, const Mesh &mesh);

struct EmdResult {
  double cost = 0.0;
  // assignment[i] is the index in b matched with a[i].
  std::vector<std::size_t> assignment;
};

inline constexpr std::size_t kMaxEmdPoints = 4096;

// Minimum over bijections of the summed (non-squared) matched distances.
EmdResult emd_exact(std::span<const Vec3> a, std::span<const Vec3> b);

// CD and P2M are customarily reported multiplied by 1e4.
struct MetricReport {
  static constexpr double kReportScale = 1e4;

  double cd = 0.0;
  std::optional<double> p2m;
  std::optional<double> emd;

  double cd_scaled() const { return cd * kReportScale; }
  std::optional<double> p2m_scaled() const {
    return p2m ? std::optional<double>(*p2m * kReportScale) : std::nullopt;
  }
};

// CD always; P2M when a mesh is given; EMD when sizes match and fit the
// exact solver.
MetricReport evaluate(std::span<const Vec3> filtered, std::span<const Vec3> clean,
                      const Mesh *mesh);

} // namespace hf::metrics
