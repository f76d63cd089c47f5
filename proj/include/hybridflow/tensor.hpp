#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace hf::ad {

using Shape = std::vector<std::size_t>;

std::size_t element_count(const Shape &shape);
std::string shape_string(const Shape &shape);

// Dense row-major array of doubles. `grad` is populated by Tape::backward
// for tensors registered as leaves with requires_grad set.
struct Tensor {
  Shape shape;
  std::vector<double> values;
  bool requires_grad = false;
  std::optional<std::vector<double>> grad;

  Tensor() = default;
  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor scalar(double value);

  std::size_t numel() const { return values.size(); }
  std::size_t rank() const { return shape.size(); }
  std::size_t dim(std::size_t axis) const { return shape.at(axis); }

  // Row-major 2D access.
  double at(std::size_t row, std::size_t col) const { return values[row * shape[1] + col]; }

  // Value of a single-element tensor.
  double item() const;

  void zero_grad();
};

} // namespace hf::ad
