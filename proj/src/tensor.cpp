#include "hybridflow/tensor.hpp"

#include <functional>
#include <numeric>
#include <stdexcept>

namespace hf::ad {

std::size_t element_count(const Shape &shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape &shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i > 0) out += "x";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

Tensor::Tensor(Shape shape_, std::vector<double> values_, bool requires_grad_)
    : shape(std::move(shape_)), values(std::move(values_)), requires_grad(requires_grad_) {
  if (element_count(shape) != values.size()) {
    throw std::invalid_argument("Tensor: shape " + shape_string(shape) + " does not hold " +
                                std::to_string(values.size()) + " values");
  }
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  const std::size_t n = element_count(shape);
  return Tensor(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
}

Tensor Tensor::scalar(double value) { return Tensor({}, {value}); }

double Tensor::item() const {
  if (values.size() != 1) {
    throw std::invalid_argument("Tensor::item: tensor of shape " + shape_string(shape) +
                                " is not a scalar");
  }
  return values[0];
}

void Tensor::zero_grad() { grad.reset(); }

} // namespace hf::ad
