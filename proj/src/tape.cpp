#include "hybridflow/tape.hpp"

#include <Eigen/Core>
#include <cmath>
#include <stdexcept>

namespace hf::ad {

void Tape::check_owner(Var v, std::string_view op) const {
  if (!v.valid() || &v.tape() != this || v.id() >= nodes_.size()) {
    throw std::invalid_argument(std::string(op) + ": variable does not belong to this tape");
  }
}

Var Tape::leaf(Tensor &tensor) {
  Node node;
  node.value = Tensor(tensor.shape, tensor.values);
  node.parameter = &tensor;
  node.needs_grad = tensor.requires_grad;
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Tensor value) {
  Node node;
  node.value = std::move(value);
  node.value.requires_grad = false;
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(std::string_view op, Tensor value, std::vector<Var> inputs, BackwardFn backward) {
  bool needs = false;
  for (const Var &in : inputs) {
    check_owner(in, op);
    needs = needs || nodes_[in.id()].needs_grad;
  }
  const Eigen::Map<const Eigen::ArrayXd> vals(value.values.data(),
                                               static_cast<Eigen::Index>(value.values.size()));
  if (!vals.allFinite()) {
    throw std::domain_error(std::string(op) + ": non-finite value in forward pass");
  }
  Node node;
  node.value = std::move(value);
  node.needs_grad = needs;
  if (needs) {
    node.backward = std::move(backward);
  }
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

std::vector<double> &Tape::adjoint(std::size_t id) {
  Node &node = nodes_.at(id);
  if (node.adjoint.empty()) {
    node.adjoint.assign(node.value.numel(), 0.0);
  }
  return node.adjoint;
}

void Tape::backward(Var loss) {
  check_owner(loss, "backward");
  if (swept_) {
    throw std::logic_error("backward: tape has already been swept");
  }
  const Tensor &loss_value = nodes_[loss.id()].value;
  if (loss_value.numel() != 1) {
    throw std::invalid_argument("backward: loss must be a scalar, got shape " +
                                shape_string(loss_value.shape));
  }
  swept_ = true;
  adjoint(loss.id())[0] = 1.0;
  for (std::size_t id = loss.id() + 1; id-- > 0;) {
    Node &node = nodes_[id];
    if (!node.needs_grad || node.adjoint.empty() || !node.backward) {
      continue;
    }
    node.backward(*this, node.adjoint);
  }
  for (Node &node : nodes_) {
    if (node.parameter == nullptr || !node.needs_grad) {
      continue;
    }
    auto &grad = node.parameter->grad;
    if (!grad || grad->size() != node.value.numel()) {
      grad.emplace(node.value.numel(), 0.0);
    }
    if (!node.adjoint.empty()) {
      for (std::size_t i = 0; i < node.adjoint.size(); ++i) {
        (*grad)[i] += node.adjoint[i];
      }
    }
  }
}

} // namespace hf::ad
