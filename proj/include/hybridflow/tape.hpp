#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "hybridflow/tensor.hpp"

namespace hf::ad {

class Tape;

// Handle to a value recorded on a Tape. Cheap to copy; valid while the tape
// lives.
class Var {
public:
  Var() = default;

  Tape &tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

  const Tensor &value() const;
  const Shape &shape() const { return value().shape; }
  std::size_t dim(std::size_t axis) const { return value().dim(axis); }

private:
  friend class Tape;
  Var(Tape *tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape *tape_ = nullptr;
  std::size_t id_ = 0;
};

// Eager record of primitive operations. Owned by a single thread for the
// duration of a forward/backward pass.
class Tape {
public:
  // Receives the adjoint of the node's output and accumulates into the
  // adjoints of its inputs via Tape::adjoint.
  using BackwardFn = std::function<void(Tape &, const std::vector<double> &)>;

  Tape() = default;
  Tape(const Tape &) = delete;
  Tape &operator=(const Tape &) = delete;

  // Registers an external tensor. When it has requires_grad set, backward()
  // accumulates into its grad; the tensor must outlive that call.
  Var leaf(Tensor &tensor);
  // Registers a value that never receives gradient.
  Var constant(Tensor value);

  // Appends an operation result. Throws std::domain_error naming `op` if
  // the value holds non-finite entries.
  Var record(std::string_view op, Tensor value, std::vector<Var> inputs, BackwardFn backward);

  const Tensor &value(std::size_t id) const { return nodes_.at(id).value; }
  bool needs_grad(std::size_t id) const { return nodes_.at(id).needs_grad; }

  // Adjoint storage of a node, zero-initialized on first access.
  std::vector<double> &adjoint(std::size_t id);
  // Adjoint after backward(); empty when the node received no gradient.
  const std::vector<double> &adjoint_of(Var v) const { return nodes_.at(v.id()).adjoint; }

  // Reverse sweep from a scalar loss. Every requires_grad leaf on the tape
  // receives its gradient exactly once (zeros when unreachable).
  void backward(Var loss);

  std::size_t size() const { return nodes_.size(); }

private:
  struct Node {
    Tensor value;
    std::vector<double> adjoint;
    BackwardFn backward;
    Tensor *parameter = nullptr;
    bool needs_grad = false;
  };

  void check_owner(Var v, std::string_view op) const;

  // deque: values stay addressable while later operations are recorded.
  std::deque<Node> nodes_;
  bool swept_ = false;
};

inline const Tensor &Var::value() const { return tape_->value(id_); }

} // namespace hf::ad
