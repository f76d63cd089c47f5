#pragma once

#include <cstddef>
#include <vector>

#include "hybridflow/tape.hpp"

// Differentiable primitives. Every shape coercion is explicit: binary
// elementwise operations require identical shapes, and row-broadcasting is
// only available through add_bias. Shape errors throw std::invalid_argument
// naming the primitive and the offending shapes.
namespace hf::ad {

// [m x k] * [k x n] -> [m x n]
Var matmul(Var a, Var b);

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var scalar_mul(Var a, double s);

// x [m x n] plus bias [n] added to every row.
Var add_bias(Var x, Var bias);

// [m x p] ++ [m x q] -> [m x (p + q)]
Var concat_lastdim(Var a, Var b);

Var relu(Var x);
Var leaky_relu(Var x, double slope);

struct MaxResult {
  Var values;
  // For each output element, the winning position along the reduced axis.
  std::vector<std::size_t> argmax;
};

// Maximum along `axis`; ties resolve to the lowest position. The adjoint is
// routed only to the recorded argmax.
MaxResult reduce_max_over_axis(Var x, std::size_t axis);

// out[e] = leaky_relu(a[rows_a[e]] + b[rows_b[e]] + bias, slope) with a, b
// [. x q] and bias [q]. Same values as the composition of gather_rows, add,
// add_bias and leaky_relu in a single pass.
Var gather_sum_bias_leaky(Var a, const std::vector<std::size_t> &rows_a, Var b,
                          const std::vector<std::size_t> &rows_b, Var bias, double slope);

// x [(groups * len) x p], w [p x q], b [q] -> [groups x q] with
//   out[g, c] = max_{r < len} (x[g * len + r] w + b)[c].
// Same values as reduce_max_over_axis(reshape(add_bias(matmul(x, w), b),
// {groups, len, q}), 1); the backward pass only visits winning rows.
Var grouped_max_affine(Var x, Var w, Var b, std::size_t len);

// Mean of squared elementwise differences (scalar).
Var mse(Var a, Var b);

// Euclidean norm of each row of [m x n] -> [m]. The subgradient at a zero
// row is zero.
Var l2norm_rows(Var x);

// Sum of all elements (scalar).
Var sum(Var x);

// Rows of x [m x n] selected by index (repeats allowed) -> [r x n].
Var gather_rows(Var x, std::vector<std::size_t> rows);

// Rows [begin, end) of x [m x n].
Var slice_rows(Var x, std::size_t begin, std::size_t end);

// Same values under a new shape with equal element count.
Var reshape(Var x, Shape shape);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, double s) { return scalar_mul(a, s); }
inline Var operator*(double s, Var a) { return scalar_mul(a, s); }

} // namespace hf::ad
