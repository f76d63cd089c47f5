#include "hybridflow/ops.hpp"

#include <Eigen/Core>
#include <cmath>
#include <stdexcept>
#include <string>

namespace hf::ad {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMatrix>;
using MutMap = Eigen::Map<RowMatrix>;

[[noreturn]] void shape_error(const char *op, const Shape &a, const Shape &b) {
  throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_string(a) + " vs " +
                              shape_string(b));
}

void require_rank(const char *op, const Shape &s, std::size_t rank) {
  if (s.size() != rank) {
    throw std::invalid_argument(std::string(op) + ": expected rank " + std::to_string(rank) +
                                ", got shape " + shape_string(s));
  }
}

void require_same_tape(const char *op, Var a, Var b) {
  if (&a.tape() != &b.tape()) {
    throw std::invalid_argument(std::string(op) + ": operands live on different tapes");
  }
}

} // namespace

Var matmul(Var a, Var b) {
  require_same_tape("matmul", a, b);
  const Tensor &av = a.value();
  const Tensor &bv = b.value();
  if (av.rank() != 2 || bv.rank() != 2 || av.dim(1) != bv.dim(0)) {
    shape_error("matmul", av.shape, bv.shape);
  }
  const auto m = static_cast<Eigen::Index>(av.dim(0));
  const auto k = static_cast<Eigen::Index>(av.dim(1));
  const auto n = static_cast<Eigen::Index>(bv.dim(1));
  Tensor out = Tensor::zeros({av.dim(0), bv.dim(1)});
  MutMap(out.values.data(), m, n).noalias() =
      ConstMap(av.values.data(), m, k) * ConstMap(bv.values.data(), k, n);

  const std::size_t ia = a.id();
  const std::size_t ib = b.id();
  return a.tape().record("matmul", std::move(out), {a, b},
                         [ia, ib, m, k, n](Tape &t, const std::vector<double> &g) {
                           ConstMap grad(g.data(), m, n);
                           if (t.needs_grad(ia)) {
                             MutMap(t.adjoint(ia).data(), m, k).noalias() +=
                                 grad * ConstMap(t.value(ib).values.data(), k, n).transpose();
                           }
                           if (t.needs_grad(ib)) {
                             MutMap(t.adjoint(ib).data(), k, n).noalias() +=
                                 ConstMap(t.value(ia).values.data(), m, k).transpose() * grad;
                           }
                         });
}

Var gather_sum_bias_leaky(Var a, const std::vector<std::size_t> &rows_a, Var b,
                          const std::vector<std::size_t> &rows_b, Var bias, double slope) {
  require_same_tape("gather_sum_bias_leaky", a, b);
  require_same_tape("gather_sum_bias_leaky", a, bias);
  const Tensor &av = a.value();
  const Tensor &bv = b.value();
  const Tensor &cv = bias.value();
  require_rank("gather_sum_bias_leaky", av.shape, 2);
  require_rank("gather_sum_bias_leaky", bv.shape, 2);
  if (av.dim(1) != bv.dim(1)) shape_error("gather_sum_bias_leaky", av.shape, bv.shape);
  if (cv.rank() != 1 || cv.dim(0) != av.dim(1)) shape_error("gather_sum_bias_leaky", av.shape, cv.shape);
  if (rows_a.size() != rows_b.size()) {
    throw std::invalid_argument("gather_sum_bias_leaky: " + std::to_string(rows_a.size()) + " vs " +
                                std::to_string(rows_b.size()) + " row indices");
  }
  const std::size_t q = av.dim(1);
  const std::size_t rows = rows_a.size();
  for (std::size_t e = 0; e < rows; ++e) {
    if (rows_a[e] >= av.dim(0) || rows_b[e] >= bv.dim(0)) {
      throw std::out_of_range("gather_sum_bias_leaky: row index out of range");
    }
  }
  Tensor out = Tensor::zeros({rows, q});
  const double *bias_v = cv.values.data();
  for (std::size_t e = 0; e < rows; ++e) {
    const double *ra = av.values.data() + rows_a[e] * q;
    const double *rb = bv.values.data() + rows_b[e] * q;
    double *dst = out.values.data() + e * q;
    for (std::size_t c = 0; c < q; ++c) {
      const double v = ra[c] + rb[c] + bias_v[c];
      dst[c] = v > 0.0 ? v : v * slope;
    }
  }
  const std::size_t ia = a.id();
  const std::size_t ib = b.id();
  const std::size_t ic = bias.id();
  const std::size_t iout = a.tape().size();
  return a.tape().record(
      "gather_sum_bias_leaky", std::move(out), {a, b, bias},
      [ia, ib, ic, iout, q, rows, rows_a, rows_b, slope](Tape &t, const std::vector<double> &g) {
        // leaky_relu keeps the sign, so the output tells which branch was taken.
        const double *y = t.value(iout).values.data();
        std::vector<double> local(g.size());
        for (std::size_t i = 0; i < g.size(); ++i) local[i] = y[i] > 0.0 ? g[i] : slope * g[i];
        if (t.needs_grad(ia)) {
          auto &adj = t.adjoint(ia);
          for (std::size_t e = 0; e < rows; ++e) {
            double *dst = adj.data() + rows_a[e] * q;
            const double *src = local.data() + e * q;
            for (std::size_t c = 0; c < q; ++c) dst[c] += src[c];
          }
        }
        if (t.needs_grad(ib)) {
          auto &adj = t.adjoint(ib);
          for (std::size_t e = 0; e < rows; ++e) {
            double *dst = adj.data() + rows_b[e] * q;
            const double *src = local.data() + e * q;
            for (std::size_t c = 0; c < q; ++c) dst[c] += src[c];
          }
        }
        if (t.needs_grad(ic)) {
          auto &adj = t.adjoint(ic);
          for (std::size_t e = 0; e < rows; ++e) {
            const double *src = local.data() + e * q;
            for (std::size_t c = 0; c < q; ++c) adj[c] += src[c];
          }
        }
      });
}

Var grouped_max_affine(Var x, Var w, Var b, std::size_t len) {
  require_same_tape("grouped_max_affine", x, w);
  require_same_tape("grouped_max_affine", x, b);
  const Tensor &xv = x.value();
  const Tensor &wv = w.value();
  const Tensor &bv = b.value();
  if (xv.rank() != 2 || wv.rank() != 2 || xv.dim(1) != wv.dim(0)) {
    shape_error("grouped_max_affine", xv.shape, wv.shape);
  }
  if (bv.rank() != 1 || bv.dim(0) != wv.dim(1)) shape_error("grouped_max_affine", wv.shape, bv.shape);
  if (len == 0 || xv.dim(0) % len != 0) {
    throw std::invalid_argument("grouped_max_affine: " + std::to_string(xv.dim(0)) +
                                " rows do not split into groups of " + std::to_string(len));
  }
  const std::size_t rows = xv.dim(0);
  const std::size_t p = xv.dim(1);
  const std::size_t q = wv.dim(1);
  const std::size_t groups = rows / len;

  RowMatrix prod = ConstMap(xv.values.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(p)) *
                   ConstMap(wv.values.data(), static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(q));
  Tensor out = Tensor::zeros({groups, q});
  std::vector<std::size_t> winner(groups * q);
  for (std::size_t g = 0; g < groups; ++g) {
    double *dst = out.values.data() + g * q;
    std::size_t *arg = winner.data() + g * q;
    const double *block = prod.data() + g * len * q;
    for (std::size_t c = 0; c < q; ++c) {
      dst[c] = block[c] + bv.values[c];
      arg[c] = g * len;
    }
    for (std::size_t r = 1; r < len; ++r) {
      const double *row = block + r * q;
      for (std::size_t c = 0; c < q; ++c) {
        const double v = row[c] + bv.values[c];
        const bool better = v > dst[c];
        dst[c] = better ? v : dst[c];
        arg[c] = better ? g * len + r : arg[c];
      }
    }
  }

  const std::size_t ix = x.id();
  const std::size_t iw = w.id();
  const std::size_t ib = b.id();
  return x.tape().record(
      "grouped_max_affine", std::move(out), {x, w, b},
      [ix, iw, ib, p, q, groups, winner = std::move(winner)](Tape &t, const std::vector<double> &g) {
        const double *xd = t.value(ix).values.data();
        const double *wd = t.value(iw).values.data();
        if (t.needs_grad(ix)) {
          // w transposed so each winning row update reads contiguously.
          std::vector<double> wt(p * q);
          for (std::size_t i = 0; i < p; ++i) {
            for (std::size_t c = 0; c < q; ++c) wt[c * p + i] = wd[i * q + c];
          }
          auto &adj = t.adjoint(ix);
          for (std::size_t k = 0; k < groups * q; ++k) {
            const double gk = g[k];
            const double *src = wt.data() + (k % q) * p;
            double *dst = adj.data() + winner[k] * p;
            for (std::size_t i = 0; i < p; ++i) dst[i] += src[i] * gk;
          }
        }
        if (t.needs_grad(iw)) {
          std::vector<double> dwt(p * q, 0.0);
          for (std::size_t k = 0; k < groups * q; ++k) {
            const double gk = g[k];
            const double *src = xd + winner[k] * p;
            double *dst = dwt.data() + (k % q) * p;
            for (std::size_t i = 0; i < p; ++i) dst[i] += src[i] * gk;
          }
          auto &adj = t.adjoint(iw);
          for (std::size_t i = 0; i < p; ++i) {
            for (std::size_t c = 0; c < q; ++c) adj[i * q + c] += dwt[c * p + i];
          }
        }
        if (t.needs_grad(ib)) {
          auto &adj = t.adjoint(ib);
          for (std::size_t k = 0; k < groups * q; ++k) adj[k % q] += g[k];
        }
      });
}

namespace {

Var add_or_sub(const char *op, Var a, Var b, double sign) {
  require_same_tape(op, a, b);
  const Tensor &av = a.value();
  const Tensor &bv = b.value();
  if (av.shape != bv.shape) {
    shape_error(op, av.shape, bv.shape);
  }
  Tensor out(av.shape, av.values);
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    out.values[i] += sign * bv.values[i];
  }
  const std::size_t ia = a.id();
  const std::size_t ib = b.id();
  return a.tape().record(op, std::move(out), {a, b},
                         [ia, ib, sign](Tape &t, const std::vector<double> &g) {
                           if (t.needs_grad(ia)) {
                             auto &adj = t.adjoint(ia);
                             for (std::size_t i = 0; i < g.size(); ++i) adj[i] += g[i];
                           }
                           if (t.needs_grad(ib)) {
                             auto &adj = t.adjoint(ib);
                             for (std::size_t i = 0; i < g.size(); ++i) adj[i] += sign * g[i];
                           }
                         });
}

} // namespace

Var add(Var a, Var b) { return add_or_sub("add", a, b, 1.0); }
Var sub(Var a, Var b) { return add_or_sub("sub", a, b, -1.0); }

Var scalar_mul(Var a, double s) {
  Tensor out(a.value().shape, a.value().values);
  for (double &v : out.values) v *= s;
  const std::size_t ia = a.id();
  return a.tape().record("scalar_mul", std::move(out), {a},
                         [ia, s](Tape &t, const std::vector<double> &g) {
                           auto &adj = t.adjoint(ia);
                           for (std::size_t i = 0; i < g.size(); ++i) adj[i] += s * g[i];
                         });
}

Var add_bias(Var x, Var bias) {
  require_same_tape("add_bias", x, bias);
  const Tensor &xv = x.value();
  const Tensor &bv = bias.value();
  if (xv.rank() != 2 || bv.rank() != 1 || bv.dim(0) != xv.dim(1)) {
    shape_error("add_bias", xv.shape, bv.shape);
  }
  const std::size_t rows = xv.dim(0);
  const std::size_t cols = xv.dim(1);
  Tensor out(xv.shape, xv.values);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) out.values[r * cols + c] += bv.values[c];
  }
  const std::size_t ix = x.id();
  const std::size_t ib = bias.id();
  return x.tape().record("add_bias", std::move(out), {x, bias},
                         [ix, ib, rows, cols](Tape &t, const std::vector<double> &g) {
                           if (t.needs_grad(ix)) {
                             auto &adj = t.adjoint(ix);
                             for (std::size_t i = 0; i < g.size(); ++i) adj[i] += g[i];
                           }
                           if (t.needs_grad(ib)) {
                             auto &adj = t.adjoint(ib);
                             for (std::size_t r = 0; r < rows; ++r) {
                               for (std::size_t c = 0; c < cols; ++c) adj[c] += g[r * cols + c];
                             }
                           }
                         });
}

Var concat_lastdim(Var a, Var b) {
  require_same_tape("concat_lastdim", a, b);
  const Tensor &av = a.value();
  const Tensor &bv = b.value();
  if (av.rank() != 2 || bv.rank() != 2 || av.dim(0) != bv.dim(0)) {
    shape_error("concat_lastdim", av.shape, bv.shape);
  }
  const std::size_t rows = av.dim(0);
  const std::size_t p = av.dim(1);
  const std::size_t q = bv.dim(1);
  Tensor out = Tensor::zeros({rows, p + q});
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(av.values.begin() + static_cast<std::ptrdiff_t>(r * p), p,
                out.values.begin() + static_cast<std::ptrdiff_t>(r * (p + q)));
    std::copy_n(bv.values.begin() + static_cast<std::ptrdiff_t>(r * q), q,
                out.values.begin() + static_cast<std::ptrdiff_t>(r * (p + q) + p));
  }
  const std::size_t ia = a.id();
  const std::size_t ib = b.id();
  return a.tape().record("concat_lastdim", std::move(out), {a, b},
                         [ia, ib, rows, p, q](Tape &t, const std::vector<double> &g) {
                           if (t.needs_grad(ia)) {
                             auto &adj = t.adjoint(ia);
                             for (std::size_t r = 0; r < rows; ++r) {
                               for (std::size_t c = 0; c < p; ++c) {
                                 adj[r * p + c] += g[r * (p + q) + c];
                               }
                             }
                           }
                           if (t.needs_grad(ib)) {
                             auto &adj = t.adjoint(ib);
                             for (std::size_t r = 0; r < rows; ++r) {
                               for (std::size_t c = 0; c < q; ++c) {
                                 adj[r * q + c] += g[r * (p + q) + p + c];
                               }
                             }
                           }
                         });
}

Var leaky_relu(Var x, double slope) {
  Tensor out(x.value().shape, x.value().values);
  for (double &v : out.values) v = v > 0.0 ? v : v * slope;
  const std::size_t ix = x.id();
  return x.tape().record("leaky_relu", std::move(out), {x},
                         [ix, slope](Tape &t, const std::vector<double> &g) {
                           const auto &in = t.value(ix).values;
                           auto &adj = t.adjoint(ix);
                           for (std::size_t i = 0; i < g.size(); ++i) {
                             adj[i] += in[i] > 0.0 ? g[i] : slope * g[i];
                           }
                         });
}

Var relu(Var x) {
  Tensor out(x.value().shape, x.value().values);
  for (double &v : out.values) {
    if (!(v > 0.0)) v = 0.0;
  }
  const std::size_t ix = x.id();
  return x.tape().record("relu", std::move(out), {x}, [ix](Tape &t, const std::vector<double> &g) {
    const auto &in = t.value(ix).values;
    auto &adj = t.adjoint(ix);
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (in[i] > 0.0) adj[i] += g[i];
    }
  });
}

MaxResult reduce_max_over_axis(Var x, std::size_t axis) {
  const Tensor &xv = x.value();
  if (axis >= xv.rank() || xv.dim(axis) == 0) {
    throw std::invalid_argument("reduce_max_over_axis: invalid axis " + std::to_string(axis) +
                                " for shape " + shape_string(xv.shape));
  }
  std::size_t outer = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= xv.dim(i);
  std::size_t inner = 1;
  for (std::size_t i = axis + 1; i < xv.rank(); ++i) inner *= xv.dim(i);
  const std::size_t len = xv.dim(axis);

  Shape out_shape;
  for (std::size_t i = 0; i < xv.rank(); ++i) {
    if (i != axis) out_shape.push_back(xv.dim(i));
  }
  Tensor out = Tensor::zeros(out_shape);
  std::vector<std::size_t> argmax(outer * inner, 0);
  for (std::size_t o = 0; o < outer; ++o) {
    const double *block = xv.values.data() + o * len * inner;
    double *dst = out.values.data() + o * inner;
    std::size_t *arg = argmax.data() + o * inner;
    std::copy_n(block, inner, dst);
    for (std::size_t j = 1; j < len; ++j) {
      const double *row = block + j * inner;
      for (std::size_t c = 0; c < inner; ++c) {
        if (row[c] > dst[c]) {
          dst[c] = row[c];
          arg[c] = j;
        }
      }
    }
  }
  const std::size_t ix = x.id();
  Var values = x.tape().record(
      "reduce_max_over_axis", std::move(out), {x},
      [ix, outer, inner, len, argmax](Tape &t, const std::vector<double> &g) {
        auto &adj = t.adjoint(ix);
        for (std::size_t o = 0; o < outer; ++o) {
          for (std::size_t c = 0; c < inner; ++c) {
            const std::size_t k = o * inner + c;
            adj[(o * len + argmax[k]) * inner + c] += g[k];
          }
        }
      });
  return {values, std::move(argmax)};
}

Var mse(Var a, Var b) {
  require_same_tape("mse", a, b);
  const Tensor &av = a.value();
  const Tensor &bv = b.value();
  if (av.shape != bv.shape || av.numel() == 0) {
    shape_error("mse", av.shape, bv.shape);
  }
  const double n = static_cast<double>(av.numel());
  double acc = 0.0;
  for (std::size_t i = 0; i < av.numel(); ++i) {
    const double d = av.values[i] - bv.values[i];
    acc += d * d;
  }
  const std::size_t ia = a.id();
  const std::size_t ib = b.id();
  return a.tape().record("mse", Tensor::scalar(acc / n), {a, b},
                         [ia, ib, n](Tape &t, const std::vector<double> &g) {
                           const auto &x = t.value(ia).values;
                           const auto &y = t.value(ib).values;
                           const double s = 2.0 * g[0] / n;
                           if (t.needs_grad(ia)) {
                             auto &adj = t.adjoint(ia);
                             for (std::size_t i = 0; i < x.size(); ++i) adj[i] += s * (x[i] - y[i]);
                           }
                           if (t.needs_grad(ib)) {
                             auto &adj = t.adjoint(ib);
                             for (std::size_t i = 0; i < x.size(); ++i) adj[i] -= s * (x[i] - y[i]);
                           }
                         });
}

Var l2norm_rows(Var x) {
  const Tensor &xv = x.value();
  require_rank("l2norm_rows", xv.shape, 2);
  const std::size_t rows = xv.dim(0);
  const std::size_t cols = xv.dim(1);
  Tensor out = Tensor::zeros({rows});
  for (std::size_t r = 0; r < rows; ++r) {
    double acc = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      const double v = xv.values[r * cols + c];
      acc += v * v;
    }
    out.values[r] = std::sqrt(acc);
  }
  const std::size_t ix = x.id();
  return x.tape().record("l2norm_rows", std::move(out), {x},
                         [ix, rows, cols](Tape &t, const std::vector<double> &g) {
                           const auto &in = t.value(ix).values;
                           auto &adj = t.adjoint(ix);
                           for (std::size_t r = 0; r < rows; ++r) {
                             double acc = 0.0;
                             for (std::size_t c = 0; c < cols; ++c) {
                               acc += in[r * cols + c] * in[r * cols + c];
                             }
                             const double len = std::sqrt(acc);
                             if (len == 0.0) continue;
                             for (std::size_t c = 0; c < cols; ++c) {
                               adj[r * cols + c] += g[r] * in[r * cols + c] / len;
                             }
                           }
                         });
}

Var sum(Var x) {
  double acc = 0.0;
  for (double v : x.value().values) acc += v;
  const std::size_t ix = x.id();
  return x.tape().record("sum", Tensor::scalar(acc), {x},
                         [ix](Tape &t, const std::vector<double> &g) {
                           auto &adj = t.adjoint(ix);
                           for (double &v : adj) v += g[0];
                         });
}

Var gather_rows(Var x, std::vector<std::size_t> rows) {
  const Tensor &xv = x.value();
  require_rank("gather_rows", xv.shape, 2);
  const std::size_t m = xv.dim(0);
  const std::size_t cols = xv.dim(1);
  Tensor out = Tensor::zeros({rows.size(), cols});
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] >= m) {
      throw std::invalid_argument("gather_rows: row " + std::to_string(rows[r]) +
                                  " out of range for shape " + shape_string(xv.shape));
    }
    std::copy_n(xv.values.begin() + static_cast<std::ptrdiff_t>(rows[r] * cols), cols,
                out.values.begin() + static_cast<std::ptrdiff_t>(r * cols));
  }
  const std::size_t ix = x.id();
  return x.tape().record("gather_rows", std::move(out), {x},
                         [ix, cols, rows = std::move(rows)](Tape &t, const std::vector<double> &g) {
                           auto &adj = t.adjoint(ix);
                           for (std::size_t r = 0; r < rows.size(); ++r) {
                             double *dst = adj.data() + rows[r] * cols;
                             const double *src = g.data() + r * cols;
                             for (std::size_t c = 0; c < cols; ++c) dst[c] += src[c];
                           }
                         });
}

Var slice_rows(Var x, std::size_t begin, std::size_t end) {
  const Tensor &xv = x.value();
  require_rank("slice_rows", xv.shape, 2);
  if (begin > end || end > xv.dim(0)) {
    throw std::invalid_argument("slice_rows: range [" + std::to_string(begin) + ", " +
                                std::to_string(end) + ") invalid for shape " +
                                shape_string(xv.shape));
  }
  const std::size_t cols = xv.dim(1);
  Tensor out({end - begin, cols},
             std::vector<double>(xv.values.begin() + static_cast<std::ptrdiff_t>(begin * cols),
                                 xv.values.begin() + static_cast<std::ptrdiff_t>(end * cols)));
  const std::size_t ix = x.id();
  return x.tape().record("slice_rows", std::move(out), {x},
                         [ix, begin, cols](Tape &t, const std::vector<double> &g) {
                           auto &adj = t.adjoint(ix);
                           for (std::size_t i = 0; i < g.size(); ++i) adj[begin * cols + i] += g[i];
                         });
}

Var reshape(Var x, Shape shape) {
  const Tensor &xv = x.value();
  if (element_count(shape) != xv.numel()) {
    shape_error("reshape", xv.shape, shape);
  }
  const std::size_t ix = x.id();
  return x.tape().record("reshape", Tensor(std::move(shape), xv.values), {x},
                         [ix](Tape &t, const std::vector<double> &g) {
                           auto &adj = t.adjoint(ix);
                           for (std::size_t i = 0; i < g.size(); ++i) adj[i] += g[i];
                         });
}

} // namespace hf::ad
