/*
 * Copyright 2026 The openset Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "openset/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <sstream>

#include "openset/errors.hpp"
#include "openset/special.hpp"

namespace openset::ad {

std::string shape_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << ',';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

namespace {

std::size_t element_count(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

[[noreturn]] void shape_mismatch(const char* op, const Shape& a, const Shape& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + shape_string(a) + " and " +
                   shape_string(b));
}

[[noreturn]] void bad_rank(const char* op, const Shape& a) {
  throw ShapeError(std::string(op) + ": unsupported operand shape " + shape_string(a));
}

Tape& same_tape(Var a, Var b) {
  if (!a.valid() || !b.valid()) throw ContractError("op on an unbound Var");
  if (a.tape() != b.tape()) throw ContractError("operands belong to different tapes");
  return *a.tape();
}

Tape& tape_of(Var a) {
  if (!a.valid()) throw ContractError("op on an unbound Var");
  return *a.tape();
}

void accumulate(Tensor* dst, std::size_t i, double v) {
  if (dst) (*dst)[i] += v;
}

// Elementwise unary op helper. derivative(x, y) returns dy/dx.
template <typename Fwd, typename Deriv>
Var unary(const char* name, Var x, Fwd forward, Deriv derivative) {
  Tape& tape = tape_of(x);
  const Tensor& in = x.value();
  Tensor out(in.shape(), std::vector<double>(in.size()));
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = forward(in[i]);
  return tape.record(name, std::move(out), {x}, [derivative](const BackwardContext& ctx) {
    Tensor* gx = ctx.input_grad(0);
    if (!gx) return;
    const Tensor& xin = ctx.input(0);
    const Tensor& y = ctx.output();
    const Tensor& gy = ctx.output_grad();
    for (std::size_t i = 0; i < xin.size(); ++i) (*gx)[i] += gy[i] * derivative(xin[i], y[i]);
  });
}

}  // namespace

// ---- Tensor ----------------------------------------------------------------

Tensor::Tensor(Shape shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
  for (std::size_t d : shape_) {
    if (d == 0) throw ShapeError("tensor dimensions must be positive: " + shape_string(shape_));
  }
  if (values_.size() != element_count(shape_)) {
    throw ShapeError("tensor of shape " + shape_string(shape_) + " needs " +
                     std::to_string(element_count(shape_)) + " values, got " +
                     std::to_string(values_.size()));
  }
}

Tensor Tensor::zeros(Shape shape) { return filled(std::move(shape), 0.0); }

Tensor Tensor::filled(Shape shape, double value) {
  const std::size_t n = element_count(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value));
}

Tensor Tensor::scalar(double value) { return Tensor({}, {value}); }

Tensor Tensor::vector(std::vector<double> values) {
  const std::size_t n = values.size();
  return Tensor({n}, std::move(values));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
  return Tensor({rows, cols}, std::move(values));
}

std::size_t Tensor::rows() const {
  if (rank() != 2) throw ShapeError("rows() on tensor of shape " + shape_string(shape_));
  return shape_[0];
}

std::size_t Tensor::cols() const {
  if (rank() != 2) throw ShapeError("cols() on tensor of shape " + shape_string(shape_));
  return shape_[1];
}

double Tensor::item() const {
  if (values_.size() != 1) {
    throw ShapeError("item() on tensor of shape " + shape_string(shape_));
  }
  return values_[0];
}

// ---- Var / Tape ------------------------------------------------------------

const Tensor& Var::value() const {
  if (!tape_) throw ContractError("value() on an unbound Var");
  return tape_->value(*this);
}

Var Tape::leaf(Tensor value, bool requires_grad) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(const char* op, Tensor value, std::vector<Var> inputs, BackwardFn backward) {
  Node n;
  n.op = op;
  n.value = std::move(value);
  n.inputs.reserve(inputs.size());
  for (const Var& in : inputs) {
    if (in.tape() != this) throw ContractError(std::string(op) + ": input from another tape");
    n.inputs.push_back(in.id());
    n.requires_grad = n.requires_grad || nodes_[in.id()].requires_grad;
  }
  if (n.requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

const Tape::Node& Tape::node(Var v) const {
  if (v.tape() != this || v.id() >= nodes_.size()) {
    throw ContractError("Var does not belong to this tape");
  }
  return nodes_[v.id()];
}

const Tensor& Tape::value(Var v) const { return node(v).value; }

bool Tape::has_grad(Var v) const { return node(v).grad.has_value(); }

bool Tape::requires_grad(Var v) const { return node(v).requires_grad; }

const char* Tape::op_name(Var v) const { return node(v).op; }

const Tensor& Tape::grad(Var v) const {
  const Node& n = node(v);
  if (!n.grad) throw ContractError("node has no gradient; call backward() first");
  return *n.grad;
}

void Tape::zero_grad() {
  for (Node& n : nodes_) n.grad.reset();
}

void Tape::backward(Var root) {
  const Node& r = node(root);
  if (r.value.size() != 1) {
    throw ContractError("backward() needs a scalar root, got shape " +
                        shape_string(r.value.shape()));
  }
  if (!r.requires_grad) return;

  // Mark the nodes reachable from the root; only those receive gradients.
  std::vector<char> reachable(root.id() + 1, 0);
  reachable[root.id()] = 1;
  for (std::size_t i = root.id() + 1; i-- > 0;) {
    if (!reachable[i]) continue;
    for (std::size_t p : nodes_[i].inputs) reachable[p] = 1;
  }
  for (std::size_t i = 0; i <= root.id(); ++i) {
    Node& n = nodes_[i];
    if (reachable[i] && n.requires_grad && !n.grad) n.grad = Tensor::zeros(n.value.shape());
  }

  // Upstream gradients of a single backward pass are staged separately so
  // that repeated backward() calls accumulate exactly one contribution each.
  std::vector<std::optional<Tensor>> pass(root.id() + 1);
  pass[root.id()] = Tensor::filled(r.value.shape(), 1.0);

  BackwardContext ctx;
  for (std::size_t i = root.id() + 1; i-- > 0;) {
    if (!pass[i]) continue;
    Node& n = nodes_[i];
    const Tensor& upstream = *pass[i];
    for (std::size_t k = 0; k < upstream.size(); ++k) (*n.grad)[k] += upstream[k];
    if (!n.backward) continue;

    ctx.output_ = &n.value;
    ctx.output_grad_ = &upstream;
    ctx.inputs_.clear();
    ctx.input_grads_.clear();
    for (std::size_t p : n.inputs) {
      ctx.inputs_.push_back(&nodes_[p].value);
      if (nodes_[p].requires_grad) {
        if (!pass[p]) pass[p] = Tensor::zeros(nodes_[p].value.shape());
        ctx.input_grads_.push_back(&*pass[p]);
      } else {
        ctx.input_grads_.push_back(nullptr);
      }
    }
    n.backward(ctx);
    pass[i].reset();
  }
}

// ---- ops -----------------------------------------------------------------

Var matmul(Var a, Var b) {
  Tape& tape = same_tape(a, b);
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  if (A.rank() != 2 || (B.rank() != 1 && B.rank() != 2)) shape_mismatch("matmul", A.shape(), B.shape());
  const std::size_t m = A.shape()[0];
  const std::size_t k = A.shape()[1];
  if (B.shape()[0] != k) shape_mismatch("matmul", A.shape(), B.shape());
  const std::size_t n = B.rank() == 2 ? B.shape()[1] : 1;

  Shape out_shape = B.rank() == 2 ? Shape{m, n} : Shape{m};
  std::vector<double> out(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = A[i * k + p];
      if (aip == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) out[i * n + j] += aip * B[p * n + j];
    }
  }
  return tape.record("matmul", Tensor(std::move(out_shape), std::move(out)), {a, b},
                     [m, k, n](const BackwardContext& ctx) {
                       const Tensor& A = ctx.input(0);
                       const Tensor& B = ctx.input(1);
                       const Tensor& G = ctx.output_grad();
                       if (Tensor* gA = ctx.input_grad(0)) {
                         // dA = G B^T
                         for (std::size_t i = 0; i < m; ++i)
                           for (std::size_t p = 0; p < k; ++p) {
                             double s = 0.0;
                             for (std::size_t j = 0; j < n; ++j) s += G[i * n + j] * B[p * n + j];
                             (*gA)[i * k + p] += s;
                           }
                       }
                       if (Tensor* gB = ctx.input_grad(1)) {
                         // dB = A^T G
                         for (std::size_t i = 0; i < m; ++i)
                           for (std::size_t p = 0; p < k; ++p) {
                             const double aip = A[i * k + p];
                             for (std::size_t j = 0; j < n; ++j) (*gB)[p * n + j] += aip * G[i * n + j];
                           }
                       }
                     });
}

Var transpose(Var a) {
  Tape& tape = tape_of(a);
  const Tensor& A = a.value();
  if (A.rank() != 2) bad_rank("transpose", A.shape());
  const std::size_t m = A.rows(), n = A.cols();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = A[i * n + j];
  return tape.record("transpose", Tensor::matrix(n, m, std::move(out)), {a},
                     [m, n](const BackwardContext& ctx) {
                       Tensor* g = ctx.input_grad(0);
                       if (!g) return;
                       const Tensor& G = ctx.output_grad();
                       for (std::size_t i = 0; i < m; ++i)
                         for (std::size_t j = 0; j < n; ++j) (*g)[i * n + j] += G[j * m + i];
                     });
}

Var add_bias(Var x, Var bias) {
  Tape& tape = same_tape(x, bias);
  const Tensor& X = x.value();
  const Tensor& b = bias.value();
  if (X.rank() != 2 || b.rank() != 1 || b.shape()[0] != X.cols()) {
    shape_mismatch("add_bias", X.shape(), b.shape());
  }
  const std::size_t m = X.rows(), n = X.cols();
  Tensor out = X;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] += b[j];
  return tape.record("add_bias", std::move(out), {x, bias}, [m, n](const BackwardContext& ctx) {
    const Tensor& G = ctx.output_grad();
    if (Tensor* gx = ctx.input_grad(0))
      for (std::size_t i = 0; i < m * n; ++i) (*gx)[i] += G[i];
    if (Tensor* gb = ctx.input_grad(1))
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) (*gb)[j] += G[i * n + j];
  });
}

Var add(Var a, Var b) {
  Tape& tape = same_tape(a, b);
  if (a.shape() != b.shape()) shape_mismatch("add", a.shape(), b.shape());
  Tensor out = a.value();
  const Tensor& B = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += B[i];
  return tape.record("add", std::move(out), {a, b}, [](const BackwardContext& ctx) {
    const Tensor& G = ctx.output_grad();
    for (std::size_t k = 0; k < 2; ++k)
      if (Tensor* g = ctx.input_grad(k))
        for (std::size_t i = 0; i < G.size(); ++i) (*g)[i] += G[i];
  });
}

Var sub(Var a, Var b) {
  Tape& tape = same_tape(a, b);
  if (a.shape() != b.shape()) shape_mismatch("sub", a.shape(), b.shape());
  Tensor out = a.value();
  const Tensor& B = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= B[i];
  return tape.record("sub", std::move(out), {a, b}, [](const BackwardContext& ctx) {
    const Tensor& G = ctx.output_grad();
    if (Tensor* ga = ctx.input_grad(0))
      for (std::size_t i = 0; i < G.size(); ++i) (*ga)[i] += G[i];
    if (Tensor* gb = ctx.input_grad(1))
      for (std::size_t i = 0; i < G.size(); ++i) (*gb)[i] -= G[i];
  });
}

Var mul(Var a, Var b) {
  Tape& tape = same_tape(a, b);
  if (a.shape() != b.shape()) shape_mismatch("mul", a.shape(), b.shape());
  Tensor out = a.value();
  const Tensor& B = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= B[i];
  return tape.record("mul", std::move(out), {a, b}, [](const BackwardContext& ctx) {
    const Tensor& G = ctx.output_grad();
    const Tensor& A = ctx.input(0);
    const Tensor& B = ctx.input(1);
    if (Tensor* ga = ctx.input_grad(0))
      for (std::size_t i = 0; i < G.size(); ++i) (*ga)[i] += G[i] * B[i];
    if (Tensor* gb = ctx.input_grad(1))
      for (std::size_t i = 0; i < G.size(); ++i) (*gb)[i] += G[i] * A[i];
  });
}

Var neg(Var x) {
  return unary("neg", x, [](double v) { return -v; }, [](double, double) { return -1.0; });
}

Var scalar_mul(Var x, double s) {
  return unary("scalar_mul", x, [s](double v) { return s * v; }, [s](double, double) { return s; });
}

Var add_scalar(Var x, double s) {
  return unary("add_scalar", x, [s](double v) { return v + s; }, [](double, double) { return 1.0; });
}

Var relu(Var x) {
  return unary(
      "relu", x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Var square(Var x) {
  return unary("square", x, [](double v) { return v * v; }, [](double v, double) { return 2.0 * v; });
}

Var sqrt(Var x) {
  for (double v : x.value().values()) {
    if (v < 0.0) throw DomainError("sqrt of negative value " + std::to_string(v));
  }
  return unary(
      "sqrt", x, [](double v) { return std::sqrt(v); },
      [](double, double y) { return 0.5 / y; });
}

Var log(Var x) {
  for (double v : x.value().values()) {
    if (v < 0.0) throw DomainError("log of negative value " + std::to_string(v));
  }
  return unary("log", x, [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

Var exp(Var x) {
  return unary("exp", x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Var clamp_min(Var x, double lo) {
  return unary(
      "clamp_min", x, [lo](double v) { return v > lo ? v : lo; },
      [lo](double v, double) { return v > lo ? 1.0 : 0.0; });
}

Var sum_axis(Var x, std::size_t axis) {
  Tape& tape = tape_of(x);
  const Tensor& X = x.value();
  if (X.rank() == 1) {
    if (axis != 0) bad_rank("sum_axis", X.shape());
    return sum_all(x);
  }
  if (X.rank() != 2 || axis > 1) bad_rank("sum_axis", X.shape());
  const std::size_t m = X.rows(), n = X.cols();
  std::vector<double> out(axis == 0 ? n : m, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[axis == 0 ? j : i] += X[i * n + j];
  return tape.record("sum_axis", Tensor::vector(std::move(out)), {x},
                     [m, n, axis](const BackwardContext& ctx) {
                       Tensor* g = ctx.input_grad(0);
                       if (!g) return;
                       const Tensor& G = ctx.output_grad();
                       for (std::size_t i = 0; i < m; ++i)
                         for (std::size_t j = 0; j < n; ++j) (*g)[i * n + j] += G[axis == 0 ? j : i];
                     });
}

Var sum_all(Var x) {
  Tape& tape = tape_of(x);
  double total = 0.0;
  for (double v : x.value().values()) total += v;
  return tape.record("sum_all", Tensor::scalar(total), {x}, [](const BackwardContext& ctx) {
    Tensor* g = ctx.input_grad(0);
    if (!g) return;
    const double up = ctx.output_grad()[0];
    for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += up;
  });
}

Var mean_all(Var x) {
  return scalar_mul(sum_all(x), 1.0 / static_cast<double>(x.value().size()));
}

Var logsumexp(Var x) {
  Tape& tape = tape_of(x);
  const Tensor& X = x.value();
  if (X.rank() != 1 && X.rank() != 2) bad_rank("logsumexp", X.shape());
  const std::size_t m = X.rank() == 2 ? X.rows() : 1;
  const std::size_t n = X.rank() == 2 ? X.cols() : X.size();
  std::vector<double> out(m);
  for (std::size_t i = 0; i < m; ++i) {
    double hi = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) hi = std::max(hi, X[i * n + j]);
    if (std::isinf(hi)) {
      out[i] = hi;
      continue;
    }
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += std::exp(X[i * n + j] - hi);
    out[i] = hi + std::log(s);
  }
  Tensor result = X.rank() == 2 ? Tensor::vector(std::move(out)) : Tensor::scalar(out[0]);
  return tape.record("logsumexp", std::move(result), {x}, [m, n](const BackwardContext& ctx) {
    Tensor* g = ctx.input_grad(0);
    if (!g) return;
    const Tensor& X = ctx.input(0);
    const Tensor& Y = ctx.output();
    const Tensor& G = ctx.output_grad();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j)
        (*g)[i * n + j] += G[i] * std::exp(X[i * n + j] - Y[i]);
  });
}

Var concat_rows(Var a, Var b) {
  Tape& tape = same_tape(a, b);
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  if (A.rank() == 0 || A.rank() != B.rank() ||
      !std::equal(A.shape().begin() + 1, A.shape().end(), B.shape().begin() + 1)) {
    shape_mismatch("concat_rows", A.shape(), B.shape());
  }
  Shape shape = A.shape();
  shape[0] += B.shape()[0];
  std::vector<double> out(A.data());
  out.insert(out.end(), B.data().begin(), B.data().end());
  const std::size_t split = A.size();
  return tape.record("concat_rows", Tensor(std::move(shape), std::move(out)), {a, b},
                     [split](const BackwardContext& ctx) {
                       const Tensor& G = ctx.output_grad();
                       if (Tensor* ga = ctx.input_grad(0))
                         for (std::size_t i = 0; i < split; ++i) (*ga)[i] += G[i];
                       if (Tensor* gb = ctx.input_grad(1))
                         for (std::size_t i = split; i < G.size(); ++i) (*gb)[i - split] += G[i];
                     });
}

Var pick(Var x, std::span<const std::size_t> index) {
  Tape& tape = tape_of(x);
  const Tensor& X = x.value();
  if (X.rank() != 2 || index.size() != X.rows()) {
    throw ShapeError("pick: need one index per row of " + shape_string(X.shape()) + ", got " +
                     std::to_string(index.size()));
  }
  const std::size_t n = X.cols();
  std::vector<std::size_t> idx(index.begin(), index.end());
  std::vector<double> out(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] >= n) {
      throw ShapeError("pick: index " + std::to_string(idx[i]) + " out of range for " +
                       shape_string(X.shape()));
    }
    out[i] = X[i * n + idx[i]];
  }
  return tape.record("pick", Tensor::vector(std::move(out)), {x},
                     [idx = std::move(idx), n](const BackwardContext& ctx) {
                       Tensor* g = ctx.input_grad(0);
                       if (!g) return;
                       const Tensor& G = ctx.output_grad();
                       for (std::size_t i = 0; i < idx.size(); ++i) (*g)[i * n + idx[i]] += G[i];
                     });
}

Var gather_rows(Var x, std::span<const std::size_t> index) {
  Tape& tape = tape_of(x);
  const Tensor& X = x.value();
  if (X.rank() != 2 || index.empty()) bad_rank("gather_rows", X.shape());
  const std::size_t n = X.cols();
  std::vector<std::size_t> idx(index.begin(), index.end());
  std::vector<double> out(idx.size() * n);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] >= X.rows()) {
      throw ShapeError("gather_rows: row " + std::to_string(idx[i]) + " out of range for " +
                       shape_string(X.shape()));
    }
    std::copy_n(X.data().begin() + static_cast<std::ptrdiff_t>(idx[i] * n), n,
                out.begin() + static_cast<std::ptrdiff_t>(i * n));
  }
  const std::size_t rows = idx.size();
  return tape.record("gather_rows", Tensor::matrix(rows, n, std::move(out)), {x},
                     [idx = std::move(idx), n](const BackwardContext& ctx) {
                       Tensor* g = ctx.input_grad(0);
                       if (!g) return;
                       const Tensor& G = ctx.output_grad();
                       for (std::size_t i = 0; i < idx.size(); ++i)
                         for (std::size_t j = 0; j < n; ++j) (*g)[idx[i] * n + j] += G[i * n + j];
                     });
}

Var sq_distances(Var z, Var anchors) {
  Tape& tape = same_tape(z, anchors);
  const Tensor& Z = z.value();
  const Tensor& M = anchors.value();
  if (Z.rank() != 2 || M.rank() != 2 || Z.cols() != M.cols()) {
    shape_mismatch("sq_distances", Z.shape(), M.shape());
  }
  const std::size_t m = Z.rows(), c = M.rows(), n = Z.cols();
  std::vector<double> out(m * c);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t k = 0; k < c; ++k) {
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        const double diff = Z[i * n + j] - M[k * n + j];
        s += diff * diff;
      }
      out[i * c + k] = s;
    }
  return tape.record("sq_distances", Tensor::matrix(m, c, std::move(out)), {z, anchors},
                     [m, c, n](const BackwardContext& ctx) {
                       const Tensor& Z = ctx.input(0);
                       const Tensor& M = ctx.input(1);
                       const Tensor& G = ctx.output_grad();
                       Tensor* gz = ctx.input_grad(0);
                       Tensor* gm = ctx.input_grad(1);
                       for (std::size_t i = 0; i < m; ++i)
                         for (std::size_t k = 0; k < c; ++k) {
                           const double up = 2.0 * G[i * c + k];
                           if (up == 0.0) continue;
                           for (std::size_t j = 0; j < n; ++j) {
                             const double diff = Z[i * n + j] - M[k * n + j];
                             accumulate(gz, i * n + j, up * diff);
                             accumulate(gm, k * n + j, -up * diff);
                           }
                         }
                     });
}

Var prob_inclusion(Var d_sq, int n) {
  Tape& tape = tape_of(d_sq);
  const Tensor& D = d_sq.value();
  Tensor out(D.shape(), std::vector<double>(D.size()));
  for (std::size_t i = 0; i < D.size(); ++i) out[i] = special::prob_inclusion(D[i], n);
  return tape.record("prob_inclusion", std::move(out), {d_sq}, [n](const BackwardContext& ctx) {
    Tensor* g = ctx.input_grad(0);
    if (!g) return;
    const Tensor& D = ctx.input(0);
    const Tensor& G = ctx.output_grad();
    for (std::size_t i = 0; i < D.size(); ++i) {
      if (G[i] == 0.0) continue;
      (*g)[i] += G[i] * special::prob_inclusion_grad(D[i], n);
    }
  });
}

Var prob_exclusion(Var d_sq, int n) {
  Tape& tape = tape_of(d_sq);
  const Tensor& D = d_sq.value();
  if (n < 1) throw DomainError("prob_exclusion: dimension must be >= 1");
  Tensor out(D.shape(), std::vector<double>(D.size()));
  for (std::size_t i = 0; i < D.size(); ++i) out[i] = special::reg_lower_inc_gamma(0.5 * n, 0.5 * D[i]);
  return tape.record("prob_exclusion", std::move(out), {d_sq}, [n](const BackwardContext& ctx) {
    Tensor* g = ctx.input_grad(0);
    if (!g) return;
    const Tensor& D = ctx.input(0);
    const Tensor& G = ctx.output_grad();
    for (std::size_t i = 0; i < D.size(); ++i) {
      if (G[i] == 0.0) continue;
      (*g)[i] -= G[i] * special::prob_inclusion_grad(D[i], n);
    }
  });
}

}  // namespace openset::ad
