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

// Minimal tape-based reverse-mode differentiation over dense double arrays.
//
// A Tape owns every node built during one step. Nodes are appended in
// evaluation order, so parents always precede children and the graph is
// acyclic by construction. Var is a cheap handle (tape pointer + index).
//
//   ad::Tape tape;
//   ad::Var w = tape.leaf(ad::Tensor::vector({1.0, 2.0}), /*requires_grad=*/true);
//   ad::Var loss = ad::sum_all(ad::square(w));
//   tape.backward(loss);
//   tape.grad(w);  // [2, 4]
//
// The only implicit broadcast is add_bias (a length-n vector added to each
// row of an m x n matrix). Every other shape mismatch throws ShapeError.
//
// A Tape and its Vars must stay on one thread.

#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace openset::ad {

using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape& shape);

// Dense row-major array. Rank 0 is a scalar.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> values);

  static Tensor zeros(Shape shape);
  static Tensor filled(Shape shape, double value);
  static Tensor scalar(double value);
  static Tensor vector(std::vector<double> values);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return values_.size(); }
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }
  const std::vector<double>& data() const { return values_; }

  double operator[](std::size_t i) const { return values_[i]; }
  double& operator[](std::size_t i) { return values_[i]; }
  double at(std::size_t r, std::size_t c) const { return values_[r * cols() + c]; }
  double& at(std::size_t r, std::size_t c) { return values_[r * cols() + c]; }

  // Value of a single-element tensor.
  double item() const;

  bool operator==(const Tensor& other) const = default;

 private:
  Shape shape_;
  std::vector<double> values_;
};

class Tape;

class Var {
 public:
  Var() = default;

  Tape* tape() const { return tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

// View handed to an op's backward rule. input_grad(i) is null for inputs
// that do not require gradients.
class BackwardContext {
 public:
  const Tensor& output() const { return *output_; }
  const Tensor& output_grad() const { return *output_grad_; }
  const Tensor& input(std::size_t i) const { return *inputs_[i]; }
  Tensor* input_grad(std::size_t i) const { return input_grads_[i]; }

 private:
  friend class Tape;
  const Tensor* output_ = nullptr;
  const Tensor* output_grad_ = nullptr;
  std::vector<const Tensor*> inputs_;
  std::vector<Tensor*> input_grads_;
};

using BackwardFn = std::function<void(const BackwardContext&)>;

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Tensor value, bool requires_grad = false);
  Var constant(Tensor value) { return leaf(std::move(value), false); }

  // Appends an op node. Used by the op free functions below; exposed so
  // that callers can register custom differentiable ops.
  Var record(const char* op, Tensor value, std::vector<Var> inputs, BackwardFn backward);

  // Seeds d(root)/d(root) = 1 and accumulates into every reachable node that
  // requires gradients. Gradients add up across calls until zero_grad().
  void backward(Var root);
  void zero_grad();

  const Tensor& value(Var v) const;
  // Gradient of a node; throws ContractError when it has none yet.
  const Tensor& grad(Var v) const;
  bool has_grad(Var v) const;
  bool requires_grad(Var v) const;
  const char* op_name(Var v) const;

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    const char* op = "leaf";
    Tensor value;
    std::optional<Tensor> grad;
    bool requires_grad = false;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
  };

  const Node& node(Var v) const;

  std::vector<Node> nodes_;
};

// ---- ops -----------------------------------------------------------------

// [m,k] x [k,n] -> [m,n]; [m,k] x [k] -> [m].
Var matmul(Var a, Var b);
Var transpose(Var a);
// [m,n] + [n] broadcast over rows.
Var add_bias(Var x, Var bias);

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var neg(Var x);
Var scalar_mul(Var x, double s);
Var add_scalar(Var x, double s);

Var relu(Var x);
Var square(Var x);
Var sqrt(Var x);
Var log(Var x);
Var exp(Var x);
// max(x, lo); gradient passes only where x > lo.
Var clamp_min(Var x, double lo);

// Rank 2: axis 0 sums columns -> [n], axis 1 sums rows -> [m].
// Rank 1: axis 0 -> scalar.
Var sum_axis(Var x, std::size_t axis);
Var sum_all(Var x);
Var mean_all(Var x);

// Rank 1 -> scalar; rank 2 -> one value per row.
Var logsumexp(Var x);

// Stacks along the first axis. Operands must agree on trailing dims.
Var concat_rows(Var a, Var b);

// out[i] = x[i, index[i]].
Var pick(Var x, std::span<const std::size_t> index);
// out[i, :] = x[index[i], :].
Var gather_rows(Var x, std::span<const std::size_t> index);

// out[i, c] = ||z_i - m_c||^2 for z [m,n] and anchors [C,n].
Var sq_distances(Var z, Var anchors);

// Elementwise chi-square upper tail Q(n/2, x/2) with the chi-square density
// as its derivative.
Var prob_inclusion(Var d_sq, int n);
// Complement 1 - prob_inclusion evaluated directly as P(n/2, x/2), which
// keeps full relative precision when the inclusion probability is near 1.
Var prob_exclusion(Var d_sq, int n);

}  // namespace openset::ad
