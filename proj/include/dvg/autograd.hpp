/* Copyright 2026 The DVG Authors

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "dvg/tensor.hpp"

namespace dvg {

// A named trainable array owned by a model. Models hand out stable
// pointers to their parameters; the tape binds them per forward pass.
struct Parameter {
  std::string name;
  Tensor value;
};

class Tape;

// Handle to a value recorded on a Tape. Cheap to copy; only valid while
// its tape is alive and not reset.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  double item() const { return value().item(); }
  bool requires_grad() const;
  Tape& tape() const;
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Ordered record of executed operations. Nodes are appended in execution
// order; backward() walks them once in reverse.
class Tape {
 public:
  // Receives the node's own id; reads its gradient and accumulates into
  // parent gradients through grad_buffer().
  using BackwardFn = std::function<void(Tape&, std::size_t)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  // Free variable that receives a gradient.
  Var variable(Tensor value);
  // Binds a parameter as a gradient-receiving leaf. Repeated binds of the
  // same parameter on one tape return the same node.
  Var param(const Parameter& p);
  // Binds a parameter as a constant; gradient still flows to its inputs.
  Var frozen(const Parameter& p);

  // Reverse sweep from a finite scalar. A tape can be consumed once.
  void backward(const Var& loss);
  bool consumed() const { return consumed_; }
  // Drops every node and gradient so the tape can be reused.
  void reset();

  // Gradient of the last backward() loss; zeros for unreached nodes.
  Tensor grad(const Var& v) const;
  // Zeros when the parameter was never bound as trainable.
  Tensor grad(const Parameter& p) const;
  std::vector<Tensor> grads(std::span<Parameter* const> params) const;

  std::size_t size() const { return nodes_.size(); }
  // Nodes processed by the last backward() call.
  std::size_t backward_visits() const { return backward_visits_; }

  // --- op implementation interface ---
  Var record(const char* op, Tensor value, std::vector<std::size_t> parents, BackwardFn fn);
  const Tensor& value_of(std::size_t id) const { return nodes_[id].value; }
  bool needs_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  const std::vector<std::size_t>& parents_of(std::size_t id) const { return nodes_[id].parents; }
  // Gradient accumulator of a node, allocated zero-filled on first use.
  std::vector<double>& grad_buffer(std::size_t id);
  const std::vector<double>* grad_if_any(std::size_t id) const;
  Var handle(std::size_t id) { return Var(this, id); }
  void check_owner(const Var& v) const;

 private:
  struct Node {
    Tensor value;
    bool requires_grad = false;
    std::vector<std::size_t> parents;
    BackwardFn backward;
  };

  std::size_t push(Tensor value, bool requires_grad, std::vector<std::size_t> parents,
                   BackwardFn fn);

  std::deque<Node> nodes_;
  std::vector<std::vector<double>> grads_;
  std::unordered_map<const Parameter*, std::size_t> trainable_;
  std::unordered_map<const Parameter*, std::size_t> frozen_;
  bool consumed_ = false;
  std::size_t backward_visits_ = 0;
};

// ---------------------------------------------------------------------------
// Differentiable operations. Each checks operand shapes (ShapeError) and
// rejects non-finite results (NumericError).

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
// Elementwise (Hadamard) product.
Var mul(const Var& a, const Var& b);
inline Var hadamard(const Var& a, const Var& b) { return mul(a, b); }
Var div(const Var& a, const Var& b);
Var add_scalar(const Var& a, double s);
Var mul_scalar(const Var& a, double s);
Var neg(const Var& a);

Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);
// x[B, in] * W[out, in]^T + b[out].
Var linear(const Var& x, const Var& weight, const Var& bias);
// x[B, n] + b[n] broadcast over rows.
Var add_row(const Var& x, const Var& b);

Var concat(std::span<const Var> parts, std::size_t axis);
Var concat(const Var& a, const Var& b, std::size_t axis);
Var slice(const Var& a, std::size_t axis, std::size_t begin, std::size_t end);

// Reductions to a one-element tensor.
Var sum(const Var& a);
Var mean(const Var& a);
// Reduce the last axis: [..., n] -> [...] (rank-1 input gives shape [1]).
Var sum_last(const Var& a);
Var l2_norm(const Var& a);
Var l1_norm(const Var& a);
// Rows scaled to unit L2 norm along the last axis.
Var normalize(const Var& a);

Var exp(const Var& a);
Var log(const Var& a);
Var sqrt(const Var& a);
Var square(const Var& a);
Var abs(const Var& a);
Var tanh(const Var& a);
Var sigmoid(const Var& a);
Var leaky_relu(const Var& a, double slope = 0.2);
// Elementwise clamp; zero gradient outside [lo, hi].
Var clamp(const Var& a, double lo, double hi);

// Mean softmax cross-entropy of logits[B, C] against class labels.
Var softmax_xent(const Var& logits, std::span<const std::size_t> labels);

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(const Var& a, const Var& b) { return mul(a, b); }
inline Var operator/(const Var& a, const Var& b) { return div(a, b); }
inline Var operator-(const Var& a) { return neg(a); }
inline Var operator+(const Var& a, double s) { return add_scalar(a, s); }
inline Var operator+(double s, const Var& a) { return add_scalar(a, s); }
inline Var operator-(const Var& a, double s) { return add_scalar(a, -s); }
inline Var operator-(double s, const Var& a) { return add_scalar(neg(a), s); }
inline Var operator*(const Var& a, double s) { return mul_scalar(a, s); }
inline Var operator*(double s, const Var& a) { return mul_scalar(a, s); }
inline Var operator/(const Var& a, double s) { return mul_scalar(a, 1.0 / s); }

}  // namespace dvg
