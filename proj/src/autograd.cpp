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

#include "dvg/autograd.hpp"

#include "dvg/error.hpp"

namespace dvg {

const Tensor& Var::value() const {
  if (!tape_) throw TapeError("use of an unbound Var");
  return tape_->value_of(id_);
}

bool Var::requires_grad() const { return tape_ && tape_->needs_grad(id_); }

Tape& Var::tape() const {
  if (!tape_) throw TapeError("use of an unbound Var");
  return *tape_;
}

std::size_t Tape::push(Tensor value, bool requires_grad, std::vector<std::size_t> parents,
                       BackwardFn fn) {
  if (consumed_) throw TapeError("recording on a consumed tape; call reset() first");
  nodes_.push_back(Node{std::move(value), requires_grad, std::move(parents), std::move(fn)});
  return nodes_.size() - 1;
}

Var Tape::constant(Tensor value) {
  if (!value.all_finite()) throw NumericError("constant contains NaN/Inf");
  return Var(this, push(std::move(value), false, {}, nullptr));
}

Var Tape::variable(Tensor value) {
  if (!value.all_finite()) throw NumericError("variable contains NaN/Inf");
  return Var(this, push(std::move(value), true, {}, nullptr));
}

Var Tape::param(const Parameter& p) {
  if (auto it = trainable_.find(&p); it != trainable_.end()) return Var(this, it->second);
  if (!p.value.all_finite()) throw NumericError("parameter '" + p.name + "' contains NaN/Inf");
  const std::size_t id = push(p.value, true, {}, nullptr);
  trainable_.emplace(&p, id);
  return Var(this, id);
}

Var Tape::frozen(const Parameter& p) {
  if (auto it = frozen_.find(&p); it != frozen_.end()) return Var(this, it->second);
  if (!p.value.all_finite()) throw NumericError("parameter '" + p.name + "' contains NaN/Inf");
  const std::size_t id = push(p.value, false, {}, nullptr);
  frozen_.emplace(&p, id);
  return Var(this, id);
}

Var Tape::record(const char* op, Tensor value, std::vector<std::size_t> parents, BackwardFn fn) {
  if (!value.all_finite()) {
    throw NumericError(std::string(op) + " produced NaN/Inf (output shape " +
                       shape_string(value.shape()) + ")");
  }
  bool any = false;
  for (std::size_t p : parents) any = any || nodes_.at(p).requires_grad;
  if (!any) return Var(this, push(std::move(value), false, {}, nullptr));
  return Var(this, push(std::move(value), true, std::move(parents), std::move(fn)));
}

void Tape::check_owner(const Var& v) const {
  if (!v.valid() || &v.tape() != this || v.id() >= nodes_.size()) {
    throw TapeError("variable does not belong to this tape");
  }
}

std::vector<double>& Tape::grad_buffer(std::size_t id) {
  if (grads_.size() < nodes_.size()) grads_.resize(nodes_.size());
  auto& g = grads_[id];
  if (g.empty()) g.assign(nodes_[id].value.size(), 0.0);
  return g;
}

const std::vector<double>* Tape::grad_if_any(std::size_t id) const {
  if (id >= grads_.size() || grads_[id].empty()) return nullptr;
  return &grads_[id];
}

void Tape::backward(const Var& loss) {
  check_owner(loss);
  if (consumed_) throw TapeError("backward() called twice on a consumed tape without reset()");
  const Tensor& lv = loss.value();
  if (lv.size() != 1) {
    throw ShapeError("backward() needs a scalar loss, got shape " + shape_string(lv.shape()));
  }
  consumed_ = true;
  backward_visits_ = 0;
  grads_.assign(nodes_.size(), {});
  if (!nodes_[loss.id()].requires_grad) return;
  grad_buffer(loss.id())[0] = 1.0;
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.requires_grad || grads_[i].empty()) continue;
    ++backward_visits_;
    if (n.backward) n.backward(*this, i);
  }
}

void Tape::reset() {
  nodes_.clear();
  grads_.clear();
  trainable_.clear();
  frozen_.clear();
  consumed_ = false;
  backward_visits_ = 0;
}

Tensor Tape::grad(const Var& v) const {
  check_owner(v);
  const Tensor& val = nodes_[v.id()].value;
  if (const auto* g = grad_if_any(v.id())) return Tensor(val.shape(), *g);
  return Tensor(val.shape(), 0.0);
}

Tensor Tape::grad(const Parameter& p) const {
  if (auto it = trainable_.find(&p); it != trainable_.end()) {
    if (const auto* g = grad_if_any(it->second)) return Tensor(p.value.shape(), *g);
  }
  return Tensor(p.value.shape(), 0.0);
}

std::vector<Tensor> Tape::grads(std::span<Parameter* const> params) const {
  std::vector<Tensor> out;
  out.reserve(params.size());
  for (const Parameter* p : params) out.push_back(grad(*p));
  return out;
}

}  // namespace dvg
