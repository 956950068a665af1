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

#include "dvg/nn.hpp"

#include <cmath>

#include "dvg/error.hpp"

namespace dvg {

std::string activation_name(Activation a) {
  switch (a) {
    case Activation::kNone: return "none";
    case Activation::kLeakyRelu: return "leaky_relu";
    case Activation::kSigmoid: return "sigmoid";
    case Activation::kTanh: return "tanh";
  }
  return "unknown";
}

Linear::Linear(const std::string& name, std::size_t fan_in, std::size_t fan_out,
               RandomSource& rng) {
  if (fan_in == 0 || fan_out == 0) {
    throw ShapeError("layer '" + name + "' has a zero dimension (" + std::to_string(fan_in) +
                     " -> " + std::to_string(fan_out) + ")");
  }
  const double std = std::sqrt(2.0 / static_cast<double>(fan_in));
  weight = Parameter{name + ".weight", rng.normal_tensor(Shape{fan_out, fan_in}, 0.0, std)};
  bias = Parameter{name + ".bias", Tensor(Shape{fan_out}, 0.0)};
}

Var Linear::forward(Tape& tape, const Var& x, Binding binding) const {
  if (binding == Binding::kTrainable) return linear(x, tape.param(weight), tape.param(bias));
  return linear(x, tape.frozen(weight), tape.frozen(bias));
}

Mlp::Mlp(const std::string& name, const MlpSpec& spec, RandomSource& rng) : spec_(spec) {
  if (spec.layers.empty()) throw ShapeError("mlp '" + name + "' has no layers");
  std::size_t in = spec.input_dim;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& l = spec.layers[i];
    if (l.dropout < 0.0 || l.dropout >= 1.0) {
      throw ConfigError("mlp '" + name + "' layer " + std::to_string(i) + " dropout out of [0,1)");
    }
    layers_.emplace_back(name + "." + std::to_string(i), in, l.fan_out, rng);
    in = l.fan_out;
  }
}

Var dropout(const Var& x, double p, RandomSource& rng) {
  Tensor mask(x.shape());
  const double keep_scale = 1.0 / (1.0 - p);
  for (double& m : mask.data()) m = rng.uniform() < p ? 0.0 : keep_scale;
  return mul(x, x.tape().constant(std::move(mask)));
}

namespace {

Var activate(const Var& x, Activation a) {
  switch (a) {
    case Activation::kNone: return x;
    case Activation::kLeakyRelu: return leaky_relu(x, 0.2);
    case Activation::kSigmoid: return sigmoid(x);
    case Activation::kTanh: return tanh(x);
  }
  return x;
}

}  // namespace

Var Mlp::forward(Tape& tape, const Var& x, bool train_mode, RandomSource* dropout_rng,
                 Binding binding) const {
  if (x.shape().size() != 2 || x.shape()[1] != spec_.input_dim) {
    throw ShapeError("mlp expects [batch, " + std::to_string(spec_.input_dim) + "], got " +
                     shape_string(x.shape()));
  }
  Var h = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    h = activate(layers_[i].forward(tape, h, binding), spec_.layers[i].activation);
    const double p = spec_.layers[i].dropout;
    if (train_mode && p > 0.0) {
      if (!dropout_rng) throw ConfigError("train-mode dropout needs a random source");
      h = dropout(h, p, *dropout_rng);
    }
  }
  return h;
}

Tensor Mlp::infer(const Tensor& x) const {
  Tape tape;
  return forward(tape, tape.constant(x), false, nullptr, Binding::kFrozen).value();
}

std::vector<Parameter*> Mlp::parameters() {
  std::vector<Parameter*> out;
  for (Linear& l : layers_) {
    out.push_back(&l.weight);
    out.push_back(&l.bias);
  }
  return out;
}

std::vector<const Parameter*> Mlp::parameters() const {
  std::vector<const Parameter*> out;
  for (const Linear& l : layers_) {
    out.push_back(&l.weight);
    out.push_back(&l.bias);
  }
  return out;
}

Optimizer Optimizer::adam(const AdamConfig& c) {
  Optimizer o;
  o.state_.kind = OptimizerKind::kAdam;
  o.state_.lr = c.lr;
  o.state_.beta1 = c.beta1;
  o.state_.beta2 = c.beta2;
  o.state_.eps = c.eps;
  o.state_.weight_decay = c.weight_decay;
  return o;
}

Optimizer Optimizer::sgd_momentum(const SgdConfig& c) {
  Optimizer o;
  o.state_.kind = OptimizerKind::kSgdMomentum;
  o.state_.lr = c.lr;
  o.state_.beta1 = c.momentum;
  o.state_.weight_decay = c.weight_decay;
  return o;
}

void Optimizer::step(const std::vector<Parameter*>& params, const std::vector<Tensor>& grads) {
  if (params.size() != grads.size()) {
    throw ShapeError("optimizer: " + std::to_string(grads.size()) + " gradients for " +
                     std::to_string(params.size()) + " parameters");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i]->value.shape() != grads[i].shape()) {
      throw ShapeError("optimizer: gradient shape " + shape_string(grads[i].shape()) +
                       " for parameter '" + params[i]->name + "' of shape " +
                       shape_string(params[i]->value.shape()));
    }
    if (!grads[i].all_finite()) {
      throw NumericError("optimizer: non-finite gradient for '" + params[i]->name + "'");
    }
  }
  auto& s = state_;
  const bool adam = s.kind == OptimizerKind::kAdam;
  if (s.first.empty()) {
    for (const Parameter* p : params) {
      s.first.emplace_back(p->value.shape(), 0.0);
      if (adam) s.second.emplace_back(p->value.shape(), 0.0);
    }
  } else if (s.first.size() != params.size()) {
    throw ShapeError("optimizer: buffer count changed between steps");
  }
  ++s.step;
  const double bc1 = adam ? 1.0 - std::pow(s.beta1, static_cast<double>(s.step)) : 1.0;
  const double bc2 = adam ? 1.0 - std::pow(s.beta2, static_cast<double>(s.step)) : 1.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& w = params[i]->value.storage();
    const auto& g = grads[i].storage();
    auto& m = s.first[i].storage();
    if (m.size() != w.size()) throw ShapeError("optimizer: buffer shape mismatch");
    if (adam) {
      auto& v = s.second[i].storage();
      for (std::size_t k = 0; k < w.size(); ++k) {
        const double gk = g[k] + s.weight_decay * w[k];
        m[k] = s.beta1 * m[k] + (1.0 - s.beta1) * gk;
        v[k] = s.beta2 * v[k] + (1.0 - s.beta2) * gk * gk;
        w[k] -= s.lr * (m[k] / bc1) / (std::sqrt(v[k] / bc2) + s.eps);
      }
    } else {
      for (std::size_t k = 0; k < w.size(); ++k) {
        m[k] = s.beta1 * m[k] + g[k] + s.weight_decay * w[k];
        w[k] -= s.lr * m[k];
      }
    }
  }
}

}  // namespace dvg
