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
#include <string>
#include <vector>

#include "dvg/autograd.hpp"
#include "dvg/random.hpp"

namespace dvg {

enum class Activation { kNone, kLeakyRelu, kSigmoid, kTanh };

std::string activation_name(Activation a);

// How a forward pass binds parameters on the tape.
enum class Binding { kTrainable, kFrozen };

// Fully connected layer y = x W^T + b, W is [fan_out x fan_in].
class Linear {
 public:
  Linear() = default;
  // He-normal weights N(0, sqrt(2 / fan_in)), zero bias.
  Linear(const std::string& name, std::size_t fan_in, std::size_t fan_out, RandomSource& rng);

  std::size_t fan_in() const { return weight.value.shape()[1]; }
  std::size_t fan_out() const { return weight.value.shape()[0]; }

  Var forward(Tape& tape, const Var& x, Binding binding) const;

  Parameter weight;
  Parameter bias;
};

struct LayerSpec {
  std::size_t fan_out = 0;
  Activation activation = Activation::kNone;
  double dropout = 0.0;  // applied after the activation in train mode
};

struct MlpSpec {
  std::size_t input_dim = 0;
  std::vector<LayerSpec> layers;
};

// Stack of Linear layers with per-layer activation and inverted dropout.
class Mlp {
 public:
  Mlp() = default;
  Mlp(const std::string& name, const MlpSpec& spec, RandomSource& rng);

  const MlpSpec& spec() const { return spec_; }
  std::size_t input_dim() const { return spec_.input_dim; }
  std::size_t output_dim() const { return spec_.layers.back().fan_out; }

  // Dropout needs dropout_rng when train_mode is set and some layer has p > 0.
  Var forward(Tape& tape, const Var& x, bool train_mode, RandomSource* dropout_rng,
              Binding binding = Binding::kTrainable) const;

  // Tape-free inference with dropout off.
  Tensor infer(const Tensor& x) const;

  // Stable order: layer by layer, weight before bias.
  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;

  std::vector<Linear>& layers() { return layers_; }
  const std::vector<Linear>& layers() const { return layers_; }

 private:
  MlpSpec spec_;
  std::vector<Linear> layers_;
};

// Inverted dropout: zero with probability p, scale survivors by 1/(1-p).
Var dropout(const Var& x, double p, RandomSource& rng);

struct AdamConfig {
  double lr = 2e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

struct SgdConfig {
  double lr = 1e-3;
  double momentum = 0.9;
  double weight_decay = 5e-4;
};

enum class OptimizerKind { kAdam = 0, kSgdMomentum = 1 };

// Hyperparameters plus per-parameter moment buffers. For Adam, first holds
// the first moments and second the second moments; for SGD, first holds
// the velocity and second is unused.
struct OptimizerState {
  OptimizerKind kind = OptimizerKind::kAdam;
  double lr = 0.0;
  double beta1 = 0.0;  // Adam beta1, or SGD momentum
  double beta2 = 0.0;
  double eps = 0.0;
  double weight_decay = 0.0;
  std::uint64_t step = 0;
  std::vector<Tensor> first;
  std::vector<Tensor> second;

  friend bool operator==(const OptimizerState&, const OptimizerState&) = default;
};

class Optimizer {
 public:
  static Optimizer adam(const AdamConfig& c);
  static Optimizer sgd_momentum(const SgdConfig& c);
  explicit Optimizer(OptimizerState state) : state_(std::move(state)) {}

  // Applies one update. Throws ShapeError on misaligned gradients and
  // NumericError on non-finite gradients.
  void step(const std::vector<Parameter*>& params, const std::vector<Tensor>& grads);

  void set_lr(double lr) { state_.lr = lr; }
  double lr() const { return state_.lr; }
  std::uint64_t steps() const { return state_.step; }
  const OptimizerState& state() const { return state_; }
  OptimizerState& state() { return state_; }

 private:
  Optimizer() = default;
  OptimizerState state_;
};

}  // namespace dvg
