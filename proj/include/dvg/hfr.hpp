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

#include <cstdint>
#include <span>
#include <vector>

#include "dvg/autograd.hpp"
#include "dvg/feature.hpp"
#include "dvg/nn.hpp"
#include "dvg/random.hpp"
#include "dvg/synthdata.hpp"

namespace dvg::hfr {

struct RecognizerSpec {
  std::size_t input_dim = synth::kImagePixels;
  std::vector<std::size_t> hidden = {256, 128};
  std::size_t embedding_dim = 64;
  double dropout = 0.5;  // on trunk hidden layers
  std::size_t classes = 100;
};

// Trunk emits a raw embedding; the classifier head reads the raw embedding
// and matching uses its unit-L2 normalisation.
class Recognizer {
 public:
  Recognizer() = default;
  Recognizer(const RecognizerSpec& spec, RandomSource& rng);

  const RecognizerSpec& spec() const { return spec_; }

  Var raw_features(Tape& tape, const Var& x, bool train_mode, RandomSource* dropout_rng,
                   Binding binding = Binding::kTrainable) const;
  Var embed(Tape& tape, const Var& x, bool train_mode, RandomSource* dropout_rng,
            Binding binding = Binding::kTrainable) const;
  Var logits(Tape& tape, const Var& raw, Binding binding = Binding::kTrainable) const;

  // Evaluation-mode unit-norm features of image rows.
  Tensor extract_features(const Tensor& images) const;
  FrozenTrunk freeze() const { return FrozenTrunk(trunk_); }

  // Trunk parameters first, then the head.
  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;

  Mlp& trunk() { return trunk_; }
  const Mlp& trunk() const { return trunk_; }
  Linear& head() { return head_; }
  const Linear& head() const { return head_; }

 private:
  RecognizerSpec spec_;
  Mlp trunk_;
  Linear head_;
};

// Mean softmax cross-entropy of the head over a labelled batch.
Var loss_cls(const Recognizer& net, Tape& tape, const Var& x, std::span<const std::size_t> labels,
             bool train_mode, RandomSource* dropout_rng);

// Mean ||F(x_n) - F(x_v)||^2 over unit-norm embeddings of paired rows.
Var loss_pair(const Recognizer& net, Tape& tape, const Var& x_n, const Var& x_v, bool train_mode,
              RandomSource* dropout_rng);

// Fraction of rows whose argmax logit equals the label (evaluation mode).
double top1(const Recognizer& net, const Tensor& images, std::span<const std::size_t> labels);

// Maps identity ids of a labelled split to dense class indices (ascending id).
class LabelMap {
 public:
  explicit LabelMap(const synth::PairedDataset& data);
  std::size_t classes() const { return ids_.size(); }
  std::size_t label(std::uint32_t id) const;
  std::vector<std::size_t> labels(const synth::PairedDataset& data) const;

 private:
  std::vector<std::uint32_t> ids_;
};

struct FipConfig {
  std::size_t steps = 20000;
  std::size_t batch = 64;
  double lr = 1e-3;
  double lr_late = 1e-4;
  double decay_fraction = 0.75;  // lr drops to lr_late after this fraction of steps
  std::size_t holdout_per_identity = 4;
  double gate = 0.90;
  std::size_t shift_augment = 2;  // random integer shift of fit images, px
  double photometric_augment = 0.8;  // probability of photometric jitter per image
};

// Translates a square image in place with edge replication.
void shift_image(std::span<double> image, std::size_t side, int dx, int dy);

struct FipResult {
  Recognizer model;
  double heldout_top1_v = 0.0;
  double heldout_top1_n = 0.0;
};

// Trains the identity classifier on modality-V images of the first
// (samples - holdout) samples of each identity and scores the rest.
// Throws GateError when held-out modality-V top-1 is below the gate.
FipResult pretrain_fip(const synth::PairedDataset& train, const RecognizerSpec& spec,
                       const FipConfig& config, RandomSource rng);

struct HfrConfig {
  std::size_t steps = 3000;
  std::size_t batch = 32;         // images per real batch and per generated batch
  double lr = 1e-3;
  double lr_late = 5e-4;
  double decay_fraction = 0.6;    // lr drops to lr_late after this fraction of steps
  double momentum = 0.9;
  double weight_decay = 5e-4;
  double alpha1 = 0.001;
};

struct HfrStepLog {
  double cls = 0.0;
  double pair = 0.0;
  double total = 0.0;
  double lr = 0.0;
  bool has_pair = false;
};

// Labelled real batches are modality balanced: batch/2 pairs contribute both
// their N and V images. Generated batches are batch/2 pool pairs. Real and
// pool draws use separate streams, so alpha1 = 0 reproduces the pool-free
// trajectory bit for bit.
class HfrTrainer {
 public:
  HfrTrainer(Recognizer model, const synth::PairedDataset& real, const synth::PairedDataset* pool,
             const HfrConfig& config, const RandomSource& rng);

  HfrStepLog step();
  std::vector<HfrStepLog> run(std::size_t steps);
  bool done() const { return step_ >= config_.steps; }

  double lr_at(std::size_t step) const;

  Recognizer& model() { return model_; }
  const Recognizer& model() const { return model_; }
  Optimizer& optimizer() { return optimizer_; }
  RandomSource& real_rng() { return real_rng_; }
  RandomSource& pool_rng() { return pool_rng_; }
  std::size_t step_index() const { return step_; }
  void set_step_index(std::size_t s) { step_ = s; }

 private:
  Recognizer model_;
  const synth::PairedDataset& real_;
  const synth::PairedDataset* pool_;
  HfrConfig config_;
  Optimizer optimizer_;
  RandomSource real_rng_;
  RandomSource pool_rng_;
  std::vector<std::size_t> labels_;
  std::size_t step_ = 0;
};

}  // namespace dvg::hfr
