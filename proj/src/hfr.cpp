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

#include "dvg/hfr.hpp"

#include <algorithm>
#include <cmath>

#include "dvg/error.hpp"

namespace dvg::hfr {

Recognizer::Recognizer(const RecognizerSpec& spec, RandomSource& rng) : spec_(spec) {
  MlpSpec trunk;
  trunk.input_dim = spec.input_dim;
  for (std::size_t h : spec.hidden) {
    trunk.layers.push_back({h, Activation::kLeakyRelu, spec.dropout});
  }
  trunk.layers.push_back({spec.embedding_dim, Activation::kNone, 0.0});
  trunk_ = Mlp("trunk", trunk, rng);
  head_ = Linear("head", spec.embedding_dim, spec.classes, rng);
}

Var Recognizer::raw_features(Tape& tape, const Var& x, bool train_mode, RandomSource* dropout_rng,
                             Binding binding) const {
  return trunk_.forward(tape, x, train_mode, dropout_rng, binding);
}

Var Recognizer::embed(Tape& tape, const Var& x, bool train_mode, RandomSource* dropout_rng,
                      Binding binding) const {
  return normalize(raw_features(tape, x, train_mode, dropout_rng, binding));
}

Var Recognizer::logits(Tape& tape, const Var& raw, Binding binding) const {
  return head_.forward(tape, raw, binding);
}

Tensor Recognizer::extract_features(const Tensor& images) const {
  return freeze().embed(images);
}

std::vector<Parameter*> Recognizer::parameters() {
  auto out = trunk_.parameters();
  out.push_back(&head_.weight);
  out.push_back(&head_.bias);
  return out;
}

std::vector<const Parameter*> Recognizer::parameters() const {
  auto out = trunk_.parameters();
  out.push_back(&head_.weight);
  out.push_back(&head_.bias);
  return out;
}

Var loss_cls(const Recognizer& net, Tape& tape, const Var& x, std::span<const std::size_t> labels,
             bool train_mode, RandomSource* dropout_rng) {
  return softmax_xent(net.logits(tape, net.raw_features(tape, x, train_mode, dropout_rng)),
                      labels);
}

Var loss_pair(const Recognizer& net, Tape& tape, const Var& x_n, const Var& x_v, bool train_mode,
              RandomSource* dropout_rng) {
  const Var f_n = net.embed(tape, x_n, train_mode, dropout_rng);
  const Var f_v = net.embed(tape, x_v, train_mode, dropout_rng);
  return mean(sum_last(square(f_n - f_v)));
}

double top1(const Recognizer& net, const Tensor& images, std::span<const std::size_t> labels) {
  if (images.rows() != labels.size()) throw ShapeError("top1: label count mismatch");
  std::size_t correct = 0;
  const std::size_t chunk = 512;
  for (std::size_t begin = 0; begin < images.rows(); begin += chunk) {
    const std::size_t end = std::min(images.rows(), begin + chunk);
    Tape tape;
    const Var raw = net.raw_features(tape, tape.constant(images.row_slice(begin, end)), false,
                                     nullptr, Binding::kFrozen);
    const Tensor z = net.logits(tape, raw, Binding::kFrozen).value();
    for (std::size_t r = 0; r < end - begin; ++r) {
      const auto row = z.row(r);
      const auto best = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
      if (best == labels[begin + r]) ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

LabelMap::LabelMap(const synth::PairedDataset& data) : ids_(data.identities()) {
  std::sort(ids_.begin(), ids_.end());
}

std::size_t LabelMap::label(std::uint32_t id) const {
  const auto it = std::lower_bound(ids_.begin(), ids_.end(), id);
  if (it == ids_.end() || *it != id) {
    throw ConfigError("identity " + std::to_string(id) + " is not a training class");
  }
  return static_cast<std::size_t>(it - ids_.begin());
}

std::vector<std::size_t> LabelMap::labels(const synth::PairedDataset& data) const {
  std::vector<std::size_t> out;
  out.reserve(data.size());
  for (std::uint32_t id : data.identity) out.push_back(label(id));
  return out;
}

void shift_image(std::span<double> image, std::size_t side, int dx, int dy) {
  const std::vector<double> src(image.begin(), image.end());
  const int n = static_cast<int>(side);
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      image[static_cast<std::size_t>(y * n + x)] =
          src[static_cast<std::size_t>(std::clamp(y - dy, 0, n - 1) * n + std::clamp(x - dx, 0, n - 1))];
    }
  }
}

FipResult pretrain_fip(const synth::PairedDataset& train, const RecognizerSpec& spec,
                       const FipConfig& config, RandomSource rng) {
  const LabelMap labels(train);
  RecognizerSpec s = spec;
  s.classes = labels.classes();

  // Split each identity's samples into fit / held-out by position.
  std::vector<std::size_t> fit, held;
  for (std::uint32_t id : train.identities()) {
    const auto idx = train.indices_of(id);
    if (idx.size() <= config.holdout_per_identity) {
      throw ConfigError("pretrain_fip: identity " + std::to_string(id) + " has only " +
                        std::to_string(idx.size()) + " samples for holdout " +
                        std::to_string(config.holdout_per_identity));
    }
    const std::size_t cut = idx.size() - config.holdout_per_identity;
    fit.insert(fit.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(cut));
    held.insert(held.end(), idx.begin() + static_cast<std::ptrdiff_t>(cut), idx.end());
  }
  const std::vector<std::size_t> all_labels = labels.labels(train);

  RandomSource init_rng = rng.derive("init");
  RandomSource batch_rng = rng.derive("batches");
  FipResult result{Recognizer(s, init_rng), 0.0, 0.0};
  Recognizer& net = result.model;
  AdamConfig adam;
  adam.lr = config.lr;
  Optimizer opt = Optimizer::adam(adam);
  auto params = net.parameters();

  std::vector<std::size_t> rows(config.batch), batch_labels(config.batch);
  const double cut = config.decay_fraction * static_cast<double>(config.steps);
  for (std::size_t step = 0; step < config.steps; ++step) {
    opt.set_lr(static_cast<double>(step) < cut ? config.lr : config.lr_late);
    for (std::size_t i = 0; i < config.batch; ++i) {
      rows[i] = fit[batch_rng.below(fit.size())];
      batch_labels[i] = all_labels[rows[i]];
    }
    Tape tape;
    Tensor xb = train.v_images.gather_rows(rows);
    if (config.shift_augment > 0) {
      for (std::size_t i = 0; i < config.batch; ++i) {
        const int span = 2 * static_cast<int>(config.shift_augment) + 1;
        const int dx = static_cast<int>(batch_rng.below(span)) - static_cast<int>(config.shift_augment);
        const int dy = static_cast<int>(batch_rng.below(span)) - static_cast<int>(config.shift_augment);
        shift_image(xb.row(i), train.image_side, dx, dy);
      }
    }
    for (std::size_t i = 0; i < config.batch; ++i) {
      if (batch_rng.uniform() < config.photometric_augment) {
        synth::photometric_jitter(xb.row(i), train.image_side, batch_rng);
      }
    }
    const Var x = tape.constant(std::move(xb));
    const Var loss = loss_cls(net, tape, x, batch_labels, true, &batch_rng);
    tape.backward(loss);
    opt.step(params, tape.grads(params));
  }

  std::vector<std::size_t> held_labels;
  for (std::size_t i : held) held_labels.push_back(all_labels[i]);
  result.heldout_top1_v = top1(net, train.v_images.gather_rows(held), held_labels);
  result.heldout_top1_n = top1(net, train.n_images.gather_rows(held), held_labels);
  if (result.heldout_top1_v < config.gate) {
    throw GateError("feature extractor held-out modality-V top-1 " +
                    std::to_string(result.heldout_top1_v) + " is below the gate " +
                    std::to_string(config.gate));
  }
  return result;
}

HfrTrainer::HfrTrainer(Recognizer model, const synth::PairedDataset& real,
                       const synth::PairedDataset* pool, const HfrConfig& config,
                       const RandomSource& rng)
    : model_(std::move(model)),
      real_(real),
      pool_(pool && pool->size() > 0 ? pool : nullptr),
      config_(config),
      optimizer_(Optimizer::sgd_momentum({config.lr, config.momentum, config.weight_decay})),
      real_rng_(rng.derive("real")),
      pool_rng_(rng.derive("pool")),
      labels_(LabelMap(real).labels(real)) {
  if (config.batch < 2 || config.batch % 2 != 0) {
    throw ConfigError("hfr batch must be an even number >= 2");
  }
  if (LabelMap(real).classes() != model_.spec().classes) {
    throw ConfigError("recognizer head has " + std::to_string(model_.spec().classes) +
                      " classes but the training split has " +
                      std::to_string(LabelMap(real).classes()));
  }
}

double HfrTrainer::lr_at(std::size_t step) const {
  const double cut = config_.decay_fraction * static_cast<double>(config_.steps);
  return static_cast<double>(step) < cut ? config_.lr : config_.lr_late;
}

HfrStepLog HfrTrainer::step() {
  HfrStepLog log;
  log.lr = lr_at(step_);
  optimizer_.set_lr(log.lr);
  const std::size_t half = config_.batch / 2;

  std::vector<std::size_t> rows(half), labels(config_.batch);
  for (std::size_t i = 0; i < half; ++i) rows[i] = real_rng_.below(real_.size());
  for (std::size_t i = 0; i < half; ++i) {
    labels[i] = labels_[rows[i]];
    labels[half + i] = labels_[rows[i]];
  }
  Tape tape;
  Tensor n = real_.n_images.gather_rows(rows);
  Tensor v = real_.v_images.gather_rows(rows);
  n.storage().insert(n.storage().end(), v.storage().begin(), v.storage().end());
  const Var x = tape.constant(Tensor(Shape{config_.batch, real_.pixels()}, std::move(n.storage())));
  Var loss = loss_cls(model_, tape, x, labels, true, &real_rng_);
  log.cls = loss.item();

  if (pool_) {
    std::vector<std::size_t> prow(half);
    for (std::size_t i = 0; i < half; ++i) prow[i] = pool_rng_.below(pool_->size());
    const Var pn = tape.constant(pool_->n_images.gather_rows(prow));
    const Var pv = tape.constant(pool_->v_images.gather_rows(prow));
    const Var pair = loss_pair(model_, tape, pn, pv, true, &pool_rng_);
    log.pair = pair.item();
    log.has_pair = true;
    if (config_.alpha1 != 0.0) loss = loss + config_.alpha1 * pair;
  }
  log.total = loss.item();
  if (!std::isfinite(log.total)) throw NumericError("hfr loss is not finite");
  tape.backward(loss);
  auto params = model_.parameters();
  optimizer_.step(params, tape.grads(params));
  ++step_;
  return log;
}

std::vector<HfrStepLog> HfrTrainer::run(std::size_t steps) {
  std::vector<HfrStepLog> out;
  out.reserve(steps);
  for (std::size_t i = 0; i < steps; ++i) out.push_back(step());
  return out;
}

}  // namespace dvg::hfr
