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

#include "dvg/autograd.hpp"
#include "dvg/nn.hpp"

namespace dvg {

// Maps image rows [B, pixels] to unit-L2 feature rows [B, dim]. Gradients
// flow to the images only; the extractor itself is never trained.
class FeatureExtractor {
 public:
  virtual ~FeatureExtractor() = default;

  virtual Var embed(Tape& tape, const Var& images) const = 0;
  virtual std::size_t feature_dim() const = 0;

  // Tape-free batched evaluation.
  Tensor embed(const Tensor& images, std::size_t chunk = 512) const;
};

// Frozen classifier trunk followed by unit-L2 normalisation.
class FrozenTrunk final : public FeatureExtractor {
 public:
  FrozenTrunk() = default;
  explicit FrozenTrunk(Mlp trunk) : trunk_(std::move(trunk)) {}

  Var embed(Tape& tape, const Var& images) const override;
  using FeatureExtractor::embed;
  std::size_t feature_dim() const override { return trunk_.output_dim(); }

  const Mlp& trunk() const { return trunk_; }
  // FNV-1a over every parameter byte; changes iff any weight changes.
  std::uint64_t fingerprint() const;

 private:
  Mlp trunk_;
};

std::uint64_t parameter_fingerprint(const std::vector<const Parameter*>& params);

}  // namespace dvg
