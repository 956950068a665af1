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
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dvg/autograd.hpp"
#include "dvg/nn.hpp"
#include "dvg/random.hpp"
#include "dvg/tensor.hpp"

namespace dvg::ckpt {

inline constexpr char kMagic[4] = {'D', 'V', 'G', 'C'};
inline constexpr std::uint32_t kVersion = 1;

// Training state of one stage.
//
// Layout (little-endian): "DVGC", u32 version, u64 config hash, u16 kind
// length + kind, u64 step, u32 meta length + meta JSON, u64 header checksum;
// then three record lists, each a u32 count followed by records that end
// in a u64 FNV-1a checksum of their own bytes:
//   tensor:    u16 name length, name, u8 rank, u32 dims[rank], f64 data
//   optimizer: u16 name length, name, u8 kind, f64 lr, beta1, beta2, eps,
//              weight decay, u64 step, u32 count + unnamed tensors (first),
//              u32 count + unnamed tensors (second)
//   rng:       u16 name length, name, u16 algorithm length, algorithm,
//              u64 seed, u64 state[4]
struct Checkpoint {
  std::string kind;
  std::uint64_t config_hash = 0;
  std::uint64_t step = 0;
  std::string meta;
  std::vector<std::pair<std::string, Tensor>> tensors;
  std::vector<std::pair<std::string, OptimizerState>> optimizers;
  std::vector<std::pair<std::string, RandomSource>> rngs;

  void add_parameters(const std::vector<const Parameter*>& params);
  void add_parameters(const std::vector<Parameter*>& params);
  // Copies stored values into params by name. Throws FormatError on a
  // missing name or a shape mismatch.
  void restore_parameters(const std::vector<Parameter*>& params) const;

  const Tensor& tensor(const std::string& name) const;
  const OptimizerState& optimizer(const std::string& name) const;
  const RandomSource& rng(const std::string& name) const;
};

std::vector<unsigned char> encode(const Checkpoint& ckpt);
// Throws FormatError on bad magic, version, checksum or truncation.
Checkpoint decode(const std::vector<unsigned char>& bytes, const std::string& source);

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
// With expected_hash set, a different stored hash raises LineageError.
Checkpoint load_checkpoint(const std::string& path,
                           std::optional<std::uint64_t> expected_hash = std::nullopt);

}  // namespace dvg::ckpt
