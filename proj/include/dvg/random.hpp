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

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

#include "dvg/tensor.hpp"

namespace dvg {

// Deterministic random stream: xoshiro256** seeded through splitmix64,
// Gaussian draws via the Box-Muller cosine branch (one normal per two
// uniforms, no cached state). Bit-identical across platforms.
class RandomSource {
 public:
  static constexpr std::string_view kAlgorithm = "xoshiro256ss+box-muller/v1";

  explicit RandomSource(std::uint64_t seed = 0);

  std::uint64_t seed() const { return seed_; }
  const std::array<std::uint64_t, 4>& state() const { return state_; }

  // Restores a stream captured by state(). Throws FormatError on an
  // unknown algorithm identifier or an all-zero state.
  static RandomSource restore(std::string_view algorithm, std::uint64_t seed,
                              const std::array<std::uint64_t, 4>& state);

  // Independent child stream, a pure function of (seed, label).
  RandomSource derive(std::string_view label) const;

  std::uint64_t next_u64();
  // Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  Tensor normal_tensor(Shape shape, double mean = 0.0, double stddev = 1.0);
  Tensor uniform_tensor(Shape shape, double lo = 0.0, double hi = 1.0);

  friend bool operator==(const RandomSource& a, const RandomSource& b) {
    return a.seed_ == b.seed_ && a.state_ == b.state_;
  }

 private:
  std::uint64_t seed_;
  std::array<std::uint64_t, 4> state_;
};

}  // namespace dvg
