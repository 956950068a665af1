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

#include "dvg/random.hpp"

#include <cmath>
#include <numbers>

#include "dvg/error.hpp"
#include "dvg/hash.hpp"

namespace dvg {

namespace {

std::uint64_t splitmix64(std::uint64_t& x) {
  std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

RandomSource::RandomSource(std::uint64_t seed) : seed_(seed) {
  std::uint64_t sm = seed;
  for (auto& s : state_) s = splitmix64(sm);
}

RandomSource RandomSource::restore(std::string_view algorithm, std::uint64_t seed,
                                   const std::array<std::uint64_t, 4>& state) {
  if (algorithm != kAlgorithm) {
    throw FormatError("unknown random algorithm '" + std::string(algorithm) + "', expected '" +
                      std::string(kAlgorithm) + "'");
  }
  if (state[0] == 0 && state[1] == 0 && state[2] == 0 && state[3] == 0) {
    throw FormatError("invalid all-zero random state");
  }
  RandomSource r(seed);
  r.state_ = state;
  return r;
}

RandomSource RandomSource::derive(std::string_view label) const {
  // Mix the label hash through splitmix so that nearby labels land far apart.
  std::uint64_t x = seed_ ^ rotl(fnv1a64(label), 17);
  std::uint64_t child = splitmix64(x);
  child ^= splitmix64(x);
  return RandomSource(child);
}

std::uint64_t RandomSource::next_u64() {
  const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
  const std::uint64_t t = state_[1] << 17;
  state_[2] ^= state_[0];
  state_[3] ^= state_[1];
  state_[1] ^= state_[2];
  state_[0] ^= state_[3];
  state_[2] ^= t;
  state_[3] = rotl(state_[3], 45);
  return result;
}

double RandomSource::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

std::uint64_t RandomSource::below(std::uint64_t n) {
  if (n == 0) throw ConfigError("below(0)");
  // Rejection sampling keeps the draw unbiased.
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x;
  do {
    x = next_u64();
  } while (x >= limit);
  return x % n;
}

double RandomSource::normal() {
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

Tensor RandomSource::normal_tensor(Shape shape, double mean, double stddev) {
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = normal(mean, stddev);
  return t;
}

Tensor RandomSource::uniform_tensor(Shape shape, double lo, double hi) {
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = uniform(lo, hi);
  return t;
}

}  // namespace dvg
