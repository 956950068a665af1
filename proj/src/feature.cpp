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

#include "dvg/feature.hpp"

#include <algorithm>

#include "dvg/hash.hpp"

namespace dvg {

Tensor FeatureExtractor::embed(const Tensor& images, std::size_t chunk) const {
  const std::size_t n = images.rows();
  Tensor out(Shape{n, feature_dim()});
  for (std::size_t begin = 0; begin < n; begin += chunk) {
    const std::size_t end = std::min(n, begin + chunk);
    Tape tape;
    const Tensor f = embed(tape, tape.constant(images.row_slice(begin, end))).value();
    std::copy(f.storage().begin(), f.storage().end(),
              out.storage().begin() + begin * feature_dim());
  }
  return out;
}

Var FrozenTrunk::embed(Tape& tape, const Var& images) const {
  return normalize(trunk_.forward(tape, images, false, nullptr, Binding::kFrozen));
}

std::uint64_t FrozenTrunk::fingerprint() const { return parameter_fingerprint(trunk_.parameters()); }

std::uint64_t parameter_fingerprint(const std::vector<const Parameter*>& params) {
  std::uint64_t h = kFnvOffset;
  for (const Parameter* p : params) {
    h = fnv1a64(p->name, h);
    const auto& d = p->value.storage();
    h = fnv1a64(std::span<const unsigned char>(reinterpret_cast<const unsigned char*>(d.data()),
                                               d.size() * sizeof(double)),
                h);
  }
  return h;
}

}  // namespace dvg
