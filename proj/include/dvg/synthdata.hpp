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
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "dvg/random.hpp"
#include "dvg/tensor.hpp"

namespace dvg::synth {

inline constexpr std::size_t kImageSide = 32;
inline constexpr std::size_t kImagePixels = kImageSide * kImageSide;
inline constexpr std::uint32_t kFormatVersion = 1;
inline constexpr char kMagic[4] = {'D', 'V', 'G', 'D'};

// Glyph of three primitives in a frame centred on the canvas (pixel units):
//   [0..3]  ring A: centre x, centre y, radius, stroke width
//   [4..7]  ring B: centre x, centre y, radius, stroke width
//   [8..11] bar:    centre x, centre y, half length, orientation (radians)
struct IdentityParams {
  std::uint32_t id = 0;
  std::array<double, 12> glyph{};
};

struct NuisanceParams {
  double rotation_deg = 0.0;  // [-25, 25]
  double shift_x = 0.0;       // [-3, 3] px
  double shift_y = 0.0;       // [-3, 3] px
  double scale = 1.0;         // [0.85, 1.15]
  double gain = 1.0;          // [0.9, 1.1]
};

// Identity glyph drawn from the dataset stream derived for this id.
IdentityParams sample_identity(const RandomSource& dataset_rng, std::uint32_t id);
NuisanceParams sample_nuisance(RandomSource& rng);

struct ModalityPair {
  std::vector<double> n;  // modality N, kImagePixels values in [0, 1]
  std::vector<double> v;  // modality V
};

// V: anti-aliased strokes on a white background, scaled by the brightness
// gain. N: the same geometry, inverted, gamma 0.6, a horizontal sinusoidal
// illumination band (amplitude 0.15, one period), Gaussian blur sigma 0.8,
// clamped to [0, 1]. Pixels are rounded to float precision.
ModalityPair render_pair(const IdentityParams& id, const NuisanceParams& nuisance);

// Generic photometric jitter of one image in place: optional inversion,
// random gamma, an oriented sinusoidal illumination wave and a random
// Gaussian blur, then clamping to [0, 1].
void photometric_jitter(std::span<double> image, std::size_t side, RandomSource& rng);

// Pairs grouped by identity in ascending id order. Images are stored as
// rows of two [count, pixels] matrices.
struct PairedDataset {
  std::string split;  // "train", "test" or "pool"
  std::size_t image_side = kImageSide;
  std::uint64_t seed = 0;
  bool generated = false;
  std::vector<std::uint32_t> identity;  // per pair
  Tensor n_images;
  Tensor v_images;
  // Glyph parameters of every identity (empty for generated pools).
  std::vector<IdentityParams> identity_params;
  // Free-form lineage tag recorded in the manifest.
  std::string config_hash;

  std::size_t size() const { return identity.size(); }
  std::size_t pixels() const { return image_side * image_side; }
  // Distinct identities in order of first appearance.
  std::vector<std::uint32_t> identities() const;
  // Pair indices of one identity.
  std::vector<std::size_t> indices_of(std::uint32_t id) const;
};

struct BuildConfig {
  std::size_t train_identities = 100;
  std::size_t test_identities = 30;
  std::size_t samples_per_identity = 20;
  std::uint64_t seed = 1234;
};

struct BuiltDataset {
  PairedDataset train;
  PairedDataset test;
};

// Train ids are [0, train_identities); test ids follow, so the splits are
// disjoint. Every identity and sample draws from streams derived from the
// seed, so the result does not depend on generation order.
BuiltDataset generate_dataset(const BuildConfig& config);

// Writes <dir>/train and <dir>/test, each a manifest.json + images.bin pair.
BuiltDataset build_dataset(const BuildConfig& config, const std::filesystem::path& dir,
                           const std::string& config_hash = "");

// Writes one manifest.json + images.bin pair into dir.
void save_split(const PairedDataset& data, const std::filesystem::path& dir);
PairedDataset load_dataset(const std::filesystem::path& dir);

// Blob encoding, exposed for tests: "DVGD", u32 version, u32 count, then
// per pair u32 id, N pixels as f32, V pixels as f32 (all little-endian).
std::vector<unsigned char> encode_blob(const PairedDataset& data);

}  // namespace dvg::synth
