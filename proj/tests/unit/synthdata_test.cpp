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

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <set>

#include "dvg/binary_io.hpp"
#include "dvg/error.hpp"
#include "dvg/synthdata.hpp"

namespace dvg::synth {
namespace {

namespace fs = std::filesystem;

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("dvg_synth_" + name);
  fs::remove_all(p);
  return p;
}

BuildConfig small_config(std::uint64_t seed = 77) { return {6, 3, 4, seed}; }

TEST(Synth, RenderIsDeterministic) {
  const RandomSource root(5);
  const IdentityParams id = sample_identity(root, 3);
  RandomSource r1(9), r2(9);
  const NuisanceParams n1 = sample_nuisance(r1), n2 = sample_nuisance(r2);
  const ModalityPair a = render_pair(id, n1), b = render_pair(id, n2);
  EXPECT_EQ(a.n, b.n);
  EXPECT_EQ(a.v, b.v);
}

TEST(Synth, IdentityParamsArePureFunctionOfSeedAndId) {
  const RandomSource root(5);
  EXPECT_EQ(sample_identity(root, 12).glyph, sample_identity(RandomSource(5), 12).glyph);
  std::set<std::array<double, 12>> seen;
  for (std::uint32_t id = 0; id < 200; ++id) seen.insert(sample_identity(root, id).glyph);
  EXPECT_EQ(seen.size(), 200u);
}

TEST(Synth, RotationChangesImage) {
  const IdentityParams id = sample_identity(RandomSource(1), 0);
  NuisanceParams flat, turned;
  turned.rotation_deg = 25.0;
  const ModalityPair a = render_pair(id, flat), b = render_pair(id, turned);
  double l2 = 0;
  for (std::size_t i = 0; i < kImagePixels; ++i) l2 += (a.v[i] - b.v[i]) * (a.v[i] - b.v[i]);
  EXPECT_GT(std::sqrt(l2), 0.0);
}

TEST(Synth, NuisanceWithinDeclaredRanges) {
  RandomSource rng(2);
  for (int i = 0; i < 5000; ++i) {
    const NuisanceParams n = sample_nuisance(rng);
    EXPECT_GE(n.rotation_deg, -25.0);
    EXPECT_LE(n.rotation_deg, 25.0);
    EXPECT_GE(n.shift_x, -3.0);
    EXPECT_LE(n.shift_x, 3.0);
    EXPECT_GE(n.shift_y, -3.0);
    EXPECT_LE(n.shift_y, 3.0);
    EXPECT_GE(n.scale, 0.85);
    EXPECT_LE(n.scale, 1.15);
    EXPECT_GE(n.gain, 0.9);
    EXPECT_LE(n.gain, 1.1);
  }
}

TEST(Synth, ModalityGapIsMaterial) {
  const RandomSource root(3);
  RandomSource rng(4);
  double total = 0;
  for (std::uint32_t k = 0; k < 100; ++k) {
    const ModalityPair p = render_pair(sample_identity(root, k), sample_nuisance(rng));
    double d = 0;
    for (std::size_t i = 0; i < kImagePixels; ++i) {
      EXPECT_GE(p.n[i], 0.0);
      EXPECT_LE(p.n[i], 1.0);
      EXPECT_GE(p.v[i], 0.0);
      EXPECT_LE(p.v[i], 1.0);
      d += std::abs(p.n[i] - p.v[i]);
    }
    total += d / kImagePixels;
  }
  EXPECT_GT(total / 100, 0.2);
}

// Recomputes modality N from modality V: invert, gamma 0.6, row band, then a
// direct 7x7 Gaussian convolution with edge replication, then clamp.
TEST(Synth, ModalityNFollowsTransformOrder) {
  const IdentityParams id = sample_identity(RandomSource(8), 4);
  RandomSource rng(6);
  const ModalityPair p = render_pair(id, sample_nuisance(rng));
  const int side = static_cast<int>(kImageSide);
  std::vector<double> pre(kImagePixels);
  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) {
      const double band = 0.15 * std::sin(2.0 * std::numbers::pi * (y + 0.5) / side);
      pre[y * side + x] = std::pow(1.0 - p.v[y * side + x], 0.6) + band;
    }
  }
  double norm = 0;
  for (int dy = -3; dy <= 3; ++dy) {
    for (int dx = -3; dx <= 3; ++dx) norm += std::exp(-(dx * dx + dy * dy) / (2 * 0.64));
  }
  double worst = 0;
  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) {
      double acc = 0;
      for (int dy = -3; dy <= 3; ++dy) {
        for (int dx = -3; dx <= 3; ++dx) {
          const int yy = std::clamp(y + dy, 0, side - 1), xx = std::clamp(x + dx, 0, side - 1);
          acc += std::exp(-(dx * dx + dy * dy) / (2 * 0.64)) * pre[yy * side + xx];
        }
      }
      worst = std::max(worst, std::abs(std::clamp(acc / norm, 0.0, 1.0) - p.n[y * side + x]));
    }
  }
  EXPECT_LT(worst, 1e-5);
}

TEST(Synth, DefaultCounts) {
  const BuildConfig c;
  EXPECT_EQ(c.train_identities, 100u);
  EXPECT_EQ(c.test_identities, 30u);
  EXPECT_EQ(c.samples_per_identity, 20u);
  const BuiltDataset d = generate_dataset({100, 30, 20, 1});
  EXPECT_EQ(d.train.size(), 2000u);
  EXPECT_EQ(d.test.size(), 600u);
}

TEST(Synth, SplitsDisjointAndPairsMapToOneIdentity) {
  const BuiltDataset d = generate_dataset(small_config());
  const auto tr = d.train.identities(), te = d.test.identities();
  for (std::uint32_t id : te) EXPECT_EQ(std::count(tr.begin(), tr.end(), id), 0);
  for (std::uint32_t id : tr) EXPECT_EQ(d.train.indices_of(id).size(), 4u);
  EXPECT_EQ(d.train.identity.size(), d.train.n_images.rows());
  EXPECT_EQ(d.train.identity.size(), d.train.v_images.rows());
}

TEST(Synth, ZeroCountsRejected) {
  EXPECT_THROW(generate_dataset({0, 3, 4, 1}), ConfigError);
  EXPECT_THROW(generate_dataset({3, 3, 0, 1}), ConfigError);
}

TEST(Synth, SameSeedSameBytesDifferentSeedDifferentParams) {
  const fs::path a = scratch_dir("a"), b = scratch_dir("b"), c = scratch_dir("c");
  build_dataset(small_config(), a);
  build_dataset(small_config(), b);
  build_dataset(small_config(78), c);
  for (const char* split : {"train", "test"}) {
    for (const char* file : {"images.bin", "manifest.json"}) {
      EXPECT_EQ(io::read_file(a / split / file), io::read_file(b / split / file)) << split << "/" << file;
    }
  }
  EXPECT_NE(io::read_text(a / "train" / "manifest.json"), io::read_text(c / "train" / "manifest.json"));
  EXPECT_NE(load_dataset(a / "train").identity_params[0].glyph, load_dataset(c / "train").identity_params[0].glyph);
}

TEST(Synth, BuildThenLoadRoundTrips) {
  const fs::path dir = scratch_dir("rt");
  const BuiltDataset built = build_dataset(small_config(), dir, "abc123");
  const PairedDataset back = load_dataset(dir / "train");
  EXPECT_EQ(back.identity, built.train.identity);
  EXPECT_EQ(back.n_images, built.train.n_images);
  EXPECT_EQ(back.v_images, built.train.v_images);
  EXPECT_EQ(back.config_hash, "abc123");
  EXPECT_EQ(back.split, "train");
  EXPECT_FALSE(back.generated);
}

TEST(Synth, BlobLayout) {
  const BuiltDataset d = generate_dataset(small_config());
  const auto blob = encode_blob(d.test);
  ASSERT_EQ(blob.size(), 12 + d.test.size() * (4 + 2 * 4 * kImagePixels));
  EXPECT_EQ(std::string(blob.begin(), blob.begin() + 4), "DVGD");
  io::Reader r(blob.data(), blob.size(), "blob");
  r.raw(4, "magic");
  EXPECT_EQ(r.u32("version"), 1u);
  EXPECT_EQ(r.u32("count"), d.test.size());
  EXPECT_EQ(r.u32("id"), d.test.identity[0]);
  EXPECT_EQ(r.f32("n0"), static_cast<float>(d.test.n_images.at(0, 0)));
  r.raw(4 * (kImagePixels - 1), "n");
  EXPECT_EQ(r.f32("v0"), static_cast<float>(d.test.v_images.at(0, 0)));
}

TEST(Synth, TruncatedBlobRejected) {
  const fs::path dir = scratch_dir("trunc");
  build_dataset(small_config(), dir);
  auto bytes = io::read_file(dir / "test" / "images.bin");
  bytes.resize(bytes.size() - 100);
  io::write_file(dir / "test" / "images.bin", bytes.data(), bytes.size());
  EXPECT_THROW(load_dataset(dir / "test"), FormatError);
}

TEST(Synth, WrongMagicNamesExpectedMagic) {
  const fs::path dir = scratch_dir("magic");
  build_dataset(small_config(), dir);
  auto bytes = io::read_file(dir / "test" / "images.bin");
  bytes[0] = 'X';
  io::write_file(dir / "test" / "images.bin", bytes.data(), bytes.size());
  try {
    load_dataset(dir / "test");
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("DVGD"), std::string::npos);
  }
}

TEST(Synth, VersionMismatchRejected) {
  const fs::path dir = scratch_dir("version");
  build_dataset(small_config(), dir);
  auto bytes = io::read_file(dir / "test" / "images.bin");
  bytes[4] = 2;
  io::write_file(dir / "test" / "images.bin", bytes.data(), bytes.size());
  EXPECT_THROW(load_dataset(dir / "test"), FormatError);
}

TEST(Synth, MissingFilesReported) {
  EXPECT_THROW(load_dataset(scratch_dir("absent")), MissingArtifactError);
}

TEST(Synth, PhotometricJitterStaysInRange) {
  RandomSource rng(12);
  const ModalityPair p = render_pair(sample_identity(RandomSource(1), 1), NuisanceParams{});
  for (int k = 0; k < 50; ++k) {
    std::vector<double> img = p.v;
    photometric_jitter(img, kImageSide, rng);
    for (double x : img) {
      ASSERT_GE(x, 0.0);
      ASSERT_LE(x, 1.0);
    }
  }
}

}  // namespace
}  // namespace dvg::synth
