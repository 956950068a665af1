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

#include "dvg/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <map>
#include <numbers>

#include "dvg/binary_io.hpp"
#include "dvg/error.hpp"

namespace dvg::synth {

namespace {

constexpr int kSuper = 4;            // supersamples per pixel axis
constexpr double kBarWidth = 3.0;    // bar stroke width, px
constexpr double kInkDepth = 0.85;   // fraction of the background removed by ink
constexpr double kGamma = 0.6;
constexpr double kBandAmplitude = 0.15;
constexpr double kBlurSigma = 0.8;
constexpr int kBlurRadius = 3;

// Mean / spread / clamp range of each glyph parameter.
struct GlyphPrior {
  double mean, stddev, lo, hi;
};

constexpr std::array<GlyphPrior, 12> kPrior = {{
    {-4.0, 2.5, -9.0, 9.0}, {-3.0, 2.5, -9.0, 9.0}, {5.0, 1.5, 2.5, 8.0}, {3.5, 0.7, 2.5, 5.0},
    {4.0, 2.5, -9.0, 9.0},  {3.0, 2.5, -9.0, 9.0},  {4.0, 1.5, 2.0, 7.0}, {3.5, 0.7, 2.5, 5.0},
    {0.0, 3.0, -9.0, 9.0},  {0.0, 3.0, -9.0, 9.0},  {7.0, 2.0, 3.0, 11.0}, {0.0, 1.0, -3.14159, 3.14159},
}};

double round_f32(double x) { return static_cast<double>(static_cast<float>(x)); }

bool ring_hit(double x, double y, double cx, double cy, double r, double w) {
  const double d = std::hypot(x - cx, y - cy);
  return std::abs(d - r) <= 0.5 * w;
}

bool bar_hit(double x, double y, double cx, double cy, double half, double theta) {
  const double ux = std::cos(theta), uy = std::sin(theta);
  const double dx = x - cx, dy = y - cy;
  const double along = std::clamp(dx * ux + dy * uy, -half, half);
  return std::hypot(dx - along * ux, dy - along * uy) <= 0.5 * kBarWidth;
}

std::vector<double> coverage(const IdentityParams& id, const NuisanceParams& nz) {
  const auto& g = id.glyph;
  const double theta = nz.rotation_deg * std::numbers::pi / 180.0;
  const double c = std::cos(theta), s = std::sin(theta);
  const double half = static_cast<double>(kImageSide) / 2.0;
  std::vector<double> cov(kImagePixels, 0.0);
  for (std::size_t py = 0; py < kImageSide; ++py) {
    for (std::size_t px = 0; px < kImageSide; ++px) {
      int hits = 0;
      for (int sy = 0; sy < kSuper; ++sy) {
        for (int sx = 0; sx < kSuper; ++sx) {
          const double x = static_cast<double>(px) + (sx + 0.5) / kSuper - half - nz.shift_x;
          const double y = static_cast<double>(py) + (sy + 0.5) / kSuper - half - nz.shift_y;
          // Inverse of scale-then-rotate-then-shift.
          const double gx = (c * x + s * y) / nz.scale;
          const double gy = (-s * x + c * y) / nz.scale;
          if (ring_hit(gx, gy, g[0], g[1], g[2], g[3]) || ring_hit(gx, gy, g[4], g[5], g[6], g[7]) ||
              bar_hit(gx, gy, g[8], g[9], g[10], g[11])) {
            ++hits;
          }
        }
      }
      cov[py * kImageSide + px] = static_cast<double>(hits) / (kSuper * kSuper);
    }
  }
  return cov;
}

std::vector<double> gaussian_kernel(double sigma, int radius) {
  std::vector<double> k(2 * radius + 1);
  double total = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    total += k[i + radius];
  }
  for (double& v : k) v /= total;
  return k;
}

// Separable blur with edge replication.
std::vector<double> blur(const std::vector<double>& img, const std::vector<double>& k,
                         std::size_t side) {
  const int kBlurRadius = static_cast<int>(k.size() / 2);
  const int n = static_cast<int>(side);
  std::vector<double> tmp(img.size()), out(img.size());
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      double acc = 0.0;
      for (int i = -kBlurRadius; i <= kBlurRadius; ++i) {
        acc += k[i + kBlurRadius] * img[y * n + std::clamp(x + i, 0, n - 1)];
      }
      tmp[y * n + x] = acc;
    }
  }
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      double acc = 0.0;
      for (int i = -kBlurRadius; i <= kBlurRadius; ++i) {
        acc += k[i + kBlurRadius] * tmp[std::clamp(y + i, 0, n - 1) * n + x];
      }
      out[y * n + x] = acc;
    }
  }
  return out;
}

RandomSource sample_stream(const RandomSource& root, std::uint32_t id, std::size_t k) {
  return root.derive("sample/" + std::to_string(id) + "/" + std::to_string(k));
}

PairedDataset generate_split(const std::string& split, std::uint32_t first_id, std::size_t count,
                             std::size_t per_identity, const RandomSource& root,
                             std::uint64_t seed) {
  PairedDataset d;
  d.split = split;
  d.seed = seed;
  const std::size_t pairs = count * per_identity;
  d.n_images = Tensor(Shape{pairs, kImagePixels});
  d.v_images = Tensor(Shape{pairs, kImagePixels});
  std::size_t row = 0;
  for (std::size_t i = 0; i < count; ++i) {
    const auto id = static_cast<std::uint32_t>(first_id + i);
    const IdentityParams params = sample_identity(root, id);
    d.identity_params.push_back(params);
    for (std::size_t k = 0; k < per_identity; ++k) {
      RandomSource rng = sample_stream(root, id, k);
      const ModalityPair pair = render_pair(params, sample_nuisance(rng));
      std::copy(pair.n.begin(), pair.n.end(), d.n_images.row(row).begin());
      std::copy(pair.v.begin(), pair.v.end(), d.v_images.row(row).begin());
      d.identity.push_back(id);
      ++row;
    }
  }
  return d;
}

nlohmann::json manifest_json(const PairedDataset& d) {
  nlohmann::json m;
  m["kind"] = "dvg-paired-dataset";
  m["format_version"] = kFormatVersion;
  m["split"] = d.split;
  m["seed"] = d.seed;
  m["algorithm"] = std::string(RandomSource::kAlgorithm);
  m["image_size"] = d.image_side;
  m["pair_count"] = d.size();
  const auto ids = d.identities();
  m["identity_count"] = ids.size();
  m["identities"] = ids;
  m["generated"] = d.generated;
  m["config_hash"] = d.config_hash;
  nlohmann::json params = nlohmann::json::array();
  for (const auto& p : d.identity_params) {
    params.push_back({{"id", p.id}, {"glyph", p.glyph}});
  }
  m["identity_params"] = params;
  return m;
}

}  // namespace

IdentityParams sample_identity(const RandomSource& dataset_rng, std::uint32_t id) {
  RandomSource rng = dataset_rng.derive("identity/" + std::to_string(id));
  IdentityParams p;
  p.id = id;
  for (std::size_t i = 0; i < kPrior.size(); ++i) {
    const GlyphPrior& pr = kPrior[i];
    p.glyph[i] = std::clamp(rng.normal(pr.mean, pr.stddev), pr.lo, pr.hi);
  }
  return p;
}

NuisanceParams sample_nuisance(RandomSource& rng) {
  NuisanceParams n;
  n.rotation_deg = rng.uniform(-25.0, 25.0);
  n.shift_x = rng.uniform(-3.0, 3.0);
  n.shift_y = rng.uniform(-3.0, 3.0);
  n.scale = rng.uniform(0.85, 1.15);
  n.gain = rng.uniform(0.9, 1.1);
  return n;
}

ModalityPair render_pair(const IdentityParams& id, const NuisanceParams& nuisance) {
  const std::vector<double> cov = coverage(id, nuisance);
  ModalityPair out;
  out.v.resize(kImagePixels);
  std::vector<double> n(kImagePixels);
  for (std::size_t i = 0; i < kImagePixels; ++i) {
    out.v[i] = std::clamp(nuisance.gain * (1.0 - kInkDepth * cov[i]), 0.0, 1.0);
    const std::size_t row = i / kImageSide;
    const double band =
        kBandAmplitude * std::sin(2.0 * std::numbers::pi * (static_cast<double>(row) + 0.5) /
                                  static_cast<double>(kImageSide));
    n[i] = std::pow(1.0 - out.v[i], kGamma) + band;
  }
  static const std::vector<double> kernel = gaussian_kernel(kBlurSigma, kBlurRadius);
  out.n = blur(n, kernel, kImageSide);
  for (double& x : out.n) x = round_f32(std::clamp(x, 0.0, 1.0));
  for (double& x : out.v) x = round_f32(x);
  return out;
}

void photometric_jitter(std::span<double> image, std::size_t side, RandomSource& rng) {
  const bool invert = rng.uniform() < 0.5;
  const double gamma = std::exp(rng.uniform(std::log(0.5), std::log(2.0)));
  const double amp = rng.uniform(0.0, 0.2);
  const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double sigma = rng.uniform(0.0, 1.2);
  const double s = static_cast<double>(side);
  std::vector<double> img(image.begin(), image.end());
  for (std::size_t i = 0; i < img.size(); ++i) {
    double x = std::clamp(img[i], 0.0, 1.0);
    if (invert) x = 1.0 - x;
    x = std::pow(x, gamma);
    const double px = static_cast<double>(i % side) + 0.5, py = static_cast<double>(i / side) + 0.5;
    x += amp * std::sin(2.0 * std::numbers::pi * (std::cos(angle) * px + std::sin(angle) * py) / s + phase);
    img[i] = x;
  }
  if (sigma > 0.05) img = blur(img, gaussian_kernel(sigma, 3), side);
  for (std::size_t i = 0; i < img.size(); ++i) image[i] = std::clamp(img[i], 0.0, 1.0);
}

std::vector<std::uint32_t> PairedDataset::identities() const {
  std::vector<std::uint32_t> out;
  for (std::uint32_t id : identity) {
    if (std::find(out.begin(), out.end(), id) == out.end()) out.push_back(id);
  }
  return out;
}

std::vector<std::size_t> PairedDataset::indices_of(std::uint32_t id) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < identity.size(); ++i) {
    if (identity[i] == id) out.push_back(i);
  }
  return out;
}

BuiltDataset generate_dataset(const BuildConfig& config) {
  if (config.train_identities == 0 || config.test_identities == 0 ||
      config.samples_per_identity == 0) {
    throw ConfigError("dataset counts must be positive");
  }
  const RandomSource root(config.seed);
  BuiltDataset out;
  out.train = generate_split("train", 0, config.train_identities, config.samples_per_identity,
                             root, config.seed);
  out.test = generate_split("test", static_cast<std::uint32_t>(config.train_identities),
                            config.test_identities, config.samples_per_identity, root,
                            config.seed);
  return out;
}

BuiltDataset build_dataset(const BuildConfig& config, const std::filesystem::path& dir,
                           const std::string& config_hash) {
  BuiltDataset d = generate_dataset(config);
  d.train.config_hash = config_hash;
  d.test.config_hash = config_hash;
  save_split(d.train, dir / "train");
  save_split(d.test, dir / "test");
  return d;
}

std::vector<unsigned char> encode_blob(const PairedDataset& d) {
  io::Writer w;
  w.bytes(kMagic, 4);
  w.u32(kFormatVersion);
  w.u32(static_cast<std::uint32_t>(d.size()));
  const std::size_t px = d.pixels();
  for (std::size_t i = 0; i < d.size(); ++i) {
    w.u32(d.identity[i]);
    for (std::size_t j = 0; j < px; ++j) w.f32(static_cast<float>(d.n_images[i * px + j]));
    for (std::size_t j = 0; j < px; ++j) w.f32(static_cast<float>(d.v_images[i * px + j]));
  }
  return w.buffer();
}

void save_split(const PairedDataset& data, const std::filesystem::path& dir) {
  const auto blob = encode_blob(data);
  io::write_file(dir / "images.bin", blob.data(), blob.size());
  io::write_file(dir / "manifest.json", manifest_json(data).dump(2) + "\n");
}

PairedDataset load_dataset(const std::filesystem::path& dir) {
  const auto manifest_path = dir / "manifest.json";
  const auto blob_path = dir / "images.bin";
  if (!std::filesystem::exists(manifest_path) || !std::filesystem::exists(blob_path)) {
    throw MissingArtifactError("dataset not found in " + dir.string() +
                               " (need manifest.json and images.bin)");
  }
  nlohmann::json m;
  try {
    m = nlohmann::json::parse(io::read_text(manifest_path));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(manifest_path.string() + ": " + e.what());
  }
  PairedDataset d;
  try {
    if (m.at("format_version").get<std::uint32_t>() != kFormatVersion) {
      throw FormatError(manifest_path.string() + ": unsupported format_version " +
                        m.at("format_version").dump());
    }
    d.split = m.at("split").get<std::string>();
    d.seed = m.at("seed").get<std::uint64_t>();
    d.image_side = m.at("image_size").get<std::size_t>();
    d.generated = m.value("generated", false);
    d.config_hash = m.value("config_hash", std::string());
    for (const auto& p : m.value("identity_params", nlohmann::json::array())) {
      IdentityParams ip;
      ip.id = p.at("id").get<std::uint32_t>();
      ip.glyph = p.at("glyph").get<std::array<double, 12>>();
      d.identity_params.push_back(ip);
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(manifest_path.string() + ": " + e.what());
  }
  const auto bytes = io::read_file(blob_path);
  io::Reader r(bytes.data(), bytes.size(), blob_path.string());
  const std::string magic = r.str(4, "magic");
  if (magic != std::string(kMagic, 4)) {
    throw FormatError(blob_path.string() + ": bad magic, expected \"DVGD\"");
  }
  const std::uint32_t version = r.u32("version");
  if (version != kFormatVersion) {
    throw FormatError(blob_path.string() + ": version " + std::to_string(version) +
                      " does not match supported version " + std::to_string(kFormatVersion));
  }
  const std::uint32_t count = r.u32("pair count");
  if (count != m.at("pair_count").get<std::size_t>()) {
    throw FormatError(blob_path.string() + ": pair count " + std::to_string(count) +
                      " disagrees with manifest");
  }
  if (count == 0) throw FormatError(blob_path.string() + ": empty dataset");
  const std::size_t px = d.pixels();
  if (r.remaining() != count * (4 + 8 * px)) {
    throw FormatError(blob_path.string() + ": truncated or oversized blob (" +
                      std::to_string(r.remaining()) + " payload bytes, expected " +
                      std::to_string(count * (4 + 8 * px)) + ")");
  }
  d.n_images = Tensor(Shape{count, px});
  d.v_images = Tensor(Shape{count, px});
  d.identity.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    d.identity[i] = r.u32("identity id");
    for (std::size_t j = 0; j < px; ++j) d.n_images[i * px + j] = r.f32("pixel");
    for (std::size_t j = 0; j < px; ++j) d.v_images[i * px + j] = r.f32("pixel");
  }
  return d;
}

}  // namespace dvg::synth
