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
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "dvg/dual_vae.hpp"
#include "dvg/hfr.hpp"
#include "dvg/synthdata.hpp"

namespace dvg::cli {

// Every tunable of one experiment. Loaded from JSON, where any key left out
// keeps its default and any key not listed here is rejected.
struct ExperimentConfig {
  std::uint64_t seed = 1234;
  std::string output_dir = "runs/default";
  std::size_t checkpoint_every = 500;

  synth::BuildConfig data{};  // data.seed is ignored; the master seed is used

  std::size_t latent_dim = 32;
  std::vector<std::size_t> encoder_hidden = {256, 128};
  std::vector<std::size_t> decoder_hidden = {128, 256};
  std::vector<std::size_t> disc_hidden = {256, 64};
  std::vector<std::size_t> recognizer_hidden = {256, 128};
  std::size_t feature_dim = 64;

  hfr::FipConfig fip{};
  double fip_dropout = 0.0;
  vae::DvgConfig dvg{};
  vae::LossWeights weights{};
  std::size_t pool_size = 10000;
  hfr::HfrConfig hfr{};
  double hfr_dropout = 0.0;  // matches fip_dropout when hfr_init is "fip"
  std::string hfr_init = "fip";  // "fip" or "scratch"
  std::size_t roc_points = 50;

  vae::GeneratorSpec generator_spec() const;
  hfr::RecognizerSpec recognizer_spec(double dropout) const;
  // Runs with alpha1 = 0 or an empty pool train on real pairs only.
  bool is_baseline() const { return hfr.alpha1 == 0.0 || pool_size == 0; }
};

nlohmann::ordered_json to_json(const ExperimentConfig& config);
ExperimentConfig from_json(const nlohmann::ordered_json& j);

// Parses a JSON document on top of the defaults. Throws ConfigError naming
// the first unknown key or ill-typed value.
ExperimentConfig parse_config(std::string_view text, std::string_view source = "config");
ExperimentConfig load_config(const std::string& path);

// Applies one "dotted.key=value" override. The value is read as JSON when it
// parses as JSON and as a bare string otherwise.
void apply_override(ExperimentConfig& config, std::string_view assignment);

std::string dump_config(const ExperimentConfig& config);

// Lineage hashes. Each covers the master seed and the sections a stage reads,
// chained through its upstream stage, so editing a late section leaves the
// earlier artifacts valid.
enum class Stage { kData, kFip, kDvg, kPool, kHfr, kEval };
std::uint64_t stage_hash(const ExperimentConfig& config, Stage stage);
const char* stage_name(Stage stage);

}  // namespace dvg::cli
