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

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dvg/config.hpp"
#include "dvg/feature.hpp"
#include "dvg/hfr.hpp"
#include "dvg/metrics.hpp"
#include "dvg/synthdata.hpp"

namespace dvg::cli {

// Artifact locations inside one run directory.
struct RunPaths {
  std::filesystem::path root;

  std::filesystem::path train() const { return root / "data" / "train"; }
  std::filesystem::path test() const { return root / "data" / "test"; }
  std::filesystem::path fip() const { return root / "fip.ckpt"; }
  std::filesystem::path dvg() const { return root / "dvg.ckpt"; }
  std::filesystem::path pool() const { return root / "pool"; }
  std::filesystem::path hfr() const { return root / "hfr.ckpt"; }
  std::filesystem::path metrics() const { return root / "metrics.json"; }
  std::filesystem::path roc() const { return root / "roc.csv"; }
  std::filesystem::path features() const { return root / "features"; }
  std::filesystem::path log(Stage stage) const {
    return root / "logs" / (std::string(stage_name(stage)) + ".json");
  }
};

struct StageOptions {
  bool force = false;   // accept artifacts whose lineage hash differs
  bool resume = false;  // continue an interrupted training stage from its checkpoint
  // Training stages save a resumable checkpoint and return once they reach
  // this step.
  std::optional<std::size_t> stop_after;
  std::ostream* progress = nullptr;
};

void synth_data(const ExperimentConfig& config, const StageOptions& options = {});
void pretrain_fip(const ExperimentConfig& config, const StageOptions& options = {});
void train_dvg(const ExperimentConfig& config, const StageOptions& options = {});
void generate(const ExperimentConfig& config, const StageOptions& options = {});
void train_hfr(const ExperimentConfig& config, const StageOptions& options = {});
void evaluate(const ExperimentConfig& config, const StageOptions& options = {});
// Every stage in order; baselines skip the generator stages.
void run_pipeline(const ExperimentConfig& config, const StageOptions& options = {});

// Markdown comparison of the metrics found in the given run directories.
// Throws MissingArtifactError when none has completed evaluation.
std::string report(const std::vector<std::filesystem::path>& run_dirs);

struct Evaluation {
  std::string label;
  std::size_t pool_size = 0;
  std::optional<double> md;   // generated pairs
  double md_real = 0;         // same-identity test pairs
  double md_mismatched = 0;   // cross-identity test pairs
  std::optional<double> fid_n, fid_v, fid_mean;
  double rank1 = 0;
  std::optional<double> vr_far_1pct;   // unset when the test split has too few impostors
  std::optional<double> vr_far_01pct;
  std::vector<metrics::RocPoint> roc;
  Tensor gallery_features;  // recognizer features, evaluation mode
  Tensor probe_features;
};

// Identification and verification on the test split: the gallery holds the
// first modality-V image of each identity and the modality-N images of the
// remaining samples are probes, so no probe shares a capture with the gallery. MD and FID use the frozen extractor; FID compares the pool with the
// training split per modality.
Evaluation evaluate_recognizer(const hfr::Recognizer& recognizer, const FeatureExtractor& fip,
                               const synth::PairedDataset& train, const synth::PairedDataset& test,
                               const synth::PairedDataset* pool, std::size_t roc_points,
                               RandomSource rng);
nlohmann::ordered_json metrics_json(const Evaluation& e, std::uint64_t config_hash);

// Writes <base>.f32 (row-major little-endian float32) and <base>.json
// (count, dim, source).
void write_feature_dump(const std::filesystem::path& base, const Tensor& features, const std::string& source);

// Mean ||f_N(i) - f_V(k)|| where k is a random row of a different identity.
double mismatched_pair_distance(const Tensor& features_n, const Tensor& features_v,
                                const std::vector<std::uint32_t>& identity, RandomSource& rng);

}  // namespace dvg::cli
