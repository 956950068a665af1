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
#include <span>
#include <string>
#include <vector>

#include "dvg/feature.hpp"
#include "dvg/tensor.hpp"

namespace dvg::metrics {

// Mean L2 distance between the features of paired rows, ||f_N - f_V||.
double mean_pair_distance(const Tensor& features_n, const Tensor& features_v);
double mean_pair_distance(const Tensor& images_n, const Tensor& images_v,
                          const FeatureExtractor& extractor);

inline constexpr double kCovarianceJitter = 1e-6;

struct FeatureSetStats {
  std::vector<double> mean;
  std::vector<double> covariance;  // dim x dim, row-major, jitter included
  std::size_t dim = 0;
  std::size_t count = 0;
};

// Sample mean and unbiased covariance of the rows of a [count, dim] tensor.
FeatureSetStats feature_stats(const Tensor& features, double jitter = kCovarianceJitter);
FeatureSetStats gaussian_stats(std::vector<double> mean, std::vector<double> covariance,
                               std::size_t count = 2);

// ||mu_a - mu_b||^2 + Tr(S_a + S_b - 2 (S_a^1/2 S_b S_a^1/2)^1/2).
double frechet_distance(const FeatureSetStats& a, const FeatureSetStats& b);

// Cosine-scored closed-set identification. Ties go to the lowest gallery row.
double rank1(const Tensor& gallery, std::span<const std::uint32_t> gallery_ids,
             const Tensor& probe, std::span<const std::uint32_t> probe_ids);

struct ScoreSet {
  std::vector<double> genuine;
  std::vector<double> impostor;
};

// Every probe/gallery cosine score, split by identity agreement.
ScoreSet score_pairs(const Tensor& gallery, std::span<const std::uint32_t> gallery_ids,
                     const Tensor& probe, std::span<const std::uint32_t> probe_ids);

// Acceptance threshold for a target false accept rate: with impostors sorted
// descending, the k = floor(far * n) highest scores may pass, so t sits just
// above impostor k (or at -inf when far = 1).
double threshold_at_far(const ScoreSet& scores, double far);
double vr_at_far(const ScoreSet& scores, double far);

struct RocPoint {
  double far;
  double vr;
};

// `points` log-spaced FAR values from 1/impostors up to 1, inclusive.
std::vector<RocPoint> roc_curve(const ScoreSet& scores, std::size_t points);
std::string roc_csv(const std::vector<RocPoint>& curve);

}  // namespace dvg::metrics
