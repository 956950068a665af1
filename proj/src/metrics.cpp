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

#include "dvg/metrics.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <set>

#include "dvg/error.hpp"

namespace dvg::metrics {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;

void require_matrix(const Tensor& t, const char* what) {
  if (t.rank() != 2) throw ShapeError(std::string(what) + " must be rank 2, got " + shape_string(t.shape()));
}

RowMat unit_rows(const Tensor& t, const char* what) {
  require_matrix(t, what);
  RowMat m = ConstMap(t.storage().data(), t.rows(), t.cols());
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    const double n = m.row(r).norm();
    if (!(n > 0.0) || !std::isfinite(n)) {
      throw NumericError(std::string(what) + " row " + std::to_string(r) + " has no direction");
    }
    m.row(r) /= n;
  }
  return m;
}

void require_ids(const Tensor& t, std::span<const std::uint32_t> ids, const char* what) {
  if (ids.size() != t.rows()) {
    throw ShapeError(std::string(what) + ": " + std::to_string(t.rows()) + " rows but " +
                     std::to_string(ids.size()) + " identities");
  }
}

RowMat cosine_scores(const Tensor& gallery, const Tensor& probe) {
  const RowMat g = unit_rows(gallery, "gallery");
  const RowMat p = unit_rows(probe, "probe");
  if (g.cols() != p.cols()) {
    throw ShapeError("gallery dim " + std::to_string(g.cols()) + " vs probe dim " +
                     std::to_string(p.cols()));
  }
  return p * g.transpose();
}

// Symmetric PSD square root with negative eigenvalues clamped to zero.
Eigen::MatrixXd sqrtm_psd(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  if (es.info() != Eigen::Success) throw NumericError("eigendecomposition failed");
  const Eigen::VectorXd root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

double mean_pair_distance(const Tensor& features_n, const Tensor& features_v) {
  require_matrix(features_n, "features_n");
  require_matrix(features_v, "features_v");
  if (features_n.shape() != features_v.shape()) {
    throw ShapeError("paired features differ: " + shape_string(features_n.shape()) + " vs " +
                     shape_string(features_v.shape()));
  }
  if (features_n.rows() == 0) throw ConfigError("mean_pair_distance of an empty set");
  double total = 0.0;
  for (std::size_t r = 0; r < features_n.rows(); ++r) {
    const auto a = features_n.row(r);
    const auto b = features_v.row(r);
    double s = 0.0;
    for (std::size_t c = 0; c < a.size(); ++c) s += (a[c] - b[c]) * (a[c] - b[c]);
    total += std::sqrt(s);
  }
  return total / static_cast<double>(features_n.rows());
}

double mean_pair_distance(const Tensor& images_n, const Tensor& images_v,
                          const FeatureExtractor& extractor) {
  if (images_n.empty() || images_v.empty()) throw ConfigError("mean_pair_distance of an empty set");
  return mean_pair_distance(extractor.embed(images_n), extractor.embed(images_v));
}

FeatureSetStats feature_stats(const Tensor& features, double jitter) {
  require_matrix(features, "features");
  const std::size_t n = features.rows();
  const std::size_t d = features.cols();
  if (n < 2) throw ConfigError("feature_stats needs at least 2 samples, got " + std::to_string(n));
  const RowMat x = ConstMap(features.storage().data(), n, d);
  const Eigen::RowVectorXd mu = x.colwise().mean();
  const RowMat centered = x.rowwise() - mu;
  RowMat cov = (centered.transpose() * centered) / static_cast<double>(n - 1);
  cov.diagonal().array() += jitter;
  FeatureSetStats s;
  s.dim = d;
  s.count = n;
  s.mean.assign(mu.data(), mu.data() + d);
  s.covariance.assign(cov.data(), cov.data() + d * d);
  return s;
}

FeatureSetStats gaussian_stats(std::vector<double> mean, std::vector<double> covariance,
                               std::size_t count) {
  const std::size_t d = mean.size();
  if (d == 0 || covariance.size() != d * d) {
    throw ShapeError("gaussian_stats: mean of " + std::to_string(d) + " with " +
                     std::to_string(covariance.size()) + " covariance entries");
  }
  return {std::move(mean), std::move(covariance), d, count};
}

double frechet_distance(const FeatureSetStats& a, const FeatureSetStats& b) {
  if (a.dim != b.dim) {
    throw ShapeError("frechet_distance: dim " + std::to_string(a.dim) + " vs " + std::to_string(b.dim));
  }
  if (a.count < 2 || b.count < 2) throw ConfigError("frechet_distance needs at least 2 samples per set");
  const auto d = static_cast<Eigen::Index>(a.dim);
  const Eigen::Map<const Eigen::VectorXd> mu_a(a.mean.data(), d);
  const Eigen::Map<const Eigen::VectorXd> mu_b(b.mean.data(), d);
  const Eigen::MatrixXd sa = Eigen::Map<const RowMat>(a.covariance.data(), d, d);
  const Eigen::MatrixXd sb = Eigen::Map<const RowMat>(b.covariance.data(), d, d);
  const Eigen::MatrixXd root_a = sqrtm_psd(0.5 * (sa + sa.transpose()));
  Eigen::MatrixXd inner = root_a * sb * root_a;
  inner = 0.5 * (inner + inner.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(inner, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw NumericError("eigendecomposition failed");
  const double tr_root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
  const double fid = (mu_a - mu_b).squaredNorm() + sa.trace() + sb.trace() - 2.0 * tr_root;
  if (!std::isfinite(fid)) throw NumericError("frechet_distance is not finite");
  return std::max(fid, 0.0);
}

double rank1(const Tensor& gallery, std::span<const std::uint32_t> gallery_ids,
             const Tensor& probe, std::span<const std::uint32_t> probe_ids) {
  const RowMat scores = cosine_scores(gallery, probe);
  require_ids(gallery, gallery_ids, "gallery");
  require_ids(probe, probe_ids, "probe");
  if (probe_ids.empty()) throw ConfigError("rank1 with no probes");
  const std::set<std::uint32_t> known(gallery_ids.begin(), gallery_ids.end());
  std::size_t hits = 0;
  for (Eigen::Index p = 0; p < scores.rows(); ++p) {
    if (!known.count(probe_ids[p])) {
      throw ConfigError("probe identity " + std::to_string(probe_ids[p]) + " is absent from the gallery");
    }
    Eigen::Index best = 0;
    for (Eigen::Index g = 1; g < scores.cols(); ++g) {
      if (scores(p, g) > scores(p, best)) best = g;
    }
    if (gallery_ids[best] == probe_ids[p]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(probe_ids.size());
}

ScoreSet score_pairs(const Tensor& gallery, std::span<const std::uint32_t> gallery_ids,
                     const Tensor& probe, std::span<const std::uint32_t> probe_ids) {
  const RowMat scores = cosine_scores(gallery, probe);
  require_ids(gallery, gallery_ids, "gallery");
  require_ids(probe, probe_ids, "probe");
  ScoreSet out;
  for (Eigen::Index p = 0; p < scores.rows(); ++p) {
    for (Eigen::Index g = 0; g < scores.cols(); ++g) {
      const double s = std::clamp(scores(p, g), -1.0, 1.0);
      (gallery_ids[g] == probe_ids[p] ? out.genuine : out.impostor).push_back(s);
    }
  }
  return out;
}

double threshold_at_far(const ScoreSet& scores, double far) {
  if (scores.genuine.empty() || scores.impostor.empty()) {
    throw ConfigError("verification needs genuine and impostor scores");
  }
  if (!(far > 0.0 && far <= 1.0)) throw ConfigError("far must lie in (0, 1], got " + std::to_string(far));
  const std::size_t n = scores.impostor.size();
  if (static_cast<double>(n) * far < 1.0 - 1e-9) {
    throw ConfigError("far " + std::to_string(far) + " needs at least " +
                      std::to_string(static_cast<std::size_t>(std::ceil(1.0 / far - 1e-9))) +
                      " impostor scores, have " + std::to_string(n));
  }
  const auto k = static_cast<std::size_t>(std::floor(far * static_cast<double>(n) + 1e-9));
  if (k >= n) return -std::numeric_limits<double>::infinity();
  std::vector<double> sorted = scores.impostor;
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  // Impostor k (0-based) must be rejected; accept down to the lowest score above it.
  const double reject = sorted[k];
  std::size_t j = k;
  while (j > 0 && sorted[j - 1] == reject) --j;
  if (j == 0) return std::nextafter(reject, std::numeric_limits<double>::infinity());
  return sorted[j - 1];
}

double vr_at_far(const ScoreSet& scores, double far) {
  const double t = threshold_at_far(scores, far);
  const auto accepted = std::count_if(scores.genuine.begin(), scores.genuine.end(),
                                      [t](double s) { return s >= t; });
  return static_cast<double>(accepted) / static_cast<double>(scores.genuine.size());
}

std::vector<RocPoint> roc_curve(const ScoreSet& scores, std::size_t points) {
  if (scores.genuine.empty() || scores.impostor.empty()) throw ConfigError("roc_curve of an empty score set");
  if (points < 2) throw ConfigError("roc_curve needs at least 2 points");
  const double lo = std::log(1.0 / static_cast<double>(scores.impostor.size()));
  std::vector<RocPoint> curve;
  curve.reserve(points);
  for (std::size_t i = 0; i < points; ++i) {
    double far = i + 1 == points ? 1.0
                                 : std::exp(lo * (1.0 - static_cast<double>(i) / static_cast<double>(points - 1)));
    far = std::clamp(far, 1.0 / static_cast<double>(scores.impostor.size()), 1.0);
    curve.push_back({far, vr_at_far(scores, far)});
  }
  return curve;
}

std::string roc_csv(const std::vector<RocPoint>& curve) {
  std::string out = "far,vr\n";
  char line[64];
  for (const RocPoint& p : curve) {
    std::snprintf(line, sizeof line, "%.9g,%.9g\n", p.far, p.vr);
    out += line;
  }
  return out;
}

}  // namespace dvg::metrics
