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

#include <algorithm>
#include <cmath>
#include <limits>

#include "dvg/error.hpp"
#include "dvg/metrics.hpp"
#include "dvg/random.hpp"

namespace dvg::metrics {
namespace {

Tensor unit_rows(std::size_t rows, std::size_t dim, RandomSource& rng) {
  Tensor t = rng.normal_tensor(Shape{rows, dim});
  for (std::size_t i = 0; i < rows; ++i) {
    double s = 0;
    for (double x : t.row(i)) s += x * x;
    for (double& x : t.row(i)) x /= std::sqrt(s);
  }
  return t;
}

// Smallest impostor value u with #{impostor >= u} <= far * n, else just
// above the maximum; VR is the genuine fraction at or above it.
double vr_oracle(const ScoreSet& s, double far) {
  const double allowed = std::floor(far * static_cast<double>(s.impostor.size()));
  double t = std::nextafter(*std::max_element(s.impostor.begin(), s.impostor.end()), INFINITY);
  for (double u : s.impostor) {
    const auto above = std::count_if(s.impostor.begin(), s.impostor.end(), [&](double x) { return x >= u; });
    if (static_cast<double>(above) <= allowed && u < t) t = u;
  }
  if (allowed >= static_cast<double>(s.impostor.size())) t = -INFINITY;
  const auto hit = std::count_if(s.genuine.begin(), s.genuine.end(), [&](double x) { return x >= t; });
  return static_cast<double>(hit) / static_cast<double>(s.genuine.size());
}

ScoreSet random_scores(std::size_t genuine, std::size_t impostor, RandomSource& rng, int levels = 0) {
  ScoreSet s;
  auto draw = [&](double shift) {
    double x = std::clamp(0.3 * rng.normal() + shift, -1.0, 1.0);
    if (levels > 0) x = std::round(x * levels) / levels;
    return x;
  };
  for (std::size_t i = 0; i < genuine; ++i) s.genuine.push_back(draw(0.4));
  for (std::size_t i = 0; i < impostor; ++i) s.impostor.push_back(draw(0.0));
  return s;
}

TEST(Md, Examples) {
  const Tensor a = Tensor::matrix({{1, 0}, {0, 1}});
  EXPECT_EQ(mean_pair_distance(a, a), 0.0);
  const Tensor b = Tensor::matrix({{1, 0.2}, {0, 1.4}});
  EXPECT_NEAR(mean_pair_distance(a, b), 0.3, 1e-15);
  EXPECT_THROW(mean_pair_distance(Tensor(), Tensor()), Error);
  EXPECT_THROW(mean_pair_distance(a, Tensor::matrix({{1, 0}})), ShapeError);
}

TEST(Md, UnitFeaturesBounded) {
  RandomSource rng(1);
  for (int k = 0; k < 100; ++k) {
    const double md = mean_pair_distance(unit_rows(5, 6, rng), unit_rows(5, 6, rng));
    ASSERT_GE(md, 0.0);
    ASSERT_LE(md, 2.0);
  }
  const Tensor a = unit_rows(3, 4, rng);
  Tensor neg = a;
  for (double& x : neg.storage()) x = -x;
  EXPECT_NEAR(mean_pair_distance(a, neg), 2.0, 1e-12);
}

TEST(Fid, OneDimensionalClosedForms) {
  EXPECT_NEAR(frechet_distance(gaussian_stats({0}, {1}), gaussian_stats({1}, {1})), 1.0, 1e-9);
  EXPECT_NEAR(frechet_distance(gaussian_stats({0.5}, {1}), gaussian_stats({0.5}, {4})), 1.0, 1e-9);
  EXPECT_NEAR(frechet_distance(gaussian_stats({2}, {9}), gaussian_stats({-1}, {0.25})),
              9.0 + (3.0 - 0.5) * (3.0 - 0.5), 1e-9);
}

TEST(Fid, DiagonalClosedForm) {
  const auto a = gaussian_stats({0, 1, 2}, {1, 0, 0, 0, 4, 0, 0, 0, 9});
  const auto b = gaussian_stats({1, 1, 0}, {4, 0, 0, 0, 1, 0, 0, 0, 1});
  EXPECT_NEAR(frechet_distance(a, b), 5.0 + 1.0 + 1.0 + 4.0, 1e-9);
}

TEST(Fid, IdenticalSetsAndSymmetry) {
  RandomSource rng(2);
  const Tensor x = rng.normal_tensor(Shape{200, 8});
  const Tensor y = rng.normal_tensor(Shape{150, 8});
  EXPECT_LE(frechet_distance(feature_stats(x), feature_stats(x)), 1e-6);
  const double ab = frechet_distance(feature_stats(x), feature_stats(y));
  EXPECT_NEAR(ab, frechet_distance(feature_stats(y), feature_stats(x)), 1e-8);
  EXPECT_GE(ab, 0.0);
}

TEST(Fid, RankDeficientSetsStayFinite) {
  Tensor x(Shape{10, 4});
  for (std::size_t i = 0; i < 10; ++i) x.at(i, 0) = static_cast<double>(i);
  const double d = frechet_distance(feature_stats(x), feature_stats(x));
  EXPECT_TRUE(std::isfinite(d));
  EXPECT_LE(d, 1e-6);
}

TEST(Fid, MonteCarloBounds) {
  RandomSource rng(3);
  const Tensor a = rng.normal_tensor(Shape{500, 8}), b = rng.normal_tensor(Shape{500, 8});
  EXPECT_LE(frechet_distance(feature_stats(a), feature_stats(b)), 0.5);
  Tensor c = rng.normal_tensor(Shape{500, 8});
  for (double& v : c.storage()) v += 2.0;
  EXPECT_GE(frechet_distance(feature_stats(a), feature_stats(c)), 8 * 4 * 0.8);
}

TEST(Fid, StatsAndErrors) {
  const auto s = feature_stats(Tensor::matrix({{1, 2}, {3, 6}}), 0.0);
  EXPECT_EQ(s.mean, (std::vector<double>{2, 4}));
  EXPECT_EQ(s.covariance, (std::vector<double>{2, 4, 4, 8}));
  EXPECT_EQ(feature_stats(Tensor::matrix({{1, 2}, {3, 6}})).covariance[0], 2 + kCovarianceJitter);
  EXPECT_THROW(feature_stats(Tensor::matrix({{1, 2}})), ConfigError);
  EXPECT_THROW(frechet_distance(gaussian_stats({0}, {1}), gaussian_stats({0, 0}, {1, 0, 0, 1})),
               ShapeError);
}

TEST(Rank1, Examples) {
  RandomSource rng(4);
  const Tensor g = unit_rows(6, 5, rng);
  const std::vector<std::uint32_t> ids = {0, 1, 2, 3, 4, 5};
  EXPECT_EQ(rank1(g, ids, g, ids), 1.0);

  const Tensor gallery = Tensor::matrix({{1, 0}, {0, 1}});
  const std::vector<std::uint32_t> gid = {0, 1};
  const Tensor probe = Tensor::matrix({{0, 1}, {1, 0}});
  EXPECT_EQ(rank1(gallery, gid, probe, gid), 0.0);
  const std::vector<std::uint32_t> missing = {0, 7};
  EXPECT_THROW(rank1(gallery, gid, probe, missing), ConfigError);
}

TEST(Rank1, TiesGoToLowestGalleryRow) {
  const Tensor gallery = Tensor::matrix({{1, 0}, {1, 0}});
  const Tensor probe = Tensor::matrix({{2, 0}});
  const std::vector<std::uint32_t> first = {3, 4}, second = {4, 3}, pid = {3};
  EXPECT_EQ(rank1(gallery, first, probe, pid), 1.0);
  EXPECT_EQ(rank1(gallery, second, probe, pid), 0.0);
}

TEST(Rank1, InvariantUnderPositiveScaling) {
  RandomSource rng(5);
  for (int trial = 0; trial < 5; ++trial) {
    const Tensor g = rng.normal_tensor(Shape{100, 16});
    Tensor p = rng.normal_tensor(Shape{100, 16});
    std::vector<std::uint32_t> gid(100), pid(100);
    for (std::uint32_t i = 0; i < 100; ++i) {
      gid[i] = i;
      pid[i] = static_cast<std::uint32_t>(rng.below(100));
      for (std::size_t j = 0; j < 16; ++j) p.at(i, j) += 1.5 * g.at(pid[i], j);
    }
    const double base = rank1(g, gid, p, pid);
    Tensor gs = g, ps = p;
    for (std::size_t i = 0; i < 100; ++i) {
      const double a = std::exp(rng.uniform(-3, 3)), b = std::exp(rng.uniform(-3, 3));
      for (double& x : gs.row(i)) x *= a;
      for (double& x : ps.row(i)) x *= b;
    }
    EXPECT_EQ(rank1(gs, gid, ps, pid), base);
  }
}

TEST(Scores, SplitAndRange) {
  const Tensor gallery = Tensor::matrix({{1, 0}, {0, 2}});
  const Tensor probe = Tensor::matrix({{3, 0}, {1, 1}, {0, -1}});
  const std::vector<std::uint32_t> gid = {0, 1}, pid = {0, 1, 1};
  const ScoreSet s = score_pairs(gallery, gid, probe, pid);
  ASSERT_EQ(s.genuine.size(), 3u);
  ASSERT_EQ(s.impostor.size(), 3u);
  EXPECT_EQ(s.genuine[0], 1.0);
  EXPECT_NEAR(s.genuine[1], std::sqrt(0.5), 1e-15);
  EXPECT_EQ(s.genuine[2], -1.0);
  for (double x : s.impostor) {
    EXPECT_GE(x, -1.0);
    EXPECT_LE(x, 1.0);
  }
}

TEST(Vr, SeparableScores) {
  ScoreSet s;
  s.genuine.assign(50, 1.0);
  s.impostor.assign(1000, -1.0);
  for (double far : {0.001, 0.01, 0.1, 0.5}) EXPECT_EQ(vr_at_far(s, far), 1.0);
}

TEST(Vr, HundredEvenlySpacedImpostors) {
  ScoreSet s;
  for (int i = 0; i < 100; ++i) s.impostor.push_back(-0.99 + 0.02 * i);
  s.genuine = {0.99, 0.98, 0.97, 0.5};
  EXPECT_EQ(threshold_at_far(s, 0.01), s.impostor.back());
  EXPECT_EQ(vr_at_far(s, 0.01), 0.25);
}

TEST(Vr, MatchesBruteForceOracleWithTies) {
  RandomSource rng(6);
  for (int trial = 0; trial < 30; ++trial) {
    const ScoreSet s = random_scores(80, 200, rng, trial % 2 == 0 ? 20 : 0);
    for (double far : {0.005, 0.01, 0.05, 0.1, 0.37, 1.0}) {
      ASSERT_EQ(vr_at_far(s, far), vr_oracle(s, far)) << "trial " << trial << " far " << far;
    }
  }
}

TEST(Vr, ImpostorFractionNeverExceedsFar) {
  RandomSource rng(7);
  const ScoreSet s = random_scores(100, 1000, rng, 50);
  for (double far : {0.001, 0.01, 0.02, 0.3}) {
    const double t = threshold_at_far(s, far);
    const auto pass = std::count_if(s.impostor.begin(), s.impostor.end(), [&](double x) { return x >= t; });
    EXPECT_LE(static_cast<double>(pass), far * 1000 + 1e-9);
  }
}

TEST(Vr, IdenticalDistributionsGiveFar) {
  RandomSource rng(8);
  ScoreSet s;
  for (int i = 0; i < 10000; ++i) {
    s.genuine.push_back(std::tanh(rng.normal()));
    s.impostor.push_back(std::tanh(rng.normal()));
  }
  for (double far : {0.01, 0.1, 0.5}) {
    const double sd = std::sqrt(far * (1 - far) / 10000);
    EXPECT_NEAR(vr_at_far(s, far), far, 4 * sd + 1e-4);
  }
}

TEST(Vr, MonotoneInFar) {
  RandomSource rng(9);
  const ScoreSet s = random_scores(10000, 10000, rng, 100);
  double prev = -1;
  for (int k = 0; k <= 400; ++k) {
    const double far = std::pow(10.0, -4.0 + k / 100.0);
    const double vr = vr_at_far(s, std::min(far, 1.0));
    ASSERT_GE(vr, prev);
    prev = vr;
  }
}

TEST(Vr, Errors) {
  ScoreSet s;
  s.genuine = {0.5};
  s.impostor.assign(99, 0.0);
  EXPECT_THROW(vr_at_far(s, 0.01), ConfigError);
  EXPECT_THROW(vr_at_far(s, 0.0), ConfigError);
  EXPECT_THROW(vr_at_far(s, 1.5), ConfigError);
  s.impostor.push_back(0.1);
  EXPECT_NO_THROW(vr_at_far(s, 0.01));
}

TEST(Roc, EndpointsAndMonotone) {
  RandomSource rng(10);
  const ScoreSet s = random_scores(2000, 8000, rng);
  const auto curve = roc_curve(s, 50);
  ASSERT_EQ(curve.size(), 50u);
  EXPECT_DOUBLE_EQ(curve.front().far, 1.0 / 8000);
  EXPECT_EQ(curve.back().far, 1.0);
  EXPECT_EQ(curve.back().vr, 1.0);
  for (std::size_t i = 1; i < curve.size(); ++i) {
    EXPECT_GT(curve[i].far, curve[i - 1].far);
    EXPECT_GE(curve[i].vr, curve[i - 1].vr);
  }
}

TEST(Roc, SeparableCurvePinnedAtOne) {
  ScoreSet s;
  s.genuine.assign(10, 0.9);
  s.impostor.assign(100, -0.2);
  for (const RocPoint& p : roc_curve(s, 10)) EXPECT_EQ(p.vr, 1.0);
  s.genuine.clear();
  EXPECT_THROW(roc_curve(s, 10), ConfigError);
}

TEST(Roc, CsvFormat) {
  const std::string csv = roc_csv({{0.001, 0.5}, {1.0, 1.0}});
  EXPECT_EQ(csv, "far,vr\n0.001,0.5\n1,1\n");
}

}  // namespace
}  // namespace dvg::metrics
