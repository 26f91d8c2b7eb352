/*
 * Copyright 2026 The hardmine Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *   http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "hardmine/mining.hpp"
#include "hardmine/rng.hpp"

namespace hm = hardmine;

namespace {

// Repeated max-scan selection; deliberately avoids std::sort so it is an
// independent route to the same contract (descending value, lower index on
// ties).
std::vector<std::uint32_t> selection_oracle(const std::vector<double>& v,
                                            std::size_t k) {
  std::vector<bool> taken(v.size(), false);
  std::vector<std::uint32_t> out;
  for (std::size_t pick = 0; pick < k; ++pick) {
    std::size_t best = v.size();
    for (std::size_t j = 0; j < v.size(); ++j) {
      if (taken[j]) continue;
      if (best == v.size() || v[j] > v[best]) best = j;
    }
    taken[best] = true;
    out.push_back(static_cast<std::uint32_t>(best));
  }
  return out;
}

hm::ScaleGrid make_grid(int images, int side, const std::vector<double>& p,
                        const std::vector<double>& t) {
  hm::ScaleGrid g;
  g.images = images;
  g.height = g.width = side;
  g.obj_p = p;
  g.obj_t = t;
  return g;
}

hm::FeatureMapBatch random_batch(hm::Rng& rng, int images,
                                 std::array<int, 3> sides) {
  hm::FeatureMapBatch b;
  for (int s = 0; s < hm::kNumScales; ++s) {
    const std::size_t n =
        static_cast<std::size_t>(images) * sides[s] * sides[s];
    std::vector<double> p(n), t(n);
    for (std::size_t j = 0; j < n; ++j) {
      p[j] = rng.uniform(0.02, 0.98);
      t[j] = rng.bernoulli(0.2) ? 1.0 : 0.0;
    }
    b.scales[s] = make_grid(images, sides[s], p, t);
  }
  return b;
}

const auto kCeKernel = [](double p, double t) { return hm::ce_loss(p, t); };

}  // namespace

TEST(FlattenPerImage, RowMajorOrder) {
  // 2x2 grid, losses [[a,b],[c,d]] flattens to [a,b,c,d]
  auto g = make_grid(1, 2, {0.1, 0.2, 0.3, 0.4}, {0, 0, 0, 0});
  const std::vector<double> losses = {5.0, 1.0, 3.0, 2.0};
  const auto flat = hm::flatten_per_image(g, losses);
  ASSERT_EQ(flat.size(), 1u);
  EXPECT_EQ(flat[0], losses);
}

TEST(FlattenPerImage, ImagesStaySeparate) {
  auto g = make_grid(3, 2, std::vector<double>(12, 0.5),
                     std::vector<double>(12, 0.0));
  std::vector<double> losses(12);
  for (int i = 0; i < 12; ++i) losses[i] = i;
  const auto flat = hm::flatten_per_image(g, losses);
  ASSERT_EQ(flat.size(), 3u);
  EXPECT_EQ(flat[0], (std::vector<double>{0, 1, 2, 3}));
  EXPECT_EQ(flat[1], (std::vector<double>{4, 5, 6, 7}));
  EXPECT_EQ(flat[2], (std::vector<double>{8, 9, 10, 11}));
}

TEST(FlattenPerImage, DegenerateOneByOne) {
  auto g = make_grid(1, 1, {0.5}, {0.0});
  const auto flat = hm::flatten_per_image(g, {42.0});
  ASSERT_EQ(flat.size(), 1u);
  EXPECT_EQ(flat[0], std::vector<double>{42.0});
}

TEST(FlattenPerImage, DimensionMismatchThrows) {
  auto g = make_grid(1, 2, {0.5, 0.5, 0.5, 0.5}, {0, 0, 0, 0});
  EXPECT_THROW(hm::flatten_per_image(g, {1.0, 2.0}), hm::DataError);
}

TEST(SelectTopB, HalfOfFour) {
  const auto sel = hm::select_top_b({5, 1, 3, 2}, 0.5);
  EXPECT_EQ(sel.indices, (std::vector<std::uint32_t>{0, 2}));
}

TEST(SelectTopB, FullSelection) {
  const auto sel = hm::select_top_b({5, 1, 3, 2}, 1.0);
  EXPECT_EQ(sel.indices, (std::vector<std::uint32_t>{0, 2, 3, 1}));
}

TEST(SelectTopB, FloorOfOne) {
  // ceil(0.1 * 4) = 1
  const auto sel = hm::select_top_b({5, 1, 3, 2}, 0.1);
  EXPECT_EQ(sel.indices, (std::vector<std::uint32_t>{0}));
}

TEST(SelectTopB, TiesBreakTowardLowerIndex) {
  const auto sel = hm::select_top_b({3, 3, 1, 3}, 0.5);
  EXPECT_EQ(sel.indices, (std::vector<std::uint32_t>{0, 1}));
}

TEST(SelectTopB, Errors) {
  EXPECT_THROW(hm::select_top_b({}, 0.5), hm::DataError);
  EXPECT_THROW(hm::select_top_b({1.0}, 0.0), hm::ConfigError);
  EXPECT_THROW(hm::select_top_b({1.0}, 1.5), hm::ConfigError);
}

TEST(SelectTopB, CountLawAndOracleEquivalence) {
  hm::Rng rng(21);
  const double bs[] = {0.05, 0.1, 0.2, 0.3, 0.35, 0.5, 0.7, 0.8, 0.9, 1.0};
  for (int trial = 0; trial < 400; ++trial) {
    const int n = static_cast<int>(rng.uniform_int(1, 64));
    std::vector<double> v(n);
    const bool tie_heavy = rng.bernoulli(0.5);
    for (int j = 0; j < n; ++j)
      v[j] = tie_heavy ? 0.25 * rng.uniform_int(0, 3) : rng.uniform(0.0, 10.0);
    for (double b : bs) {
      const auto sel = hm::select_top_b(v, b);
      const std::size_t k = hm::selection_count(b, v.size());
      ASSERT_EQ(sel.indices.size(), k);
      EXPECT_EQ(sel.indices, selection_oracle(v, k));
    }
  }
}

TEST(SelectTopB, PositiveScalingKeepsSelection) {
  hm::Rng rng(22);
  for (int trial = 0; trial < 300; ++trial) {
    const int n = static_cast<int>(rng.uniform_int(2, 64));
    std::vector<double> v(n);
    for (int j = 0; j < n; ++j) v[j] = rng.uniform(0.0, 5.0);
    for (double c : {0.5, 2.0, 3.7, 30.0}) {
      std::vector<double> scaled(v);
      for (double& x : scaled) x *= c;
      EXPECT_EQ(hm::select_top_b(v, 0.35).indices,
                hm::select_top_b(scaled, 0.35).indices);
    }
  }
}

TEST(LrmObjectnessLoss, HandTracedScaleContributions) {
  // BCE with t=1 turns p = exp(-L) into a cell loss of exactly L, so the
  // scale contributions below are 4.0 (mean of {5,3}), 2.0, and 1.0.
  hm::FeatureMapBatch batch;
  batch.scales[0] = make_grid(
      1, 2,
      {std::exp(-5.0), std::exp(-1.0), std::exp(-3.0), std::exp(-2.0)},
      {1, 1, 1, 1});
  batch.scales[1] = make_grid(1, 1, {std::exp(-2.0)}, {1});
  batch.scales[2] = make_grid(1, 1, {std::exp(-1.0)}, {1});

  hm::LossConfig cfg;
  cfg.rank_b = 0.5;
  const auto out = hm::lrm_objectness_loss(batch, cfg, kCeKernel);
  EXPECT_NEAR(out.value, 7.0, 1e-9);
  ASSERT_TRUE(out.mask.has_value());
  EXPECT_EQ(out.mask->scales[0][0].indices,
            (std::vector<std::uint32_t>{0, 2}));
}

TEST(LrmObjectnessLoss, FullSelectionEqualsPlainReduction) {
  hm::Rng rng(23);
  for (int trial = 0; trial < 20; ++trial) {
    const auto batch = random_batch(rng, 1 + trial % 4, {4, 2, 1});
    hm::LossConfig cfg;
    cfg.rank_b = 1.0;
    const auto mined = hm::lrm_objectness_loss(batch, cfg, kCeKernel);
    const auto plain = hm::plain_objectness_loss(batch, kCeKernel);
    EXPECT_NEAR(mined.value, plain.value, 1e-12);
    for (int s = 0; s < hm::kNumScales; ++s)
      for (std::size_t j = 0; j < plain.d_dp[s].size(); ++j)
        EXPECT_DOUBLE_EQ(mined.d_dp[s][j], plain.d_dp[s][j]);
  }
}

TEST(LrmObjectnessLoss, GradientLocalityAndFactor) {
  hm::Rng rng(24);
  const auto batch = random_batch(rng, 3, {4, 2, 1});
  hm::LossConfig cfg;
  cfg.rank_b = 0.35;
  const auto out = hm::lrm_objectness_loss(batch, cfg, kCeKernel);
  ASSERT_TRUE(out.mask.has_value());
  for (int s = 0; s < hm::kNumScales; ++s) {
    const hm::ScaleGrid& g = batch.scales[s];
    const int n = g.cells_per_image();
    for (int i = 0; i < g.images; ++i) {
      const auto& sel = out.mask->scales[s][i].indices;
      const std::size_t k = sel.size();
      std::vector<bool> selected(n, false);
      for (auto idx : sel) selected[idx] = true;
      for (int j = 0; j < n; ++j) {
        const std::size_t cell = static_cast<std::size_t>(i) * n + j;
        if (!selected[j]) {
          EXPECT_EQ(out.d_dp[s][cell], 0.0);
        } else {
          const double expected =
              hm::ce_loss(g.obj_p[cell], g.obj_t[cell]).d_dp /
              (static_cast<double>(k) * g.images);
          EXPECT_DOUBLE_EQ(out.d_dp[s][cell], expected);
        }
      }
    }
  }
}

TEST(LrmObjectnessLoss, GradientMatchesCentralDifferences) {
  hm::Rng rng(25);
  auto batch = random_batch(rng, 2, {4, 2, 1});
  hm::LossConfig cfg;
  cfg.rank_b = 0.35;
  const double h = 1e-6;
  const auto base = hm::lrm_objectness_loss(batch, cfg, kCeKernel);

  int checked = 0;
  for (int probe = 0; probe < 24; ++probe) {
    const int s = static_cast<int>(rng.uniform_int(0, 2));
    const std::size_t cell = static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<std::int64_t>(
                               batch.scales[s].obj_p.size()) - 1));
    const double saved = batch.scales[s].obj_p[cell];

    batch.scales[s].obj_p[cell] = saved + h;
    const auto up = hm::lrm_objectness_loss(batch, cfg, kCeKernel);
    batch.scales[s].obj_p[cell] = saved - h;
    const auto dn = hm::lrm_objectness_loss(batch, cfg, kCeKernel);
    batch.scales[s].obj_p[cell] = saved;

    // skip probes that cross a selection boundary
    if (up.mask != base.mask || dn.mask != base.mask) continue;
    ++checked;
    const double fd = (up.value - dn.value) / (2.0 * h);
    const double analytic = base.d_dp[s][cell];
    EXPECT_LT(std::abs(analytic - fd) / std::max(1.0, std::abs(analytic)),
              1e-4);
  }
  EXPECT_GE(checked, 15);
}

TEST(CombinedObjectnessLoss, MatchesStraightLineReimplementation) {
  hm::Rng rng(26);
  hm::LossConfig cfg;
  cfg.alpha = 0.25;
  cfg.gamma = 1.5;
  cfg.xi = 30.0;
  cfg.rank_b = 0.35;
  for (int trial = 0; trial < 10; ++trial) {
    const auto batch = random_batch(rng, 3, {4, 2, 1});
    const auto out = hm::combined_objectness_loss(batch, cfg);

    double expected = 0.0;
    for (int s = 0; s < hm::kNumScales; ++s) {
      const hm::ScaleGrid& g = batch.scales[s];
      const int n = g.cells_per_image();
      double scale_sum = 0.0;
      for (int i = 0; i < g.images; ++i) {
        std::vector<double> losses(n);
        for (int j = 0; j < n; ++j) {
          const std::size_t cell = static_cast<std::size_t>(i) * n + j;
          const double p = g.obj_p[cell];
          const double t = g.obj_t[cell];
          const double at = t == 1.0 ? cfg.alpha : 1.0 - cfg.alpha;
          double pt = t == 1.0 ? p : 1.0 - p;
          pt = std::min(1.0 - cfg.eps, std::max(cfg.eps, pt));
          losses[j] = -cfg.xi * at * std::pow(1.0 - pt, cfg.gamma) * std::log(pt);
        }
        const auto picked =
            selection_oracle(losses, hm::selection_count(cfg.rank_b, n));
        double sum = 0.0;
        for (auto idx : picked) sum += losses[idx];
        scale_sum += sum / picked.size();
      }
      expected += scale_sum / g.images;
    }
    EXPECT_NEAR(out.value, expected, 1e-10);
  }
}

TEST(CombinedObjectnessLoss, UniformScalingKeepsSelectionOfLrmOverBce) {
  // gamma=0, alpha=0.5 makes the balanced focal kernel a uniform
  // xi*0.5 scaling of cross-entropy, so rankings cannot change.
  hm::Rng rng(27);
  const auto batch = random_batch(rng, 2, {4, 2, 1});
  hm::LossConfig combined_cfg;
  combined_cfg.variant = hm::Variant::kCombined;
  combined_cfg.gamma = 0.0;
  combined_cfg.alpha = 0.5;
  combined_cfg.xi = 2.0;
  combined_cfg.rank_b = 0.35;
  hm::LossConfig lrm_cfg = combined_cfg;
  lrm_cfg.variant = hm::Variant::kLrm;

  const auto combined = hm::objectness_loss(batch, combined_cfg);
  const auto lrm = hm::objectness_loss(batch, lrm_cfg);
  ASSERT_TRUE(combined.mask.has_value());
  ASSERT_TRUE(lrm.mask.has_value());
  EXPECT_EQ(*combined.mask, *lrm.mask);
  // xi * alpha_t = 1, so the values agree too
  EXPECT_NEAR(combined.value, lrm.value, 1e-12);
}

TEST(ObjectnessLoss, BceIgnoresAlphaGammaXi) {
  hm::Rng rng(28);
  const auto batch = random_batch(rng, 2, {4, 2, 1});
  hm::LossConfig a;
  a.variant = hm::Variant::kBce;
  hm::LossConfig b = a;
  b.alpha = 0.9;
  b.gamma = 4.0;
  b.xi = 5.0;
  EXPECT_EQ(hm::objectness_loss(batch, a).value,
            hm::objectness_loss(batch, b).value);
}

TEST(ObjectnessLoss, LrmIgnoresGamma) {
  hm::Rng rng(29);
  const auto batch = random_batch(rng, 2, {4, 2, 1});
  hm::LossConfig a;
  a.variant = hm::Variant::kLrm;
  a.rank_b = 0.35;
  hm::LossConfig b = a;
  b.gamma = 3.0;
  hm::LossConfig c = a;
  c.alpha = 0.7;
  c.xi = 11.0;
  EXPECT_EQ(hm::objectness_loss(batch, a).value,
            hm::objectness_loss(batch, b).value);
  EXPECT_EQ(hm::objectness_loss(batch, a).value,
            hm::objectness_loss(batch, c).value);
}

TEST(ObjectnessLoss, FocalIgnoresXiAndRankB) {
  hm::Rng rng(30);
  const auto batch = random_batch(rng, 2, {4, 2, 1});
  hm::LossConfig a;
  a.variant = hm::Variant::kFocal;
  hm::LossConfig b = a;
  b.xi = 9.0;
  b.rank_b = 0.1;
  EXPECT_EQ(hm::objectness_loss(batch, a).value,
            hm::objectness_loss(batch, b).value);
}

TEST(FeatureMapBatch, ValidateRejectsBadInputs) {
  hm::FeatureMapBatch batch;
  batch.scales[0] = make_grid(1, 2, {0.5, 0.5, 0.5, 1.5}, {0, 0, 0, 0});
  batch.scales[1] = make_grid(1, 1, {0.5}, {0});
  batch.scales[2] = make_grid(1, 1, {0.5}, {0});
  EXPECT_THROW(batch.validate(), hm::DataError);  // p outside [0,1]

  batch.scales[0].obj_p[3] = 0.5;
  batch.scales[0].obj_t[0] = 0.3;  // non-binary target
  EXPECT_THROW(batch.validate(), hm::DataError);

  batch.scales[0].obj_t[0] = 0.0;
  batch.scales[1].images = 2;  // inconsistent batch size
  EXPECT_THROW(batch.validate(), hm::DataError);
}
