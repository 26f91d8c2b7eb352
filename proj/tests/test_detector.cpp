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

#include <filesystem>
#include <fstream>
#include <limits>

#include <gtest/gtest.h>

#include "hardmine/detector.hpp"
#include "hardmine/io.hpp"
#include "hardmine/trainer.hpp"

namespace hm = hardmine;
namespace fs = std::filesystem;

namespace {

hm::Dataset small_dataset(int count, std::uint64_t seed) {
  hm::SceneSpec spec;
  spec.seed = seed;
  return hm::generate_dataset(spec, count);
}

std::vector<const hm::Frame*> frame_ptrs(const hm::Dataset& data, int count) {
  std::vector<const hm::Frame*> out;
  for (int i = 0; i < count; ++i) out.push_back(&data.frames[i]);
  return out;
}

// Fresh detectors have zero heads; audits want generic values everywhere.
void randomize_params(hm::DetectorModel& m, std::uint64_t seed) {
  hm::Rng rng(seed);
  for (double& p : m.params) p = rng.uniform(-0.4, 0.4);
}

hm::TrainConfig variant_config(hm::Variant v) {
  hm::TrainConfig cfg;
  cfg.loss.variant = v;
  cfg.loss.alpha = 0.25;
  cfg.loss.gamma = 1.5;
  cfg.loss.xi = 30.0;
  cfg.loss.rank_b = 0.35;
  return cfg;
}

}  // namespace

TEST(DetectorModel, ParameterBudgetAndLayout) {
  const hm::GridSpec grid;
  const auto model = hm::make_detector(grid, 8, 7);
  EXPECT_EQ(model.params.size(), model.layout().total);
  EXPECT_LE(model.params.size(), 20000u);  // small enough to audit
}

TEST(DetectorModel, SameSeedSameInit) {
  const hm::GridSpec grid;
  const auto a = hm::make_detector(grid, 8, 42);
  const auto b = hm::make_detector(grid, 8, 42);
  EXPECT_EQ(a.params, b.params);
  const auto c = hm::make_detector(grid, 8, 43);
  EXPECT_NE(a.params, c.params);
}

TEST(Forward, OutputShapesMatchGrid) {
  const hm::GridSpec grid;
  const auto model = hm::make_detector(grid, 8, 7);
  const auto data = small_dataset(1, 7);
  const auto heads =
      hm::forward_heads(model, hm::image_to_doubles(data.frames[0]));
  for (int s = 0; s < hm::kNumScales; ++s)
    EXPECT_EQ(heads[s].size(),
              static_cast<std::size_t>(hm::kHeadChannels) * grid.cells[s] *
                  grid.cells[s]);
}

TEST(Forward, ZeroHeadsPredictExactlyHalf) {
  const hm::GridSpec grid;
  const auto model = hm::make_detector(grid, 8, 7);  // heads start at zero
  const auto data = small_dataset(1, 7);
  const auto heads =
      hm::forward_heads(model, hm::image_to_doubles(data.frames[0]));
  for (int s = 0; s < hm::kNumScales; ++s) {
    const int hw = grid.cells[s] * grid.cells[s];
    for (int cell = 0; cell < hw; ++cell)
      EXPECT_EQ(hm::detail::sigmoid(heads[s][cell]), 0.5);
  }
}

TEST(Forward, Deterministic) {
  const hm::GridSpec grid;
  auto model = hm::make_detector(grid, 8, 7);
  randomize_params(model, 5);
  const auto data = small_dataset(1, 9);
  const auto img = hm::image_to_doubles(data.frames[0]);
  const auto a = hm::forward_heads(model, img);
  const auto b = hm::forward_heads(model, img);
  for (int s = 0; s < hm::kNumScales; ++s) EXPECT_EQ(a[s], b[s]);
}

TEST(Forward, RejectsWrongImageSize) {
  const hm::GridSpec grid;
  const auto model = hm::make_detector(grid, 8, 7);
  EXPECT_THROW(hm::forward_heads(model, std::vector<double>(100, 0.0)),
               hm::DataError);
}

TEST(AuditGradients, AllVariantsBelowTolerance) {
  const hm::GridSpec grid;
  auto model = hm::make_detector(grid, 8, 7);
  randomize_params(model, 17);
  const auto data = small_dataset(8, 31);
  const auto batch = frame_ptrs(data, 6);
  for (hm::Variant v :
       {hm::Variant::kBce, hm::Variant::kFocal, hm::Variant::kBalancedFocal,
        hm::Variant::kLrm, hm::Variant::kCombined}) {
    const double err = hm::audit_gradients(model, batch, variant_config(v),
                                           /*sample_count=*/60,
                                           /*seed=*/1234);
    EXPECT_LT(err, 1e-4) << "variant " << hm::to_string(v);
  }
}

TEST(Train, ZeroLearningRateLeavesParametersAndHistoryFlat) {
  const hm::GridSpec grid;
  const auto data = small_dataset(24, 3);
  hm::TrainConfig cfg = variant_config(hm::Variant::kBce);
  cfg.learning_rate = 0.0;
  cfg.epochs = 4;
  cfg.batch_size = 8;
  const auto result = hm::train(data, grid, cfg);
  const auto init = hm::make_detector(grid, cfg.channels, cfg.seed);
  EXPECT_EQ(result.model.params, init.params);
  ASSERT_EQ(result.history.size(), 4u);
  for (std::size_t e = 1; e < result.history.size(); ++e) {
    EXPECT_DOUBLE_EQ(result.history[e].total, result.history[0].total);
    EXPECT_DOUBLE_EQ(result.history[e].objectness,
                     result.history[0].objectness);
    EXPECT_DOUBLE_EQ(result.history[e].box, result.history[0].box);
  }
}

TEST(Train, SameSeedSameTrajectory) {
  const hm::GridSpec grid;
  const auto data = small_dataset(24, 5);
  hm::TrainConfig cfg = variant_config(hm::Variant::kCombined);
  cfg.epochs = 3;
  cfg.batch_size = 8;
  const auto a = hm::train(data, grid, cfg);
  const auto b = hm::train(data, grid, cfg);
  EXPECT_EQ(a.model.params, b.model.params);
  ASSERT_EQ(a.history.size(), b.history.size());
  for (std::size_t e = 0; e < a.history.size(); ++e)
    EXPECT_EQ(a.history[e].total, b.history[e].total);
}

TEST(Train, LossDecreasesOnAverage) {
  const hm::GridSpec grid;
  const auto data = small_dataset(64, 7);
  hm::TrainConfig cfg = variant_config(hm::Variant::kBce);
  cfg.epochs = 10;
  cfg.batch_size = 16;
  const auto result = hm::train(data, grid, cfg);
  const auto smoothed = hm::smoothed_total_loss(result.history, 5);
  ASSERT_GE(smoothed.size(), 2u);
  EXPECT_LT(smoothed.back(), smoothed.front());
}

TEST(BatchLoss, NonFiniteNetworkOutputIsNumericError) {
  // the divergence guard train() relies on: poisoned parameters must
  // surface as a NumericError, not propagate NaN into the kernels
  const hm::GridSpec grid;
  auto model = hm::make_detector(grid, 8, 7);
  randomize_params(model, 41);
  model.params[model.params.size() / 2] =
      std::numeric_limits<double>::quiet_NaN();
  const auto data = small_dataset(2, 7);
  const auto batch = frame_ptrs(data, 2);
  EXPECT_THROW(
      hm::batch_loss_and_grad(model, batch, variant_config(hm::Variant::kBce),
                              nullptr),
      hm::NumericError);
}

TEST(Train, RejectsEmptyDatasetAndMismatchedGrid) {
  const hm::GridSpec grid;
  hm::Dataset empty;
  empty.image_size = 64;
  EXPECT_THROW(hm::train(empty, grid, variant_config(hm::Variant::kBce)),
               hm::DataError);
  auto data = small_dataset(4, 7);
  hm::GridSpec wrong = grid;
  wrong.image_size = 32;
  EXPECT_THROW(hm::train(data, wrong, variant_config(hm::Variant::kBce)),
               hm::DataError);
}

TEST(ModelIo, SaveLoadRoundTripAndByteStability) {
  const hm::GridSpec grid;
  auto model = hm::make_detector(grid, 8, 7);
  randomize_params(model, 23);
  const fs::path dir =
      fs::temp_directory_path() / ("hardmine_model_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  const fs::path p1 = dir / "m1.bin";
  const fs::path p2 = dir / "m2.bin";
  hm::save_model(model, p1);
  hm::save_model(model, p2);

  std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
  const std::string b1((std::istreambuf_iterator<char>(f1)),
                       std::istreambuf_iterator<char>());
  const std::string b2((std::istreambuf_iterator<char>(f2)),
                       std::istreambuf_iterator<char>());
  EXPECT_EQ(b1, b2);

  const auto loaded = hm::load_model(p1);
  EXPECT_EQ(loaded.params, model.params);
  EXPECT_EQ(loaded.grid, model.grid);
  EXPECT_EQ(loaded.channels, model.channels);
  EXPECT_EQ(loaded.init_seed, model.init_seed);
  fs::remove_all(dir);
}

TEST(Detect, DeterministicAndInsideImage) {
  const hm::GridSpec grid;
  auto model = hm::make_detector(grid, 8, 7);
  randomize_params(model, 29);
  const auto data = small_dataset(4, 13);
  for (const auto& frame : data.frames) {
    const auto a = hm::detect_frame(model, frame, 0.05);
    const auto b = hm::detect_frame(model, frame, 0.05);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      EXPECT_EQ(a[i].confidence, b[i].confidence);
      EXPECT_GE(a[i].box.x1, 0.0);
      EXPECT_LE(a[i].box.x2, grid.image_size);
      EXPECT_LT(a[i].box.x1, a[i].box.x2);
      EXPECT_GE(a[i].confidence, 0.05);
    }
  }
}
