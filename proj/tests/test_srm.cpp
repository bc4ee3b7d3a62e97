/*
 * Copyright 2026 The genclass Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "genclass/errors.hpp"
#include "genclass/srm.hpp"
#include "genclass/synth.hpp"
#include "oracles.hpp"

namespace genclass::srm {
namespace {

TEST(KernelBank, ThreeZeroSumKernels) {
  const KernelBank& bank = kernel_bank();
  EXPECT_EQ(bank.bank_id, "srm3-v1");
  ASSERT_EQ(bank.kernels.size(), 3u);
  for (const auto& k : bank.kernels) {
    EXPECT_EQ(k.sum(), 0.0) << k.name;
    EXPECT_GT(k.scale, 0.0);
    EXPECT_EQ(k.weights.size(), 25u);
  }
}

TEST(KernelBank, SerializationIsStable) {
  const std::string a = kernel_bank().to_json().dump();
  const std::string b = kernel_bank().to_json().dump();
  EXPECT_EQ(a, b);
  const auto j = nlohmann::json::parse(a);
  EXPECT_EQ(j["bank_id"], "srm3-v1");
  ASSERT_EQ(j["kernels"].size(), 3u);
  EXPECT_EQ(j["kernels"][0]["weights"].size(), 25u);
}

TEST(Residuals, ConstantImageIsExactlyZero) {
  for (float v : {0.0f, 200.0f, 255.0f}) {
    const ResidualTensor r = srm_residuals(testing::constant_image(128, 128, v));
    EXPECT_EQ(r.channels, 3);
    EXPECT_EQ(r.height, 128);
    EXPECT_EQ(r.width, 128);
    for (float x : r.values) ASSERT_EQ(x, 0.0f);
  }
}

TEST(Residuals, EachKernelOnConstantInputIsZero) {
  for (const auto& k : kernel_bank().kernels) {
    KernelBank single{"single", {k}};
    const std::vector<float> pixels(12 * 12 * 3, 77.0f);
    const ResidualTensor r = srm_residuals_unchecked(pixels, 12, 12, single);
    for (float x : r.values) ASSERT_EQ(x, 0.0f) << k.name;
  }
}

TEST(Residuals, ImpulseStampsFlippedKernel) {
  ImageTensor img = testing::constant_image(128, 128, 0.0f);
  for (int c = 0; c < 3; ++c) img.at(64, 64, c) = 255.0f;
  const ResidualTensor r = srm_residuals(img);
  std::vector<double> plane(128 * 128, 0.0);
  plane[64 * 128 + 64] = 3.0 * 255.0;
  const auto& bank = kernel_bank();
  for (int k = 0; k < 3; ++k) {
    double w[25];
    for (int i = 0; i < 25; ++i) w[i] = bank.kernels[k].weights[i] / bank.kernels[k].scale;
    const auto expected = oracles::dense_convolve(plane, 128, 128, w);
    for (int y = 0; y < 128; ++y)
      for (int x = 0; x < 128; ++x) ASSERT_NEAR(r.at(k, y, x), expected[y * 128 + x], 1e-4) << k << " " << y << " " << x;
    for (int dy = -2; dy <= 2; ++dy)
      for (int dx = -2; dx <= 2; ++dx)
        EXPECT_NEAR(r.at(k, 64 + dy, 64 + dx), 765.0 * bank.kernels[k].at(2 - dy, 2 - dx) / bank.kernels[k].scale, 1e-3);
  }
}

TEST(Residuals, NaturalImageIsNearZeroMean) {
  std::mt19937_64 rng(3);
  const ResidualTensor r = srm_residuals(synth::smooth_image(128, rng));
  for (int k = 0; k < 3; ++k) {
    double sum = 0;
    for (int y = 0; y < 128; ++y)
      for (int x = 0; x < 128; ++x) sum += r.at(k, y, x);
    EXPECT_LT(std::abs(sum / (128.0 * 128.0)), 1.0);
  }
}

TEST(Residuals, Linearity) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<float> u(-50.0f, 50.0f);
  std::vector<float> i1(20 * 24 * 3), i2(i1.size()), mix(i1.size());
  for (std::size_t i = 0; i < i1.size(); ++i) {
    i1[i] = u(rng);
    i2[i] = u(rng);
    mix[i] = 2.0f * i1[i] - 0.5f * i2[i];
  }
  const auto r1 = srm_residuals_unchecked(i1, 20, 24);
  const auto r2 = srm_residuals_unchecked(i2, 20, 24);
  const auto rm = srm_residuals_unchecked(mix, 20, 24);
  // The mixed input is itself rounded to float.
  for (std::size_t i = 0; i < rm.values.size(); ++i) {
    const double expected = 2.0 * r1.values[i] - 0.5 * r2.values[i];
    EXPECT_NEAR(rm.values[i], expected, 1e-4 * (1.0 + std::abs(2.0 * r1.values[i]) + std::abs(0.5 * r2.values[i])));
  }
}

TEST(Residuals, PropertyChecks) {
  for (const auto& r : {oracles::check_srm(21), oracles::check_srm_equivariance(22)})
    EXPECT_TRUE(r.passed) << r.name << ": " << r.detail;
}

TEST(Residuals, ShapeAndRangeErrors) {
  EXPECT_THROW(srm_residuals(testing::constant_image(64, 64, 10.0f)), ShapeError);
  EXPECT_THROW(srm_residuals(ImageTensor(128, 128, 1)), ShapeError);
  EXPECT_THROW(srm_residuals(ImageTensor(128, 128, 3, ValueRange::kUnit0To1, 0.5f)), RangeError);
  ImageTensor hot = testing::constant_image(128, 128, 10.0f);
  hot.at(3, 3, 1) = 300.0f;
  EXPECT_THROW(srm_residuals(hot), RangeError);
  const std::vector<float> wrong(10);
  EXPECT_THROW(srm_residuals_unchecked(wrong, 2, 2), ShapeError);
}

TEST(Residuals, Deterministic) {
  std::mt19937_64 rng(5);
  const ImageTensor img = synth::smooth_image(128, rng);
  EXPECT_EQ(srm_residuals(img).values, srm_residuals(img).values);
  EXPECT_EQ(srm_residuals(img).kernel_bank_id, "srm3-v1");
}

}  // namespace
}  // namespace genclass::srm
