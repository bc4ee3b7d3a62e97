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

#include "genclass/srm.hpp"

#include <algorithm>
#include <numeric>

#include "genclass/errors.hpp"

namespace genclass::srm {

double SrmKernel::sum() const { return std::accumulate(weights.begin(), weights.end(), 0.0); }

nlohmann::json KernelBank::to_json() const {
  nlohmann::json j;
  j["bank_id"] = bank_id;
  auto arr = nlohmann::json::array();
  for (const auto& k : kernels) {
    std::vector<float> w(k.weights.begin(), k.weights.end());
    arr.push_back({{"name", k.name}, {"scale", k.scale}, {"weights", w}});
  }
  j["kernels"] = std::move(arr);
  return j;
}

const KernelBank& kernel_bank() {
  static const KernelBank bank = [] {
    KernelBank b;
    b.bank_id = "srm3-v1";
    b.kernels.push_back({"second_order_h", 2.0,
                         {0, 0, 0, 0, 0,
                          0, 0, 0, 0, 0,
                          0, 1, -2, 1, 0,
                          0, 0, 0, 0, 0,
                          0, 0, 0, 0, 0}});
    b.kernels.push_back({"square3x3", 4.0,
                         {0, 0, 0, 0, 0,
                          0, -1, -1, -1, 0,
                          0, -1, 8, -1, 0,
                          0, -1, -1, -1, 0,
                          0, 0, 0, 0, 0}});
    b.kernels.push_back({"square5x5", 12.0,
                         {1, -2, 2, -2, 1,
                          -2, 6, -8, 6, -2,
                          2, -8, 12, -8, 2,
                          -2, 6, -8, 6, -2,
                          1, -2, 2, -2, 1}});
    return b;
  }();
  return bank;
}

ResidualTensor srm_residuals_unchecked(std::span<const float> pixels, int height, int width, const KernelBank& bank) {
  const std::size_t plane = static_cast<std::size_t>(height) * width;
  if (pixels.size() != plane * 3) throw ShapeError("srm input must be H x W x 3");

  // The kernel is shared by all input channels, so filtering the channel sum
  // equals summing the per-channel responses.
  std::vector<double> summed(plane);
  for (std::size_t i = 0; i < plane; ++i)
    summed[i] = static_cast<double>(pixels[3 * i]) + pixels[3 * i + 1] + pixels[3 * i + 2];

  ResidualTensor out;
  out.channels = static_cast<int>(bank.kernels.size());
  out.height = height;
  out.width = width;
  out.kernel_bank_id = bank.bank_id;
  out.values.assign(plane * out.channels, 0.0f);

  for (int k = 0; k < out.channels; ++k) {
    const auto& kernel = bank.kernels[k];
    float* dst = out.values.data() + k * plane;
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        double acc = 0.0;
        for (int i = 0; i < 5; ++i) {
          const int sy = std::clamp(y + i - 2, 0, height - 1);
          for (int j = 0; j < 5; ++j) {
            const double w = kernel.at(i, j);
            if (w == 0.0) continue;
            const int sx = std::clamp(x + j - 2, 0, width - 1);
            acc += w * summed[static_cast<std::size_t>(sy) * width + sx];
          }
        }
        dst[static_cast<std::size_t>(y) * width + x] = static_cast<float>(acc / kernel.scale);
      }
    }
  }
  return out;
}

ResidualTensor srm_residuals(const ImageTensor& image) {
  if (image.height != kInputSize || image.width != kInputSize || image.channels != 3)
    throw ShapeError("srm_residuals expects 128x128x3, got " + std::to_string(image.height) + "x" +
                     std::to_string(image.width) + "x" + std::to_string(image.channels));
  if (image.value_range != ValueRange::kRaw0To255) throw RangeError("srm_residuals expects raw_0_255 input");
  if (!image.in_range()) throw RangeError("pixel values outside [0, 255]");
  return srm_residuals_unchecked(image.pixels, image.height, image.width);
}

}  // namespace genclass::srm
