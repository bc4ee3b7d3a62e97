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

#ifndef GENCLASS_SRM_HPP
#define GENCLASS_SRM_HPP

#include <array>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "genclass/imaging.hpp"

namespace genclass::srm {

/// Fixed 5x5 high-pass steganalysis kernel; output is divided by `scale`.
struct SrmKernel {
  std::string name;
  double scale = 1.0;
  std::array<double, 25> weights{};  // row-major

  double at(int row, int col) const { return weights[row * 5 + col]; }
  double sum() const;
};

struct KernelBank {
  std::string bank_id;
  std::vector<SrmKernel> kernels;

  nlohmann::json to_json() const;
};

/// The three-kernel bank: 1-D second-order, 3x3 square, 5x5 square.
const KernelBank& kernel_bank();

/// Planar C x H x W residual map, one channel per kernel.
struct ResidualTensor {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::string kernel_bank_id;
  std::vector<float> values;

  float at(int c, int y, int x) const { return values[(static_cast<std::size_t>(c) * height + y) * width + x]; }
};

/// Residuals of a preprocessed 128x128x3 raw_0_255 image. Each kernel is
/// cross-correlated with every input channel and the channel responses are
/// summed. Borders replicate the edge pixels.
ResidualTensor srm_residuals(const ImageTensor& image);

/// Same filtering on an arbitrary H x W x 3 interleaved array without shape
/// or value-range checks.
ResidualTensor srm_residuals_unchecked(std::span<const float> pixels, int height, int width,
                                       const KernelBank& bank = kernel_bank());

}  // namespace genclass::srm

#endif  // GENCLASS_SRM_HPP
