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

// PRNU-style fingerprint baseline: denoising residuals averaged into one
// template per class, matched by normalized cross-correlation.

#ifndef GENCLASS_PRNU_HPP
#define GENCLASS_PRNU_HPP

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "genclass/imaging.hpp"

namespace genclass::prnu {

using Raster = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

class Denoiser {
 public:
  virtual ~Denoiser() = default;
  virtual std::string id() const = 0;
  virtual Raster apply(const Raster& plane) const = 0;
};

/// Separable 3x3 Gaussian. At the border the taps that fall outside are
/// dropped and the rest renormalized, so constant planes are fixed points.
class GaussianDenoiser : public Denoiser {
 public:
  explicit GaussianDenoiser(double sigma = 0.8);
  std::string id() const override;
  Raster apply(const Raster& plane) const override;

 private:
  double sigma_;
  double center_;
  double side_;
};

const Denoiser& default_denoiser();

/// Y = 0.299 R + 0.587 G + 0.114 B.
Raster luminance(const ImageTensor& image);

/// Luminance minus its denoised version, mean-subtracted. Expects a
/// preprocessed 128 x 128 x 3 image.
Raster extract_residual(const ImageTensor& image, const Denoiser& denoiser = default_denoiser());

struct Fingerprint {
  Raster residual;
  std::string class_label;
  int k = 0;
  std::string denoiser_id;

  void save(const std::filesystem::path& path) const;
  static Fingerprint load(const std::filesystem::path& path);
};

Fingerprint build_fingerprint(std::span<const ImageTensor> images, const std::string& class_label,
                              const Denoiser& denoiser = default_denoiser());
Fingerprint fingerprint_from_residuals(std::span<const Raster> residuals, const std::string& class_label,
                                       const std::string& denoiser_id);

/// Zero-mean, unit-norm inner product.
double normalized_correlation(const Raster& a, const Raster& b);

struct PrnuPrediction {
  std::string label;
  std::map<std::string, double> correlations;
};

/// argmax correlation; equal scores go to the lexicographically smallest label.
PrnuPrediction prnu_classify(const Raster& query_residual, std::span<const Fingerprint> fingerprints);

}  // namespace genclass::prnu

#endif  // GENCLASS_PRNU_HPP
