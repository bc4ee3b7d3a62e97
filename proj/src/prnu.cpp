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

#include "genclass/prnu.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <nlohmann/json.hpp>

#include "genclass/errors.hpp"
#include "genclass/util.hpp"

namespace genclass::prnu {

namespace {

constexpr char kMagic[8] = {'G', 'E', 'N', 'C', 'F', 'P', 'R', '1'};

void subtract_mean(Raster& r) { r.array() -= r.mean(); }

}  // namespace

GaussianDenoiser::GaussianDenoiser(double sigma) : sigma_(sigma) {
  if (!(sigma > 0.0)) throw ArgumentError("denoiser sigma must be positive");
  const double side = std::exp(-1.0 / (2.0 * sigma * sigma));
  center_ = 1.0 / (1.0 + 2.0 * side);
  side_ = side / (1.0 + 2.0 * side);
}

std::string GaussianDenoiser::id() const {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "gaussian3x3-sigma%.3g", sigma_);
  return buf;
}

Raster GaussianDenoiser::apply(const Raster& plane) const {
  const Eigen::Index h = plane.rows(), w = plane.cols();
  auto pass = [&](const Raster& in, bool horizontal) {
    Raster out(h, w);
    for (Eigen::Index y = 0; y < h; ++y)
      for (Eigen::Index x = 0; x < w; ++x) {
        double acc = center_ * in(y, x), weight = center_;
        const Eigen::Index pos = horizontal ? x : y, len = horizontal ? w : h;
        if (pos > 0) {
          acc += side_ * (horizontal ? in(y, x - 1) : in(y - 1, x));
          weight += side_;
        }
        if (pos + 1 < len) {
          acc += side_ * (horizontal ? in(y, x + 1) : in(y + 1, x));
          weight += side_;
        }
        out(y, x) = acc / weight;
      }
    return out;
  };
  return pass(pass(plane, true), false);
}

const Denoiser& default_denoiser() {
  static const GaussianDenoiser d(0.8);
  return d;
}

Raster luminance(const ImageTensor& image) {
  if (image.channels != 3) throw ShapeError("luminance needs 3 channels, got " + std::to_string(image.channels));
  Raster y(image.height, image.width);
  for (int r = 0; r < image.height; ++r)
    for (int c = 0; c < image.width; ++c)
      y(r, c) = 0.299 * image.at(r, c, 0) + 0.587 * image.at(r, c, 1) + 0.114 * image.at(r, c, 2);
  return y;
}

Raster extract_residual(const ImageTensor& image, const Denoiser& denoiser) {
  if (image.height != kInputSize || image.width != kInputSize || image.channels != 3)
    throw ShapeError("PRNU residuals need a 128x128x3 image, got " + std::to_string(image.height) + "x" +
                     std::to_string(image.width) + "x" + std::to_string(image.channels));
  const Raster y = luminance(image);
  Raster r = y - denoiser.apply(y);
  subtract_mean(r);
  return r;
}

Fingerprint fingerprint_from_residuals(std::span<const Raster> residuals, const std::string& class_label,
                                       const std::string& denoiser_id) {
  if (residuals.empty()) throw ArgumentError("fingerprint for '" + class_label + "' needs at least one image");
  Raster acc = Raster::Zero(residuals[0].rows(), residuals[0].cols());
  for (const auto& r : residuals) {
    if (r.rows() != acc.rows() || r.cols() != acc.cols()) throw ShapeError("fingerprint residuals differ in size");
    acc += r;
  }
  acc /= static_cast<double>(residuals.size());
  subtract_mean(acc);
  return {std::move(acc), class_label, static_cast<int>(residuals.size()), denoiser_id};
}

Fingerprint build_fingerprint(std::span<const ImageTensor> images, const std::string& class_label,
                              const Denoiser& denoiser) {
  if (images.empty()) throw ArgumentError("fingerprint for '" + class_label + "' needs at least one image");
  std::vector<Raster> residuals;
  residuals.reserve(images.size());
  for (const auto& im : images) residuals.push_back(extract_residual(im, denoiser));
  return fingerprint_from_residuals(residuals, class_label, denoiser.id());
}

double normalized_correlation(const Raster& a, const Raster& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw ShapeError("correlation operands differ in size");
  const Raster za = a.array() - a.mean();
  const Raster zb = b.array() - b.mean();
  const double na = za.norm(), nb = zb.norm();
  if (!(na > 0.0) || !(nb > 0.0)) throw DegenerateResidualError("zero-variance residual");
  const double rho = za.cwiseProduct(zb).sum() / (na * nb);
  return std::clamp(rho, -1.0, 1.0);
}

PrnuPrediction prnu_classify(const Raster& query_residual, std::span<const Fingerprint> fingerprints) {
  if (fingerprints.empty()) throw ArgumentError("no fingerprints to match against");
  PrnuPrediction p;
  double best = 0.0;
  for (const auto& f : fingerprints) {
    const double rho = normalized_correlation(query_residual, f.residual);
    p.correlations[f.class_label] = rho;
    if (p.label.empty() || rho > best || (rho == best && f.class_label < p.label)) {
      best = rho;
      p.label = f.class_label;
    }
  }
  return p;
}

void Fingerprint::save(const std::filesystem::path& path) const {
  const nlohmann::json header{{"format", "genclass-fingerprint"},
                              {"class_label", class_label},
                              {"k", k},
                              {"denoiser_id", denoiser_id},
                              {"height", residual.rows()},
                              {"width", residual.cols()}};
  const std::string text = header.dump();
  if (!path.parent_path().empty()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ArgumentError("cannot write " + path.string());
  out.write(kMagic, sizeof(kMagic));
  write_u64_le(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  std::vector<float> raster(residual.data(), residual.data() + residual.size());
  write_f32_le(out, raster);
}

Fingerprint Fingerprint::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArgumentError("cannot open " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || !std::equal(magic, magic + 8, kMagic)) throw FormatError(path.string() + " is not a fingerprint file");
  const std::uint64_t len = read_u64_le(in);
  if (len > (1u << 20)) throw FormatError("implausible fingerprint header length");
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("bad fingerprint header: ") + e.what());
  }
  Fingerprint f;
  f.class_label = header.at("class_label").get<std::string>();
  f.k = header.at("k").get<int>();
  f.denoiser_id = header.at("denoiser_id").get<std::string>();
  const auto h = header.value("height", static_cast<Eigen::Index>(kInputSize));
  const auto w = header.value("width", static_cast<Eigen::Index>(kInputSize));
  std::vector<float> raster(static_cast<std::size_t>(h * w));
  read_f32_le(in, raster);
  if (!in) throw FormatError("truncated fingerprint raster in " + path.string());
  f.residual = Eigen::Map<const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(raster.data(), h, w)
                   .cast<double>();
  return f;
}

}  // namespace genclass::prnu
