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

// Image ingestion: decoding, center-crop + bilinear resampling to the network
// input size, and dataset manifests with deterministic train/test splits.

#ifndef GENCLASS_IMAGING_HPP
#define GENCLASS_IMAGING_HPP

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace genclass {

inline constexpr int kInputSize = 128;

enum class ValueRange { kRaw0To255, kUnit0To1 };

std::string_view to_string(ValueRange r);

/// Interleaved H x W x C pixels.
struct ImageTensor {
  int height = 0;
  int width = 0;
  int channels = 3;
  ValueRange value_range = ValueRange::kRaw0To255;
  std::vector<float> pixels;

  ImageTensor() = default;
  ImageTensor(int h, int w, int c = 3, ValueRange range = ValueRange::kRaw0To255, float fill = 0.0f)
      : height(h), width(w), channels(c), value_range(range),
        pixels(static_cast<std::size_t>(h) * w * c, fill) {}

  float& at(int y, int x, int c) { return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c]; }
  float at(int y, int x, int c) const { return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c]; }

  /// True when every pixel lies inside the declared value_range.
  bool in_range() const;
};

/// Decodes a PNG/JPEG file to an RGB tensor in raw_0_255. Grayscale is
/// replicated across channels; an alpha channel is dropped.
ImageTensor decode_image(const std::filesystem::path& path);

/// Writes an RGB raw_0_255 tensor as an 8-bit image (rounded, clamped).
void write_image(const std::filesystem::path& path, const ImageTensor& image);

/// Largest centered square crop.
ImageTensor center_crop(const ImageTensor& image);

/// Bilinear resampling with half-pixel centers and edge clamping.
ImageTensor resize_bilinear(const ImageTensor& image, int out_height, int out_width);

/// center_crop followed by resize_bilinear to target_size x target_size.
ImageTensor preprocess(const ImageTensor& image, int target_size);

ImageTensor load_and_preprocess(const std::filesystem::path& path, int target_size = kInputSize);

enum class Split { kTrain, kTest };

std::string_view to_string(Split s);
Split parse_split(std::string_view s);

struct ManifestEntry {
  std::string path;  // relative to the manifest root
  int class_index = 0;
  Split split = Split::kTrain;
};

struct SplitCounts {
  int train = 0;
  int test = 0;
};

struct DatasetManifest {
  std::vector<std::string> classes;  // index 0 is the real-image class
  std::vector<ManifestEntry> entries;
  std::uint64_t seed = 0;
  std::filesystem::path root;
  std::string resampler = "bilinear";
  int target_size = kInputSize;
  std::vector<std::string> warnings;

  int num_classes() const { return static_cast<int>(classes.size()); }
  int class_index(std::string_view label) const;  // ManifestError if absent
  bool has_class(std::string_view label) const;

  std::vector<ManifestEntry> select(int class_index, Split split) const;
  std::vector<ManifestEntry> select(Split split) const;
  std::size_t count(int class_index, Split split) const;
  std::map<std::string, SplitCounts> split_counts() const;

  std::filesystem::path resolve(const ManifestEntry& e) const { return root / e.path; }

  /// Manifest restricted to `labels` (in the given order) with contiguous
  /// re-indexing.
  DatasetManifest subset(const std::vector<std::string>& labels) const;

  nlohmann::json to_json() const;
  static DatasetManifest from_json(const nlohmann::json& j);

  void save(const std::filesystem::path& path) const;
  /// Loads a manifest; a relative or missing root resolves against
  /// `root_override` (when given) and then the manifest's own directory.
  static DatasetManifest load(const std::filesystem::path& path,
                              const std::optional<std::filesystem::path>& root_override = std::nullopt);
};

struct ManifestOptions {
  SplitCounts default_split{10000, 100};
  std::map<std::string, SplitCounts> per_class;  // overrides default_split
  std::uint64_t seed = 0;
  /// Directory name of the real-image class; placed at index 0. When empty,
  /// classes are taken in lexicographic order.
  std::string real_class;
};

/// Scans `<root>/<class>/*.{png,jpg,jpeg}` and draws disjoint seeded splits.
DatasetManifest build_manifest(const std::filesystem::path& root, const ManifestOptions& options);

}  // namespace genclass

#endif  // GENCLASS_IMAGING_HPP
