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

// Template library: one reference embedding per class, nearest-template
// classification by L2 distance. Libraries are immutable values; adding a
// class yields a new library.

#ifndef GENCLASS_TIL_HPP
#define GENCLASS_TIL_HPP

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "genclass/imaging.hpp"
#include "genclass/model.hpp"

namespace genclass::til {

struct TemplateEntry {
  std::string class_label;
  std::vector<float> embedding;
  std::string source_image_id;
};

struct Prediction {
  std::string label;
  std::map<std::string, double> distances;  // unsquared L2 per class

  double best_distance() const { return distances.at(label); }
};

class TemplateLibrary {
 public:
  TemplateLibrary() = default;
  TemplateLibrary(std::string model_version, std::uint64_t created_seed, int dim = 512)
      : model_version_(std::move(model_version)), created_seed_(created_seed), dim_(dim) {}

  const std::vector<TemplateEntry>& entries() const { return entries_; }
  const std::string& model_version() const { return model_version_; }
  std::uint64_t created_seed() const { return created_seed_; }
  int dim() const { return dim_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  bool contains(std::string_view label) const;
  std::vector<std::string> labels() const;

  /// Copy with one more entry. DuplicateClassError / ShapeError.
  TemplateLibrary with_entry(TemplateEntry entry) const;

  /// Nearest template; exact distance ties go to the lexicographically
  /// smallest label.
  Prediction classify(std::span<const float> query) const;
  std::vector<Prediction> classify_batch(const EmbeddingMatrix& queries) const;

  /// Writes `<path>` (JSON) and a float32 sidecar `<path>.bin`.
  void save(const std::filesystem::path& path) const;
  static TemplateLibrary load(const std::filesystem::path& path);

 private:
  std::string model_version_;
  std::uint64_t created_seed_ = 0;
  int dim_ = 512;
  std::vector<TemplateEntry> entries_;
};

/// The train entry chosen as template for each manifest class (seeded).
std::vector<ManifestEntry> select_templates(const DatasetManifest& manifest, std::uint64_t seed);

TemplateLibrary build_til(EmbeddingModel& model, const DatasetManifest& manifest, std::uint64_t seed);

/// Requires model.version() == til.model_version().
TemplateLibrary add_class(const TemplateLibrary& til, const std::string& class_label, const ImageTensor& image,
                          EmbeddingModel& model, const std::string& source_image_id = "");

}  // namespace genclass::til

#endif  // GENCLASS_TIL_HPP
