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

#include "genclass/til.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include <nlohmann/json.hpp>

#include "genclass/errors.hpp"
#include "genclass/srm.hpp"
#include "genclass/util.hpp"

namespace genclass::til {

namespace fs = std::filesystem;

bool TemplateLibrary::contains(std::string_view label) const {
  return std::any_of(entries_.begin(), entries_.end(), [&](const TemplateEntry& e) { return e.class_label == label; });
}

std::vector<std::string> TemplateLibrary::labels() const {
  std::vector<std::string> out;
  for (const auto& e : entries_) out.push_back(e.class_label);
  return out;
}

TemplateLibrary TemplateLibrary::with_entry(TemplateEntry entry) const {
  if (contains(entry.class_label)) throw DuplicateClassError("class '" + entry.class_label + "' already in library");
  if (static_cast<int>(entry.embedding.size()) != dim_)
    throw ShapeError("template embedding has dimension " + std::to_string(entry.embedding.size()) + ", library uses " +
                     std::to_string(dim_));
  TemplateLibrary out = *this;
  out.entries_.push_back(std::move(entry));
  return out;
}

Prediction TemplateLibrary::classify(std::span<const float> query) const {
  if (entries_.empty()) throw EmptyLibraryError("template library is empty");
  if (static_cast<int>(query.size()) != dim_)
    throw ShapeError("query dimension " + std::to_string(query.size()) + " != library dimension " + std::to_string(dim_));
  Prediction p;
  double best = 0.0;
  for (const auto& e : entries_) {
    double s = 0.0;
    for (int k = 0; k < dim_; ++k) {
      const double d = static_cast<double>(query[k]) - static_cast<double>(e.embedding[k]);
      s += d * d;
    }
    const double dist = std::sqrt(s);
    p.distances[e.class_label] = dist;
    if (p.label.empty() || dist < best || (dist == best && e.class_label < p.label)) {
      best = dist;
      p.label = e.class_label;
    }
  }
  return p;
}

std::vector<Prediction> TemplateLibrary::classify_batch(const EmbeddingMatrix& queries) const {
  std::vector<Prediction> out;
  out.reserve(static_cast<std::size_t>(queries.rows()));
  for (Eigen::Index i = 0; i < queries.rows(); ++i)
    out.push_back(classify(std::span<const float>(queries.row(i).data(), static_cast<std::size_t>(queries.cols()))));
  return out;
}

void TemplateLibrary::save(const fs::path& path) const {
  fs::path sidecar = path;
  sidecar += ".bin";
  nlohmann::json j;
  j["format"] = "genclass-til";
  j["model_version"] = model_version_;
  j["created_seed"] = created_seed_;
  j["embedding_dim"] = dim_;
  j["embedding_file"] = sidecar.filename().string();
  auto arr = nlohmann::json::array();
  std::size_t offset = 0;
  for (const auto& e : entries_) {
    arr.push_back({{"label", e.class_label}, {"source_image_id", e.source_image_id}, {"embedding_file_offset", offset}});
    offset += static_cast<std::size_t>(dim_) * sizeof(float);
  }
  j["entries"] = std::move(arr);
  write_text_file(path, j.dump(2) + "\n");
  std::ofstream out(sidecar, std::ios::binary);
  if (!out) throw ArgumentError("cannot write " + sidecar.string());
  for (const auto& e : entries_) write_f32_le(out, e.embedding);
}

TemplateLibrary TemplateLibrary::load(const fs::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::parse_error& ex) {
    throw FormatError("cannot parse template library " + path.string() + ": " + ex.what());
  }
  TemplateLibrary til(j.at("model_version").get<std::string>(), j.at("created_seed").get<std::uint64_t>(),
                      j.value("embedding_dim", 512));
  const fs::path sidecar = path.parent_path() / j.value("embedding_file", path.filename().string() + ".bin");
  std::ifstream in(sidecar, std::ios::binary);
  if (!in) throw FormatError("missing embedding sidecar " + sidecar.string());
  for (const auto& e : j.at("entries")) {
    TemplateEntry entry;
    entry.class_label = e.at("label").get<std::string>();
    entry.source_image_id = e.value("source_image_id", std::string());
    entry.embedding.resize(static_cast<std::size_t>(til.dim_));
    in.seekg(static_cast<std::streamoff>(e.at("embedding_file_offset").get<std::size_t>()));
    read_f32_le(in, entry.embedding);
    til = til.with_entry(std::move(entry));
  }
  return til;
}

std::vector<ManifestEntry> select_templates(const DatasetManifest& manifest, std::uint64_t seed) {
  std::vector<ManifestEntry> out;
  for (int c = 0; c < manifest.num_classes(); ++c) {
    auto pool = manifest.select(c, Split::kTrain);
    if (pool.empty()) throw EmptyClassError("class '" + manifest.classes[c] + "' has no training images");
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(c), 0x7117u};
    std::mt19937_64 rng(seq);
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    out.push_back(pool[pick(rng)]);
  }
  return out;
}

namespace {

std::vector<float> embed_one(EmbeddingModel& model, const ImageTensor& image) {
  const auto residual = srm::srm_residuals(image);
  const srm::ResidualTensor* ptr = &residual;
  auto batch = make_batch<float>(std::span<const srm::ResidualTensor* const>(&ptr, 1));
  const auto emb = model.embed(batch, nn::Mode::kInference);
  return {emb.data(), emb.data() + emb.cols()};
}

}  // namespace

TemplateLibrary build_til(EmbeddingModel& model, const DatasetManifest& manifest, std::uint64_t seed) {
  TemplateLibrary til(model.version(), seed, model.config().embedding_dim);
  const auto chosen = select_templates(manifest, seed);
  for (std::size_t c = 0; c < chosen.size(); ++c) {
    const auto image = load_and_preprocess(manifest.resolve(chosen[c]), manifest.target_size);
    til = til.with_entry({manifest.classes[c], embed_one(model, image), chosen[c].path});
  }
  return til;
}

TemplateLibrary add_class(const TemplateLibrary& til, const std::string& class_label, const ImageTensor& image,
                          EmbeddingModel& model, const std::string& source_image_id) {
  if (til.contains(class_label)) throw DuplicateClassError("class '" + class_label + "' already in library");
  if (model.version() != til.model_version())
    throw VersionError("library was built with model " + til.model_version() + ", got " + model.version());
  return til.with_entry({class_label, embed_one(model, image), source_image_id});
}

}  // namespace genclass::til
