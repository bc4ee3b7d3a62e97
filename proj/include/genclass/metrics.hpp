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

// AUROC / Top-1 primitives and the evaluation protocols built on them.

#ifndef GENCLASS_METRICS_HPP
#define GENCLASS_METRICS_HPP

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "genclass/dataset.hpp"
#include "genclass/imaging.hpp"
#include "genclass/model.hpp"
#include "genclass/prnu.hpp"
#include "genclass/til.hpp"
#include "genclass/trainer.hpp"

namespace genclass::metrics {

/// Mann-Whitney statistic with half credit for ties; label 1 is positive.
double auroc(std::span<const double> scores, std::span<const int> labels);

double top1_accuracy(std::span<const std::string> predictions, std::span<const std::string> truth);

enum class Protocol { kBinary, kCloseSet, kOpenSet, kScalability, kPrnuBaseline };
std::string_view to_string(Protocol p);

/// One evaluated test item. `condition` names the table row it belongs to;
/// binary records carry the score and "0"/"1" truth.
struct SampleRecord {
  std::string condition;
  std::string id;
  std::string truth;
  std::string prediction;
  double score = 0.0;

  nlohmann::json to_json() const;
  friend bool operator==(const SampleRecord&, const SampleRecord&) = default;
};

struct ReportRow {
  std::string name;
  std::vector<std::optional<double>> values;  // empty cells render as "-"
};

struct EvalReport {
  Protocol protocol = Protocol::kCloseSet;
  std::string config_hash;
  std::uint64_t seed = 0;
  nlohmann::json config;
  std::vector<std::string> columns;
  std::vector<ReportRow> rows;
  std::map<std::string, double> per_class;
  std::map<std::string, double> aggregate;
  std::vector<SampleRecord> records;

  nlohmann::json to_json() const;
  static EvalReport from_json(const nlohmann::json& j);
  std::string table() const;
  std::string csv() const;
  /// Writes report.json, report.txt and report.csv into `dir`.
  void save(const std::filesystem::path& dir) const;
};

/// Train and test residuals of a manifest, loaded once; labels index
/// manifest.classes.
struct ExperimentData {
  DatasetManifest manifest;
  ResidualDataset train;
  ResidualDataset test;
  std::unordered_map<std::string, std::size_t> train_index;

  static ExperimentData load(const DatasetManifest& manifest, int workers = 1);
  const srm::ResidualTensor& train_residual(const std::string& path) const;
  /// Items of `split` whose class is in `labels`, relabeled to that order.
  ResidualDataset restrict(Split split, const std::vector<std::string>& labels) const;
};

/// TIL over `labels` with templates chosen by til::select_templates on the
/// corresponding manifest subset.
til::TemplateLibrary build_til_from_data(EmbeddingModel& model, const ExperimentData& data,
                                         const std::vector<std::string>& labels, std::uint64_t seed, int workers = 1);

/// Nearest-template label for every residual.
std::vector<std::string> classify_residuals(EmbeddingModel& model, const til::TemplateLibrary& til,
                                            std::span<const srm::ResidualTensor> residuals, int workers = 1);

struct CloseSetOptions {
  std::uint64_t til_seed = 0;
  int workers = 1;
};

EvalReport eval_close_set(const Checkpoint& checkpoint, const ExperimentData& data, const CloseSetOptions& options);

struct BinaryOptions {
  std::string real_class;
  std::vector<std::string> fake_classes;  // empty: every other class
  int workers = 1;
};

EvalReport eval_binary(const Checkpoint& checkpoint, const ExperimentData& data, const BinaryOptions& options);

struct OpenSetOptions {
  TrainConfig train;
  FinetuneConfig finetune;
  std::vector<int> finetune_sizes{5, 10, 20, 40, 80};
  std::uint64_t til_seed = 0;
  int workers = 1;
};

/// Leave-one-out over `held_out` classes. For each, trains on the remaining
/// classes, adds the held-out template to the TIL and reports
/// (others, held-out) Top-1 before fine-tuning (k = 0) and after a fresh
/// fine-tune from the base checkpoint for every k.
EvalReport eval_open_set(const ExperimentData& data, const std::vector<std::string>& held_out,
                         const OpenSetOptions& options);

struct ScalabilityOptions {
  TrainConfig train;
  FinetuneConfig finetune;  // new_class_count is k
  std::uint64_t til_seed = 0;
  int workers = 1;
};

/// Trains on `base_classes`, then adds each class of `new_class_order` with
/// a chained fine-tune on k images of every class added so far.
EvalReport eval_scalability(const ExperimentData& data, const std::vector<std::string>& base_classes,
                            const std::vector<std::string>& new_class_order, const ScalabilityOptions& options);

struct PrnuOptions {
  std::vector<int> ks{1, 5, 10};
  std::uint64_t seed = 0;
  int workers = 1;
};

/// PRNU fingerprints from k training images per class, evaluated on the
/// manifest's test split.
EvalReport eval_prnu(const DatasetManifest& manifest, const PrnuOptions& options,
                     const prnu::Denoiser& denoiser = prnu::default_denoiser());

/// Matches every test image against precomputed fingerprints.
EvalReport eval_prnu_fingerprints(const DatasetManifest& manifest, std::span<const prnu::Fingerprint> fingerprints,
                                  int workers = 1, const prnu::Denoiser& denoiser = prnu::default_denoiser());

/// Fingerprints from k seeded training images of every manifest class.
std::vector<prnu::Fingerprint> build_class_fingerprints(const DatasetManifest& manifest, int k, std::uint64_t seed,
                                                        const prnu::Denoiser& denoiser = prnu::default_denoiser());

/// Seeded k-subset of a class's training entries (k larger than the class
/// raises ConfigError).
std::vector<ManifestEntry> pick_train_images(const DatasetManifest& manifest, const std::string& label, int k,
                                             std::uint64_t seed);

}  // namespace genclass::metrics

#endif  // GENCLASS_METRICS_HPP
