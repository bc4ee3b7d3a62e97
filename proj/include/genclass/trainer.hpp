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

// The three training stages: center-loss + cross-entropy training, triplet
// fine-tuning on a few images of new classes, and the binary detector.

#ifndef GENCLASS_TRAINER_HPP
#define GENCLASS_TRAINER_HPP

#include <cstdint>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "genclass/dataset.hpp"
#include "genclass/errors.hpp"
#include "genclass/losses.hpp"
#include "genclass/model.hpp"

namespace genclass {

struct TrainConfig {
  int epochs = 10;
  double initial_lr = 0.001;
  double lr_decay_per_epoch = 0.8;
  int batch_size = 128;
  std::string optimizer = "adam_default";
  losses::LossConfig loss;
  ModelConfig model;  // num_classes is filled from the training data
  bool class_balanced = true;
  std::uint64_t seed = 0;

  void validate() const;
  double lr_at_epoch(int epoch) const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
  std::string hash() const;
};

struct FinetuneConfig {
  int new_class_count = 20;        // k images per new class
  int support_per_old_class = 20;
  int epochs = 5;
  double lr = 0.0001;
  int batch_size = 128;
  double margin = 0.2;
  losses::MiningStrategy mining_strategy = losses::MiningStrategy::kAuto;
  std::uint64_t seed = 0;

  void validate() const;
  nlohmann::json to_json() const;
  static FinetuneConfig from_json(const nlohmann::json& j);
  std::string hash() const;
};

/// One optimizer step. Training steps fill ce/center; fine-tuning steps
/// fill triplet/active_triplets.
struct StepRecord {
  bool finetune = false;
  int epoch = 0;
  long step = 0;
  double lr = 0.0;
  double ce = 0.0;
  double center = 0.0;
  double total = 0.0;
  double triplet = 0.0;
  std::size_t active_triplets = 0;

  nlohmann::json to_json() const;
};

struct TrainHooks {
  std::function<void(const StepRecord&)> on_step;
  std::function<void(const Checkpoint&)> on_epoch;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<StepRecord> log;
  long center_updates = 0;
};

class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, Checkpoint last_good) : Error(what), last_good_(std::move(last_good)) {}
  const char* name() const noexcept override { return "DivergenceError"; }
  const Checkpoint& last_good() const { return last_good_; }

 private:
  Checkpoint last_good_;
};

/// Draws batches with ceil(batch / C) samples per present class, interleaved
/// and truncated; each class cycles through its own reshuffled order.
class BalancedSampler {
 public:
  BalancedSampler(std::span<const int> labels, std::uint64_t seed);
  std::vector<std::size_t> next_batch(int batch_size);

 private:
  std::vector<std::vector<std::size_t>> by_class_;
  std::vector<std::size_t> cursor_;
  std::mt19937_64 rng_;
};

inline long steps_per_epoch(std::size_t samples, int batch_size) {
  return static_cast<long>((samples + batch_size - 1) / batch_size);
}

TrainResult train(const TrainConfig& config, const DatasetManifest& manifest, const TrainHooks& hooks = {},
                  int workers = 1);

/// Training on already-loaded data; labels index into `classes`.
TrainResult train_on(const TrainConfig& config, const ResidualDataset& data, const std::vector<std::string>& classes,
                     const TrainHooks& hooks = {});

struct NewClassImages {
  std::string label;
  std::vector<srm::ResidualTensor> residuals;
  std::vector<std::string> ids;
};

/// Seeded support images for every known class of `checkpoint` (trained or
/// fine-tuned) that `manifest` contains and `exclude` does not. `labels`
/// index into `classes`.
struct SupportSelection {
  std::vector<std::string> classes;
  std::vector<ManifestEntry> entries;
  std::vector<int> labels;
};
SupportSelection select_support(const Checkpoint& checkpoint, const DatasetManifest& manifest,
                                const std::set<std::string>& exclude, const FinetuneConfig& config);

/// Builds the pool (all images of `new_classes` plus support images per
/// known class of `old_manifest`), mines triplets and optimizes the triplet
/// loss alone. Class centers are left untouched.
TrainResult finetune(const Checkpoint& checkpoint, const std::vector<NewClassImages>& new_classes,
                     const DatasetManifest& old_manifest, const FinetuneConfig& config, const TrainHooks& hooks = {},
                     int workers = 1);

/// Fine-tuning on an explicit pool; labels index into `pool_classes`.
TrainResult finetune_on(const Checkpoint& checkpoint, const ResidualDataset& pool,
                        const std::vector<std::string>& pool_classes, const std::vector<std::string>& new_labels,
                        const FinetuneConfig& config, const TrainHooks& hooks = {});

/// Real vs. pooled fakes with a single sigmoid output (label 1 = fake).
TrainResult train_binary(const TrainConfig& config, const DatasetManifest& manifest, const std::string& real_class,
                         const std::vector<std::string>& fake_classes, const TrainHooks& hooks = {}, int workers = 1);
TrainResult train_binary_on(const TrainConfig& config, const ResidualDataset& data, const TrainHooks& hooks = {});

/// Probability of "fake" per sample from a binary checkpoint's model.
std::vector<double> fake_scores(const EmbeddingModel& model, std::span<const srm::ResidualTensor> residuals,
                                int workers = 1);

}  // namespace genclass

#endif  // GENCLASS_TRAINER_HPP
