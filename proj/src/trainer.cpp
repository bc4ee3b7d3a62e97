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

#include "genclass/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "genclass/nn/adam.hpp"
#include "genclass/util.hpp"

namespace genclass {

namespace {

std::mt19937_64 stream(std::uint64_t seed, std::uint32_t id) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), id};
  return std::mt19937_64(seq);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint32_t id) { return stream(seed, id)(); }

enum StreamId : std::uint32_t { kInitStream = 1, kSamplerStream = 2, kSupportStream = 3, kFinetuneStream = 4 };

}  // namespace

// ---------------------------------------------------------------------------
// Configs

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be >= 1, got " + std::to_string(epochs));
  if (batch_size < 2) throw ConfigError("batch_size must be >= 2, got " + std::to_string(batch_size));
  if (!(lr_decay_per_epoch > 0.0 && lr_decay_per_epoch <= 1.0)) throw ConfigError("lr_decay_per_epoch must lie in (0, 1]");
  if (!(initial_lr > 0.0) || !std::isfinite(initial_lr)) throw ConfigError("initial_lr must be positive");
  if (optimizer != "adam_default") throw ConfigError("unsupported optimizer '" + optimizer + "'");
  loss.validate();
}

double TrainConfig::lr_at_epoch(int epoch) const { return initial_lr * std::pow(lr_decay_per_epoch, epoch); }

nlohmann::json TrainConfig::to_json() const {
  return {{"epochs", epochs},
          {"initial_lr", initial_lr},
          {"lr_decay_per_epoch", lr_decay_per_epoch},
          {"batch_size", batch_size},
          {"optimizer", optimizer},
          {"loss", loss.to_json()},
          {"model", model.to_json()},
          {"class_balanced", class_balanced},
          {"seed", seed}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.epochs = j.value("epochs", c.epochs);
  c.initial_lr = j.value("initial_lr", c.initial_lr);
  c.lr_decay_per_epoch = j.value("lr_decay_per_epoch", c.lr_decay_per_epoch);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.optimizer = j.value("optimizer", c.optimizer);
  if (j.contains("loss")) c.loss = losses::LossConfig::from_json(j["loss"]);
  if (j.contains("model")) c.model = ModelConfig::from_json(j["model"]);
  c.class_balanced = j.value("class_balanced", c.class_balanced);
  c.seed = j.value("seed", c.seed);
  return c;
}

std::string TrainConfig::hash() const { return hash_hex(to_json().dump()); }

void FinetuneConfig::validate() const {
  if (new_class_count < 2) throw ConfigError("fine-tuning needs at least 2 images of the new class, got " +
                                             std::to_string(new_class_count));
  if (support_per_old_class < 0) throw ConfigError("support_per_old_class must be >= 0");
  if (epochs < 1) throw ConfigError("fine-tune epochs must be >= 1");
  if (batch_size < 2) throw ConfigError("batch_size must be >= 2");
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("fine-tune lr must be positive");
  if (!(margin >= 0.0) || !std::isfinite(margin)) throw ConfigError("margin must be >= 0");
}

nlohmann::json FinetuneConfig::to_json() const {
  return {{"new_class_count", new_class_count},
          {"support_per_old_class", support_per_old_class},
          {"epochs", epochs},
          {"lr", lr},
          {"batch_size", batch_size},
          {"margin", margin},
          {"mining_strategy", std::string(losses::to_string(mining_strategy))},
          {"seed", seed}};
}

FinetuneConfig FinetuneConfig::from_json(const nlohmann::json& j) {
  FinetuneConfig c;
  c.new_class_count = j.value("new_class_count", c.new_class_count);
  c.support_per_old_class = j.value("support_per_old_class", c.support_per_old_class);
  c.epochs = j.value("epochs", c.epochs);
  c.lr = j.value("lr", c.lr);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.margin = j.value("margin", c.margin);
  c.mining_strategy = losses::parse_mining_strategy(j.value("mining_strategy", std::string("auto")));
  c.seed = j.value("seed", c.seed);
  return c;
}

std::string FinetuneConfig::hash() const { return hash_hex(to_json().dump()); }

nlohmann::json StepRecord::to_json() const {
  nlohmann::json j{{"epoch", epoch}, {"step", step}, {"lr", lr}};
  if (finetune) {
    j["triplet"] = triplet;
    j["active_triplets"] = active_triplets;
    j["total"] = total;
  } else {
    j["ce"] = ce;
    j["center"] = center;
    j["total"] = total;
  }
  return j;
}

// ---------------------------------------------------------------------------
// Sampling

BalancedSampler::BalancedSampler(std::span<const int> labels, std::uint64_t seed) : rng_(seed) {
  int classes = 0;
  for (int y : labels) classes = std::max(classes, y + 1);
  std::vector<std::vector<std::size_t>> all(classes);
  for (std::size_t i = 0; i < labels.size(); ++i) all[labels[i]].push_back(i);
  for (auto& v : all)
    if (!v.empty()) by_class_.push_back(std::move(v));
  for (auto& v : by_class_) std::shuffle(v.begin(), v.end(), rng_);
  cursor_.assign(by_class_.size(), 0);
}

std::vector<std::size_t> BalancedSampler::next_batch(int batch_size) {
  const std::size_t c = by_class_.size();
  const std::size_t per_class = (static_cast<std::size_t>(batch_size) + c - 1) / c;
  std::vector<std::size_t> out;
  out.reserve(per_class * c);
  for (std::size_t r = 0; r < per_class; ++r)
    for (std::size_t k = 0; k < c; ++k) {
      auto& members = by_class_[k];
      if (cursor_[k] == members.size()) {
        std::shuffle(members.begin(), members.end(), rng_);
        cursor_[k] = 0;
      }
      out.push_back(members[cursor_[k]++]);
    }
  out.resize(static_cast<std::size_t>(batch_size));
  return out;
}

namespace {

/// Epoch-wise permutation used when class balancing is disabled.
class ShuffledSampler {
 public:
  ShuffledSampler(std::size_t n, std::uint64_t seed) : order_(n), rng_(seed) {
    std::iota(order_.begin(), order_.end(), 0);
    std::shuffle(order_.begin(), order_.end(), rng_);
  }
  std::vector<std::size_t> next_batch(int batch_size) {
    std::vector<std::size_t> out;
    for (int i = 0; i < batch_size && pos_ < order_.size(); ++i) out.push_back(order_[pos_++]);
    if (pos_ == order_.size()) {
      std::shuffle(order_.begin(), order_.end(), rng_);
      pos_ = 0;
    }
    return out;
  }

 private:
  std::vector<std::size_t> order_;
  std::size_t pos_ = 0;
  std::mt19937_64 rng_;
};

struct Batch {
  nn::Tensor<float> input;
  std::vector<int> labels;
};

Batch gather(const ResidualDataset& data, const std::vector<std::size_t>& idx) {
  std::vector<const srm::ResidualTensor*> ptrs;
  Batch b;
  for (std::size_t i : idx) {
    ptrs.push_back(&data.residuals[i]);
    b.labels.push_back(data.labels[i]);
  }
  b.input = make_batch<float>(ptrs);
  return b;
}

Checkpoint snapshot(EmbeddingModel& model, const std::vector<std::string>& classes, const losses::ClassCenters& centers,
                    const std::string& config_hash, int epoch, const std::vector<std::string>& lineage) {
  Checkpoint ck = Checkpoint::capture(model);
  ck.classes = classes;
  ck.centers = centers.centers.cast<float>().cast<double>();
  ck.config_hash = config_hash;
  ck.epoch = epoch;
  ck.lineage = lineage;
  return ck;
}

void check_class_coverage(const ResidualDataset& data, std::size_t num_classes) {
  std::vector<std::size_t> counts(num_classes, 0);
  for (int y : data.labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= num_classes) throw LabelError("training label out of range");
    ++counts[y];
  }
  for (std::size_t c = 0; c < num_classes; ++c)
    if (counts[c] == 0) throw EmptyClassError("class index " + std::to_string(c) + " has no training images");
}

struct Sampler {
  Sampler(const ResidualDataset& data, bool balanced, std::uint64_t seed) {
    if (balanced)
      balanced_.emplace(data.labels, seed);
    else
      shuffled_.emplace(data.size(), seed);
  }
  std::vector<std::size_t> next(int batch) { return balanced_ ? balanced_->next_batch(batch) : shuffled_->next_batch(batch); }

  std::optional<BalancedSampler> balanced_;
  std::optional<ShuffledSampler> shuffled_;
};

}  // namespace

// ---------------------------------------------------------------------------
// Training

TrainResult train_on(const TrainConfig& config, const ResidualDataset& data, const std::vector<std::string>& classes,
                     const TrainHooks& hooks) {
  config.validate();
  if (classes.size() < 2) throw ConfigError("training needs at least 2 classes, got " + std::to_string(classes.size()));
  check_class_coverage(data, classes.size());

  ModelConfig mc = config.model;
  mc.num_classes = static_cast<int>(classes.size());
  EmbeddingModel model(mc, derive_seed(config.seed, kInitStream));
  nn::Adam<float> adam(model.parameters(), config.initial_lr);
  losses::ClassCenters centers(static_cast<int>(classes.size()), mc.embedding_dim, config.loss.center_update_rate);
  Sampler sampler(data, config.class_balanced, derive_seed(config.seed, kSamplerStream));

  const std::string hash = config.hash();
  const std::vector<std::string> lineage{"train:" + hash};
  TrainResult result;
  Checkpoint last_good = snapshot(model, classes, centers, hash, 0, lineage);
  const long steps = steps_per_epoch(data.size(), config.batch_size);
  const double lambda = config.loss.center_weight;
  long global_step = 0;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr = config.lr_at_epoch(epoch);
    adam.set_lr(lr);
    for (long s = 0; s < steps; ++s) {
      Batch b = gather(data, sampler.next(config.batch_size));
      model.zero_grad();
      auto out = model.forward(b.input, nn::Mode::kTrain);
      const losses::Matrix emb = out.embedding.cast<double>();
      const auto ce = losses::cross_entropy_with_grad(out.logits.cast<double>(), b.labels);
      const auto cl = losses::center_loss_with_grad(emb, b.labels, centers);
      const double total = ce.value + lambda * cl.value;
      if (!std::isfinite(total))
        throw DivergenceError("non-finite loss at epoch " + std::to_string(epoch) + " step " + std::to_string(s),
                              last_good);
      const nn::Matrix<float> d_logits = ce.grad.cast<float>();
      const nn::Matrix<float> d_emb = (lambda * cl.grad).cast<float>();
      model.backward(d_emb, &d_logits);
      adam.step();
      centers = losses::update_centers(centers, emb, b.labels);
      ++result.center_updates;

      StepRecord rec;
      rec.epoch = epoch;
      rec.step = global_step++;
      rec.lr = lr;
      rec.ce = ce.value;
      rec.center = cl.value;
      rec.total = total;
      result.log.push_back(rec);
      if (hooks.on_step) hooks.on_step(rec);
    }
    last_good = snapshot(model, classes, centers, hash, epoch + 1, lineage);
    if (hooks.on_epoch) hooks.on_epoch(last_good);
  }
  result.checkpoint = std::move(last_good);
  return result;
}

TrainResult train(const TrainConfig& config, const DatasetManifest& manifest, const TrainHooks& hooks, int workers) {
  config.validate();
  if (manifest.num_classes() < 2) throw ConfigError("training needs at least 2 classes");
  for (int c = 0; c < manifest.num_classes(); ++c)
    if (manifest.count(c, Split::kTrain) == 0)
      throw EmptyClassError("class '" + manifest.classes[c] + "' has no training images");
  const ResidualDataset data = load_split(manifest, Split::kTrain, workers);
  return train_on(config, data, manifest.classes, hooks);
}

// ---------------------------------------------------------------------------
// Fine-tuning

TrainResult finetune_on(const Checkpoint& checkpoint, const ResidualDataset& pool,
                        const std::vector<std::string>& pool_classes, const std::vector<std::string>& new_labels,
                        const FinetuneConfig& config, const TrainHooks& hooks) {
  config.validate();
  if (pool.size() == 0) throw EmptyTripletError("empty fine-tuning pool");
  for (int y : pool.labels)
    if (y < 0 || static_cast<std::size_t>(y) >= pool_classes.size()) throw LabelError("pool label out of range");
  if (losses::all_valid_triplet_count(pool.labels) == 0)
    throw EmptyTripletError("fine-tuning pool admits no (anchor, positive, negative) triple");

  EmbeddingModel model = checkpoint.restore();
  nn::Adam<float> adam(model.parameters(), config.lr);
  BalancedSampler sampler(pool.labels, derive_seed(config.seed, kFinetuneStream));
  std::vector<std::size_t> whole(pool.size());
  std::iota(whole.begin(), whole.end(), 0);
  const bool full_batch = pool.size() <= static_cast<std::size_t>(config.batch_size);
  const long steps = steps_per_epoch(pool.size(), config.batch_size);

  std::string tag = "finetune:";
  for (std::size_t i = 0; i < new_labels.size(); ++i) tag += (i ? "+" : "") + new_labels[i];
  tag += ":pool=" + std::to_string(pool.size()) + ":" + config.hash();

  TrainResult result;
  long global_step = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    for (long s = 0; s < steps; ++s) {
      Batch b = gather(pool, full_batch ? whole : sampler.next_batch(config.batch_size));
      model.zero_grad();
      const auto emb = model.embed(b.input, nn::Mode::kTrain).cast<double>().eval();
      const auto triplets = losses::mine_triplets(emb, b.labels, config.mining_strategy, config.margin);
      std::size_t active = 0;
      const auto tl = losses::pooled_triplet_loss_with_grad(emb, triplets, config.margin, &active);
      if (!std::isfinite(tl.value)) {
        Checkpoint last = checkpoint;
        throw DivergenceError("non-finite triplet loss during fine-tuning", last);
      }
      const nn::Matrix<float> d_emb = tl.grad.cast<float>();
      model.backward(d_emb, nullptr);
      adam.step();

      StepRecord rec;
      rec.finetune = true;
      rec.epoch = epoch;
      rec.step = global_step++;
      rec.lr = config.lr;
      rec.triplet = tl.value;
      rec.total = tl.value;
      rec.active_triplets = active;
      result.log.push_back(rec);
      if (hooks.on_step) hooks.on_step(rec);
    }
  }

  Checkpoint out = Checkpoint::capture(model);
  out.classes = checkpoint.classes;
  out.centers = checkpoint.centers;
  out.config_hash = checkpoint.config_hash;
  out.epoch = checkpoint.epoch;
  out.finetuned_classes = checkpoint.finetuned_classes;
  for (const auto& l : new_labels)
    if (std::find(out.classes.begin(), out.classes.end(), l) == out.classes.end() &&
        std::find(out.finetuned_classes.begin(), out.finetuned_classes.end(), l) == out.finetuned_classes.end())
      out.finetuned_classes.push_back(l);
  out.lineage = checkpoint.lineage;
  out.lineage.push_back(tag);
  if (hooks.on_epoch) hooks.on_epoch(out);
  result.checkpoint = std::move(out);
  return result;
}

SupportSelection select_support(const Checkpoint& checkpoint, const DatasetManifest& manifest,
                                const std::set<std::string>& exclude, const FinetuneConfig& config) {
  std::vector<std::string> known = checkpoint.classes;
  known.insert(known.end(), checkpoint.finetuned_classes.begin(), checkpoint.finetuned_classes.end());
  SupportSelection out;
  auto rng = stream(config.seed, kSupportStream);
  for (const auto& label : known) {
    if (exclude.count(label) || !manifest.has_class(label)) continue;
    auto entries = manifest.select(manifest.class_index(label), Split::kTrain);
    std::shuffle(entries.begin(), entries.end(), rng);
    entries.resize(std::min<std::size_t>(entries.size(), static_cast<std::size_t>(config.support_per_old_class)));
    const int idx = static_cast<int>(out.classes.size());
    out.classes.push_back(label);
    for (auto& e : entries) {
      out.entries.push_back(e);
      out.labels.push_back(idx);
    }
  }
  return out;
}

TrainResult finetune(const Checkpoint& checkpoint, const std::vector<NewClassImages>& new_classes,
                     const DatasetManifest& old_manifest, const FinetuneConfig& config, const TrainHooks& hooks,
                     int workers) {
  config.validate();
  if (new_classes.empty()) throw ConfigError("no new-class images given");
  std::set<std::string> new_set;
  for (const auto& nc : new_classes) {
    if (nc.residuals.size() < 2)
      throw ConfigError("class '" + nc.label + "' has " + std::to_string(nc.residuals.size()) +
                        " fine-tuning images; at least 2 are required");
    if (!new_set.insert(nc.label).second) throw ConfigError("class '" + nc.label + "' given twice");
  }

  const SupportSelection support = select_support(checkpoint, old_manifest, new_set, config);
  std::vector<std::string> pool_classes = support.classes;
  ResidualDataset pool = load_entries(old_manifest, support.entries, workers);
  pool.labels = support.labels;
  std::vector<std::string> new_labels;
  for (const auto& nc : new_classes) {
    const int idx = static_cast<int>(pool_classes.size());
    pool_classes.push_back(nc.label);
    new_labels.push_back(nc.label);
    for (std::size_t i = 0; i < nc.residuals.size(); ++i)
      pool.append(nc.residuals[i], idx, i < nc.ids.size() ? nc.ids[i] : nc.label + "#" + std::to_string(i));
  }
  return finetune_on(checkpoint, pool, pool_classes, new_labels, config, hooks);
}

// ---------------------------------------------------------------------------
// Binary detector

TrainResult train_binary_on(const TrainConfig& config, const ResidualDataset& data, const TrainHooks& hooks) {
  config.validate();
  check_class_coverage(data, 2);

  ModelConfig mc = config.model;
  mc.num_classes = 1;
  EmbeddingModel model(mc, derive_seed(config.seed, kInitStream));
  nn::Adam<float> adam(model.parameters(), config.initial_lr);
  Sampler sampler(data, config.class_balanced, derive_seed(config.seed, kSamplerStream));
  const std::string hash = config.hash();
  const std::vector<std::string> classes{"real", "fake"};
  const std::vector<std::string> lineage{"train-binary:" + hash};
  const losses::ClassCenters no_centers(0, mc.embedding_dim);

  TrainResult result;
  Checkpoint last_good = snapshot(model, classes, no_centers, hash, 0, lineage);
  const long steps = steps_per_epoch(data.size(), config.batch_size);
  long global_step = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr = config.lr_at_epoch(epoch);
    adam.set_lr(lr);
    for (long s = 0; s < steps; ++s) {
      Batch b = gather(data, sampler.next(config.batch_size));
      model.zero_grad();
      auto out = model.forward(b.input, nn::Mode::kTrain);
      const auto bce = losses::binary_cross_entropy_with_grad(out.logits.cast<double>(), b.labels);
      if (!std::isfinite(bce.value)) throw DivergenceError("non-finite binary loss", last_good);
      const nn::Matrix<float> d_logits = bce.grad.cast<float>();
      const nn::Matrix<float> d_emb = nn::Matrix<float>::Zero(out.embedding.rows(), out.embedding.cols());
      model.backward(d_emb, &d_logits);
      adam.step();

      StepRecord rec;
      rec.epoch = epoch;
      rec.step = global_step++;
      rec.lr = lr;
      rec.ce = bce.value;
      rec.total = bce.value;
      result.log.push_back(rec);
      if (hooks.on_step) hooks.on_step(rec);
    }
    last_good = snapshot(model, classes, no_centers, hash, epoch + 1, lineage);
    if (hooks.on_epoch) hooks.on_epoch(last_good);
  }
  result.checkpoint = std::move(last_good);
  return result;
}

TrainResult train_binary(const TrainConfig& config, const DatasetManifest& manifest, const std::string& real_class,
                         const std::vector<std::string>& fake_classes, const TrainHooks& hooks, int workers) {
  config.validate();
  if (fake_classes.empty()) throw ConfigError("binary training needs at least one fake class");
  const int real = manifest.class_index(real_class);
  std::set<int> fakes;
  for (const auto& f : fake_classes) {
    const int idx = manifest.class_index(f);
    if (idx == real) throw ConfigError("class '" + f + "' cannot be both real and fake");
    fakes.insert(idx);
  }
  std::vector<ManifestEntry> entries;
  for (const auto& e : manifest.select(Split::kTrain))
    if (e.class_index == real || fakes.count(e.class_index)) entries.push_back(e);
  ResidualDataset data = load_entries(manifest, entries, workers);
  for (auto& y : data.labels) y = (y == real) ? 0 : 1;
  return train_binary_on(config, data, hooks);
}

std::vector<double> fake_scores(const EmbeddingModel& model, std::span<const srm::ResidualTensor> residuals, int workers) {
  if (!model.has_head() || *model.config().num_classes != 1)
    throw ConfigError("fake_scores needs a binary model with a single output");
  std::vector<double> out(residuals.size());
  constexpr std::size_t kChunk = 64;
  const std::size_t chunks = (residuals.size() + kChunk - 1) / kChunk;
  const int lanes = std::max(1, std::min<int>(workers, static_cast<int>(std::max<std::size_t>(chunks, 1))));
  std::vector<EmbeddingModel> copies(lanes, model);
  parallel_for(chunks, lanes, [&](std::size_t c, int lane) {
    std::vector<const srm::ResidualTensor*> ptrs;
    for (std::size_t i = c * kChunk; i < std::min(residuals.size(), (c + 1) * kChunk); ++i) ptrs.push_back(&residuals[i]);
    const auto logits = copies[lane].forward_logits(make_batch<float>(ptrs), nn::Mode::kInference);
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
      const double z = logits(i, 0);
      out[c * kChunk + static_cast<std::size_t>(i)] = 1.0 / (1.0 + std::exp(-z));
    }
  });
  return out;
}

}  // namespace genclass
