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

#ifndef GENCLASS_MODEL_HPP
#define GENCLASS_MODEL_HPP

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "genclass/errors.hpp"
#include "genclass/imaging.hpp"
#include "genclass/nn/resnet.hpp"
#include "genclass/srm.hpp"

namespace genclass {

struct ModelConfig {
  nn::BackboneConfig backbone;
  int embedding_dim = 512;
  std::optional<int> num_classes;  // width of the classification head
  int input_size = kInputSize;
  std::string srm_bank_id = "srm3-v1";

  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
};

/// SRM residuals -> residual backbone -> 512-d embedding [-> logits head].
template <typename T>
class BasicEmbeddingModel {
 public:
  using Matrix = nn::Matrix<T>;

  struct Outputs {
    Matrix embedding;
    Matrix logits;  // empty without a head
  };

  BasicEmbeddingModel(const ModelConfig& config, std::uint64_t seed)
      : config_(config),
        backbone_(config.backbone),
        embedding_("embedding", backbone_.feature_dim(), config.embedding_dim) {
    if (config.embedding_dim < 1) throw ConfigError("embedding_dim must be >= 1");
    if (config.num_classes) {
      if (*config.num_classes < 1) throw ConfigError("num_classes must be >= 1");
      head_.emplace("head", config.embedding_dim, *config.num_classes);
    }
    std::mt19937_64 rng(seed);
    backbone_.init(rng);
    embedding_.init(rng);
    if (head_) head_->init(rng);
  }

  const ModelConfig& config() const { return config_; }
  bool has_head() const { return head_.has_value(); }

  Outputs forward(const nn::Tensor<T>& batch, nn::Mode mode) {
    check_input(batch);
    Outputs out;
    out.embedding = embedding_.forward(backbone_.forward(batch, mode), mode);
    if (head_) out.logits = head_->forward(out.embedding, mode);
    return out;
  }

  Matrix embed(const nn::Tensor<T>& batch, nn::Mode mode = nn::Mode::kInference) {
    check_input(batch);
    return embedding_.forward(backbone_.forward(batch, mode), mode);
  }

  Matrix forward_logits(const nn::Tensor<T>& batch, nn::Mode mode = nn::Mode::kInference) {
    if (!head_) throw ConfigError("model has no classification head");
    return forward(batch, mode).logits;
  }

  /// Backpropagates through the last kTrain forward. `d_logits` may be null
  /// (embedding-only objectives).
  void backward(const Matrix& d_embedding, const Matrix* d_logits) {
    Matrix g = d_embedding;
    if (d_logits) {
      if (!head_) throw ConfigError("model has no classification head");
      g += head_->backward(*d_logits);
    }
    backbone_.backward(embedding_.backward(g));
  }

  nn::ParameterList<T> parameters() {
    nn::ParameterList<T> p;
    backbone_.collect(p);
    embedding_.collect(p);
    if (head_) head_->collect(p);
    return p;
  }

  /// Every persistent array in a stable order (parameters + BN statistics).
  nn::StateList<T> state() {
    nn::StateList<T> s;
    backbone_.collect_state(s);
    embedding_.collect_state(s);
    if (head_) head_->collect_state(s);
    return s;
  }

  void zero_grad() {
    for (auto* p : parameters()) p->zero_grad();
  }

  /// Content hash of configuration and all state arrays.
  std::string version() const;

 private:
  void check_input(const nn::Tensor<T>& batch) const {
    if (batch.n < 1) throw ShapeError("empty batch");
    if (batch.c != config_.backbone.in_channels || batch.h != config_.input_size || batch.w != config_.input_size)
      throw ShapeError("model input must be N x " + std::to_string(config_.backbone.in_channels) + " x " +
                       std::to_string(config_.input_size) + " x " + std::to_string(config_.input_size) + ", got " +
                       std::to_string(batch.n) + "x" + std::to_string(batch.c) + "x" + std::to_string(batch.h) +
                       "x" + std::to_string(batch.w));
  }

  ModelConfig config_;
  nn::ResNetBackbone<T> backbone_;
  nn::Linear<T> embedding_;
  std::optional<nn::Linear<T>> head_;
};

using EmbeddingModel = BasicEmbeddingModel<float>;
using EmbeddingMatrix = nn::Matrix<float>;

extern template class BasicEmbeddingModel<float>;
extern template class BasicEmbeddingModel<double>;

/// Copies residual maps into an N x C x H x W batch.
template <typename T>
nn::Tensor<T> make_batch(std::span<const srm::ResidualTensor* const> residuals);

/// Embeds residual maps in chunks; `workers` > 1 fans out over model copies.
EmbeddingMatrix embed_residuals(const EmbeddingModel& model, std::span<const srm::ResidualTensor> residuals,
                                int workers = 1, int chunk = 64);

/// Model weights plus training state. Centers are stored as float32 like
/// all other arrays.
struct Checkpoint {
  ModelConfig model_config;
  std::vector<float> model_state;  // concatenation of state() in order
  std::vector<std::string> classes;  // trained classes (head / center order)
  std::vector<std::string> finetuned_classes;
  nn::Matrix<double> centers;  // (classes.size(), embedding_dim)
  std::string config_hash;
  int epoch = 0;
  std::vector<std::string> lineage;

  static Checkpoint capture(EmbeddingModel& model);
  EmbeddingModel restore() const;

  void save(const std::filesystem::path& path) const;
  static Checkpoint load(const std::filesystem::path& path);
};

}  // namespace genclass

#endif  // GENCLASS_MODEL_HPP
