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

#ifndef GENCLASS_NN_RESNET_HPP
#define GENCLASS_NN_RESNET_HPP

#include <array>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "genclass/errors.hpp"
#include "genclass/nn/layers.hpp"

namespace genclass::nn {

struct BackboneConfig {
  int depth = 18;        // 10, 18, 34 (basic blocks) or 50 (bottlenecks)
  int base_width = 64;   // channels of the first stage; doubles per stage
  int stem_stride = 1;   // 128x128 residual maps keep full resolution by default
  int in_channels = 3;
};

inline std::array<int, 4> stage_blocks(int depth) {
  switch (depth) {
    case 10: return {1, 1, 1, 1};
    case 18: return {2, 2, 2, 2};
    case 34: return {3, 4, 6, 3};
    case 50: return {3, 4, 6, 3};
    default: throw ConfigError("unsupported backbone depth " + std::to_string(depth) +
                               " (expected 10, 18, 34 or 50)");
  }
}

template <typename T>
class Block {
 public:
  virtual ~Block() = default;
  virtual Tensor<T> forward(const Tensor<T>& x, Mode mode) = 0;
  virtual Tensor<T> backward(const Tensor<T>& dy) = 0;
  virtual void init(std::mt19937_64& rng) = 0;
  virtual void collect(ParameterList<T>& params) = 0;
  virtual void collect_state(StateList<T>& state) = 0;
  virtual std::unique_ptr<Block> clone() const = 0;
};

template <typename T>
Tensor<T>& add_inplace(Tensor<T>& a, const Tensor<T>& b) {
  for (std::size_t i = 0; i < a.size(); ++i) a.data[i] += b.data[i];
  return a;
}

template <typename T>
class BasicBlock final : public Block<T> {
 public:
  BasicBlock(const std::string& name, int in_channels, int channels, int stride)
      : conv1_(name + ".conv1", in_channels, channels, 3, stride, 1),
        bn1_(name + ".bn1", channels),
        conv2_(name + ".conv2", channels, channels, 3, 1, 1),
        bn2_(name + ".bn2", channels),
        project_(stride != 1 || in_channels != channels) {
    if (project_) {
      proj_conv_ = Conv2d<T>(name + ".proj", in_channels, channels, 1, stride, 0);
      proj_bn_ = BatchNorm2d<T>(name + ".proj_bn", channels);
    }
  }

  Tensor<T> forward(const Tensor<T>& x, Mode mode) override {
    Tensor<T> a = relu1_.forward(bn1_.forward(conv1_.forward(x, mode), mode), mode);
    Tensor<T> b = bn2_.forward(conv2_.forward(a, mode), mode);
    if (project_)
      add_inplace(b, proj_bn_.forward(proj_conv_.forward(x, mode), mode));
    else
      add_inplace(b, x);
    return relu2_.forward(b, mode);
  }

  Tensor<T> backward(const Tensor<T>& dy) override {
    Tensor<T> g = relu2_.backward(dy);
    Tensor<T> dx = conv1_.backward(bn1_.backward(relu1_.backward(conv2_.backward(bn2_.backward(g)))));
    if (project_)
      add_inplace(dx, proj_conv_.backward(proj_bn_.backward(g)));
    else
      add_inplace(dx, g);
    return dx;
  }

  void init(std::mt19937_64& rng) override {
    conv1_.init(rng);
    conv2_.init(rng);
    if (project_) proj_conv_.init(rng);
  }

  void collect(ParameterList<T>& p) override {
    conv1_.collect(p); bn1_.collect(p); conv2_.collect(p); bn2_.collect(p);
    if (project_) { proj_conv_.collect(p); proj_bn_.collect(p); }
  }

  void collect_state(StateList<T>& s) override {
    conv1_.collect_state(s); bn1_.collect_state(s); conv2_.collect_state(s); bn2_.collect_state(s);
    if (project_) { proj_conv_.collect_state(s); proj_bn_.collect_state(s); }
  }

  std::unique_ptr<Block<T>> clone() const override { return std::make_unique<BasicBlock>(*this); }

 private:
  Conv2d<T> conv1_;
  BatchNorm2d<T> bn1_;
  Relu<T> relu1_;
  Conv2d<T> conv2_;
  BatchNorm2d<T> bn2_;
  Relu<T> relu2_;
  bool project_;
  Conv2d<T> proj_conv_;
  BatchNorm2d<T> proj_bn_;
};

template <typename T>
class BottleneckBlock final : public Block<T> {
 public:
  static constexpr int kExpansion = 4;

  BottleneckBlock(const std::string& name, int in_channels, int channels, int stride)
      : conv1_(name + ".conv1", in_channels, channels, 1, 1, 0),
        bn1_(name + ".bn1", channels),
        conv2_(name + ".conv2", channels, channels, 3, stride, 1),
        bn2_(name + ".bn2", channels),
        conv3_(name + ".conv3", channels, channels * kExpansion, 1, 1, 0),
        bn3_(name + ".bn3", channels * kExpansion),
        project_(stride != 1 || in_channels != channels * kExpansion) {
    if (project_) {
      proj_conv_ = Conv2d<T>(name + ".proj", in_channels, channels * kExpansion, 1, stride, 0);
      proj_bn_ = BatchNorm2d<T>(name + ".proj_bn", channels * kExpansion);
    }
  }

  Tensor<T> forward(const Tensor<T>& x, Mode mode) override {
    Tensor<T> a = relu1_.forward(bn1_.forward(conv1_.forward(x, mode), mode), mode);
    Tensor<T> b = relu2_.forward(bn2_.forward(conv2_.forward(a, mode), mode), mode);
    Tensor<T> c = bn3_.forward(conv3_.forward(b, mode), mode);
    if (project_)
      add_inplace(c, proj_bn_.forward(proj_conv_.forward(x, mode), mode));
    else
      add_inplace(c, x);
    return relu3_.forward(c, mode);
  }

  Tensor<T> backward(const Tensor<T>& dy) override {
    Tensor<T> g = relu3_.backward(dy);
    Tensor<T> db = conv3_.backward(bn3_.backward(g));
    Tensor<T> da = conv2_.backward(bn2_.backward(relu2_.backward(db)));
    Tensor<T> dx = conv1_.backward(bn1_.backward(relu1_.backward(da)));
    if (project_)
      add_inplace(dx, proj_conv_.backward(proj_bn_.backward(g)));
    else
      add_inplace(dx, g);
    return dx;
  }

  void init(std::mt19937_64& rng) override {
    conv1_.init(rng);
    conv2_.init(rng);
    conv3_.init(rng);
    if (project_) proj_conv_.init(rng);
  }

  void collect(ParameterList<T>& p) override {
    conv1_.collect(p); bn1_.collect(p); conv2_.collect(p); bn2_.collect(p); conv3_.collect(p); bn3_.collect(p);
    if (project_) { proj_conv_.collect(p); proj_bn_.collect(p); }
  }

  void collect_state(StateList<T>& s) override {
    conv1_.collect_state(s); bn1_.collect_state(s); conv2_.collect_state(s); bn2_.collect_state(s);
    conv3_.collect_state(s); bn3_.collect_state(s);
    if (project_) { proj_conv_.collect_state(s); proj_bn_.collect_state(s); }
  }

  std::unique_ptr<Block<T>> clone() const override { return std::make_unique<BottleneckBlock>(*this); }

 private:
  Conv2d<T> conv1_;
  BatchNorm2d<T> bn1_;
  Relu<T> relu1_;
  Conv2d<T> conv2_;
  BatchNorm2d<T> bn2_;
  Relu<T> relu2_;
  Conv2d<T> conv3_;
  BatchNorm2d<T> bn3_;
  Relu<T> relu3_;
  bool project_;
  Conv2d<T> proj_conv_;
  BatchNorm2d<T> proj_bn_;
};

/// Residual feature extractor: 3x3 stem, four stages, global average pool.
template <typename T>
class ResNetBackbone {
 public:
  explicit ResNetBackbone(const BackboneConfig& cfg)
      : cfg_(cfg),
        stem_("stem.conv", cfg.in_channels, cfg.base_width, 3, cfg.stem_stride, 1),
        stem_bn_("stem.bn", cfg.base_width) {
    if (cfg.base_width < 1) throw ConfigError("base_width must be >= 1");
    if (cfg.stem_stride < 1) throw ConfigError("stem_stride must be >= 1");
    const auto blocks = stage_blocks(cfg.depth);
    const bool bottleneck = cfg.depth >= 50;
    int in = cfg.base_width;
    for (int s = 0; s < 4; ++s) {
      const int channels = cfg.base_width << s;
      for (int b = 0; b < blocks[s]; ++b) {
        const int stride = (s > 0 && b == 0) ? 2 : 1;
        const std::string name = "stage" + std::to_string(s + 1) + ".block" + std::to_string(b + 1);
        if (bottleneck) {
          blocks_.push_back(std::make_unique<BottleneckBlock<T>>(name, in, channels, stride));
          in = channels * BottleneckBlock<T>::kExpansion;
        } else {
          blocks_.push_back(std::make_unique<BasicBlock<T>>(name, in, channels, stride));
          in = channels;
        }
      }
    }
    feature_dim_ = in;
  }

  ResNetBackbone(const ResNetBackbone& o)
      : cfg_(o.cfg_), stem_(o.stem_), stem_bn_(o.stem_bn_), stem_relu_(o.stem_relu_),
        pool_(o.pool_), feature_dim_(o.feature_dim_) {
    for (const auto& b : o.blocks_) blocks_.push_back(b->clone());
  }
  ResNetBackbone& operator=(const ResNetBackbone& o) {
    if (this != &o) {
      ResNetBackbone tmp(o);
      *this = std::move(tmp);
    }
    return *this;
  }
  ResNetBackbone(ResNetBackbone&&) noexcept = default;
  ResNetBackbone& operator=(ResNetBackbone&&) noexcept = default;

  const BackboneConfig& config() const { return cfg_; }
  int feature_dim() const { return feature_dim_; }

  void init(std::mt19937_64& rng) {
    stem_.init(rng);
    for (auto& b : blocks_) b->init(rng);
  }

  Matrix<T> forward(const Tensor<T>& x, Mode mode) {
    if (x.c != cfg_.in_channels) throw ShapeError("backbone expects " + std::to_string(cfg_.in_channels) + " channels");
    Tensor<T> h = stem_relu_.forward(stem_bn_.forward(stem_.forward(x, mode), mode), mode);
    for (auto& b : blocks_) h = b->forward(h, mode);
    return pool_.forward(h);
  }

  Tensor<T> backward(const Matrix<T>& dfeatures) {
    Tensor<T> g = pool_.backward(dfeatures);
    for (auto it = blocks_.rbegin(); it != blocks_.rend(); ++it) g = (*it)->backward(g);
    return stem_.backward(stem_bn_.backward(stem_relu_.backward(g)));
  }

  void collect(ParameterList<T>& p) {
    stem_.collect(p);
    stem_bn_.collect(p);
    for (auto& b : blocks_) b->collect(p);
  }

  void collect_state(StateList<T>& s) {
    stem_.collect_state(s);
    stem_bn_.collect_state(s);
    for (auto& b : blocks_) b->collect_state(s);
  }

 private:
  BackboneConfig cfg_;
  Conv2d<T> stem_;
  BatchNorm2d<T> stem_bn_;
  Relu<T> stem_relu_;
  std::vector<std::unique_ptr<Block<T>>> blocks_;
  GlobalAvgPool<T> pool_;
  int feature_dim_ = 0;
};

}  // namespace genclass::nn

#endif  // GENCLASS_NN_RESNET_HPP
