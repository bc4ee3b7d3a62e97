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

// Shared helpers for the unit tests: temporary directories and small
// in-memory datasets that train in well under a second.

#ifndef GENCLASS_TESTS_FIXTURES_HPP
#define GENCLASS_TESTS_FIXTURES_HPP

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "genclass/dataset.hpp"
#include "genclass/imaging.hpp"
#include "genclass/metrics.hpp"
#include "genclass/srm.hpp"
#include "genclass/trainer.hpp"

namespace genclass::testing {

class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("genclass_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

/// Noise plus a class-specific offset, so classes are trivially separable.
inline srm::ResidualTensor patterned_residual(int cls, int size, std::mt19937_64& rng, double offset = 3.0) {
  srm::ResidualTensor r;
  r.channels = 3;
  r.height = size;
  r.width = size;
  r.kernel_bank_id = "srm3-v1";
  r.values.resize(static_cast<std::size_t>(3) * size * size);
  std::normal_distribution<float> noise(0.0f, 1.0f);
  for (int c = 0; c < 3; ++c)
    for (int i = 0; i < size * size; ++i) {
      const bool on = c == cls % 3 && ((i / size) % (cls / 3 + 2) == 0);
      r.values[static_cast<std::size_t>(c) * size * size + i] = noise(rng) + (on ? static_cast<float>(offset) : 0.0f);
    }
  return r;
}

inline std::vector<std::string> toy_classes(int n) {
  std::vector<std::string> out{"real"};
  for (int i = 1; i < n; ++i) out.push_back("gen" + std::to_string(i));
  return out;
}

/// ExperimentData with synthetic residuals and a matching manifest whose
/// paths are never opened.
inline metrics::ExperimentData toy_experiment(int num_classes, int train_per_class, int test_per_class, int size = 16,
                                              std::uint64_t seed = 1) {
  metrics::ExperimentData d;
  d.manifest.classes = toy_classes(num_classes);
  d.manifest.seed = seed;
  d.manifest.target_size = size;
  std::mt19937_64 rng(seed);
  for (int c = 0; c < num_classes; ++c) {
    for (int i = 0; i < train_per_class + test_per_class; ++i) {
      const bool train = i < train_per_class;
      ManifestEntry e{d.manifest.classes[c] + "/" + std::to_string(i) + ".png", c, train ? Split::kTrain : Split::kTest};
      d.manifest.entries.push_back(e);
      auto& target = train ? d.train : d.test;
      if (train) d.train_index[e.path] = d.train.size();
      target.append(patterned_residual(c, size, rng), c, e.path);
    }
  }
  return d;
}

inline TrainConfig tiny_train_config(int size = 16) {
  TrainConfig tc;
  tc.epochs = 2;
  tc.batch_size = 16;
  tc.initial_lr = 0.003;
  tc.model.backbone.depth = 10;
  tc.model.backbone.base_width = 4;
  tc.model.backbone.stem_stride = 2;
  tc.model.embedding_dim = 16;
  tc.model.input_size = size;
  tc.seed = 3;
  return tc;
}

inline FinetuneConfig tiny_finetune_config() {
  FinetuneConfig fc;
  fc.new_class_count = 4;
  fc.support_per_old_class = 4;
  fc.epochs = 2;
  fc.lr = 0.001;
  fc.seed = 5;
  return fc;
}

/// Constant-colour image of the given size (raw_0_255).
inline ImageTensor constant_image(int h, int w, float value) { return ImageTensor(h, w, 3, ValueRange::kRaw0To255, value); }

}  // namespace genclass::testing

#endif  // GENCLASS_TESTS_FIXTURES_HPP
