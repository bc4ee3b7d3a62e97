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

#ifndef GENCLASS_DATASET_HPP
#define GENCLASS_DATASET_HPP

#include <string>
#include <vector>

#include "genclass/imaging.hpp"
#include "genclass/srm.hpp"

namespace genclass {

/// Preprocessed, SRM-filtered samples held in memory.
struct ResidualDataset {
  std::vector<srm::ResidualTensor> residuals;
  std::vector<int> labels;
  std::vector<std::string> ids;

  std::size_t size() const { return residuals.size(); }
  void append(srm::ResidualTensor r, int label, std::string id) {
    residuals.push_back(std::move(r));
    labels.push_back(label);
    ids.push_back(std::move(id));
  }
};

/// Decodes, preprocesses and filters the given entries (order preserved).
ResidualDataset load_entries(const DatasetManifest& manifest, const std::vector<ManifestEntry>& entries,
                             int workers = 1);

inline ResidualDataset load_split(const DatasetManifest& manifest, Split split, int workers = 1) {
  return load_entries(manifest, manifest.select(split), workers);
}

}  // namespace genclass

#endif  // GENCLASS_DATASET_HPP
