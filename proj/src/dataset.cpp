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

#include "genclass/dataset.hpp"

#include "genclass/util.hpp"

namespace genclass {

ResidualDataset load_entries(const DatasetManifest& manifest, const std::vector<ManifestEntry>& entries, int workers) {
  ResidualDataset out;
  out.residuals.resize(entries.size());
  parallel_for(entries.size(), workers, [&](std::size_t i, int) {
    out.residuals[i] = srm::srm_residuals(load_and_preprocess(manifest.resolve(entries[i]), manifest.target_size));
  });
  for (const auto& e : entries) {
    out.labels.push_back(e.class_index);
    out.ids.push_back(e.path);
  }
  return out;
}

}  // namespace genclass
