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

// Synthetic stand-in for a real/generated image corpus: smooth random
// "real" images and four classes that each add one fixed kind of artifact.

#ifndef GENCLASS_SYNTH_HPP
#define GENCLASS_SYNTH_HPP

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "genclass/imaging.hpp"

namespace genclass::synth {

enum class Artifact { kNone, kPeriodic, kCheckerboard, kBlocking, kBlurNoise };

struct SynthClass {
  std::string name;
  Artifact artifact;
};

/// "real" first, then one class per artifact.
const std::vector<SynthClass>& synth_classes();

/// Amplitudes in 8-bit pixel units.
struct ArtifactStrength {
  double periodic = 3.0;  // peak of each of the three summed waves
  double checker = 1.5;   // +- offset added to the 2x upsampled image
  double noise = 3.0;     // sigma after the blur
  /// Sigma of a fixed per-class Gaussian noise pattern added to every
  /// generated class (a generator "fingerprint"); 0 disables it.
  double fingerprint = 2.0;
};

struct SynthOptions {
  int train_per_class = 500;
  int test_per_class = 100;
  int size = kInputSize;
  std::uint64_t seed = 0;
  ArtifactStrength strength;
};

/// Smooth content: Gaussian blobs plus low-frequency waves and mild noise.
ImageTensor smooth_image(int size, std::mt19937_64& rng);

/// Applies `artifact` in place. The periodic pattern and the fingerprint
/// depend on `pattern_seed` only, so they are shared by every image of the
/// class.
void apply_artifact(ImageTensor& image, Artifact artifact, std::uint64_t pattern_seed, std::mt19937_64& rng,
                    const ArtifactStrength& strength = {});

ImageTensor synth_image(Artifact artifact, std::uint64_t seed, int class_index, int index, int size,
                        const ArtifactStrength& strength = {});

/// Writes `<root>/<class>/<index>.png` for train + test counts per class.
/// Returns the class names in manifest order.
std::vector<std::string> write_dataset(const std::filesystem::path& root, const SynthOptions& options,
                                       int workers = 1);

}  // namespace genclass::synth

#endif  // GENCLASS_SYNTH_HPP
