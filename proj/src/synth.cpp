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

#include "genclass/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "genclass/errors.hpp"
#include "genclass/util.hpp"

namespace genclass::synth {

namespace {

std::mt19937_64 seeded(std::uint64_t seed, std::uint32_t a, std::uint32_t b) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), a, b};
  return std::mt19937_64(seq);
}

void clamp_pixels(ImageTensor& im) {
  for (float& p : im.pixels) p = std::clamp(p, 0.0f, 255.0f);
}

void add_periodic(ImageTensor& im, std::uint64_t pattern_seed, double amplitude) {
  auto rng = seeded(pattern_seed, 0xfeed, 1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  struct Wave {
    double fx, fy, phase, amp[3];
  };
  std::array<Wave, 3> waves;
  for (auto& w : waves) {
    w.fx = 2.0 * std::numbers::pi * (2.0 + std::floor(u(rng) * 6.0)) / 16.0;
    w.fy = 2.0 * std::numbers::pi * (1.0 + std::floor(u(rng) * 6.0)) / 16.0;
    w.phase = 2.0 * std::numbers::pi * u(rng);
    for (double& a : w.amp) a = amplitude * (0.5 + 0.5 * u(rng));
  }
  for (int y = 0; y < im.height; ++y)
    for (int x = 0; x < im.width; ++x)
      for (int c = 0; c < 3; ++c) {
        double v = 0.0;
        for (const auto& w : waves) v += w.amp[c] * std::sin(w.fx * x + w.fy * y + w.phase);
        im.at(y, x, c) += static_cast<float>(v);
      }
}

void add_fingerprint(ImageTensor& im, std::uint64_t pattern_seed, double sigma) {
  auto rng = seeded(pattern_seed, 0xf1a9, 2);
  std::normal_distribution<double> g(0.0, sigma);
  for (float& p : im.pixels) p += static_cast<float>(g(rng));
}

void checkerboard(ImageTensor& im, double amplitude) {
  ImageTensor out = im;
  for (int y = 0; y + 1 < im.height; y += 2)
    for (int x = 0; x + 1 < im.width; x += 2)
      for (int c = 0; c < 3; ++c) {
        const float m = 0.25f * (im.at(y, x, c) + im.at(y + 1, x, c) + im.at(y, x + 1, c) + im.at(y + 1, x + 1, c));
        for (int dy = 0; dy < 2; ++dy)
          for (int dx = 0; dx < 2; ++dx) out.at(y + dy, x + dx, c) = m + static_cast<float>(((dx + dy) & 1) ? amplitude : -amplitude);
      }
  im = std::move(out);
}

void blocking(ImageTensor& im) {
  constexpr int N = 8;
  std::array<std::array<double, N>, N> basis;
  for (int k = 0; k < N; ++k)
    for (int n = 0; n < N; ++n)
      basis[k][n] = (k == 0 ? std::sqrt(1.0 / N) : std::sqrt(2.0 / N)) * std::cos(std::numbers::pi * (n + 0.5) * k / N);
  auto step = [](int u, int v) { return 6.0 + 3.0 * (u + v); };
  for (int by = 0; by + N <= im.height; by += N)
    for (int bx = 0; bx + N <= im.width; bx += N)
      for (int c = 0; c < 3; ++c) {
        double block[N][N], coef[N][N], tmp[N][N];
        for (int y = 0; y < N; ++y)
          for (int x = 0; x < N; ++x) block[y][x] = im.at(by + y, bx + x, c) - 128.0;
        for (int u = 0; u < N; ++u)
          for (int x = 0; x < N; ++x) {
            double s = 0.0;
            for (int y = 0; y < N; ++y) s += basis[u][y] * block[y][x];
            tmp[u][x] = s;
          }
        for (int u = 0; u < N; ++u)
          for (int v = 0; v < N; ++v) {
            double s = 0.0;
            for (int x = 0; x < N; ++x) s += basis[v][x] * tmp[u][x];
            const double q = step(u, v);
            coef[u][v] = std::round(s / q) * q;
          }
        for (int y = 0; y < N; ++y)
          for (int v = 0; v < N; ++v) {
            double s = 0.0;
            for (int u = 0; u < N; ++u) s += basis[u][y] * coef[u][v];
            tmp[y][v] = s;
          }
        for (int y = 0; y < N; ++y)
          for (int x = 0; x < N; ++x) {
            double s = 0.0;
            for (int v = 0; v < N; ++v) s += basis[v][x] * tmp[y][v];
            im.at(by + y, bx + x, c) = static_cast<float>(s + 128.0);
          }
      }
}

void blur_noise(ImageTensor& im, std::mt19937_64& rng, double sigma) {
  static constexpr float k[3] = {0.25f, 0.5f, 0.25f};
  ImageTensor out = im;
  for (int y = 0; y < im.height; ++y)
    for (int x = 0; x < im.width; ++x)
      for (int c = 0; c < 3; ++c) {
        float s = 0.0f;
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            const int yy = std::clamp(y + dy, 0, im.height - 1), xx = std::clamp(x + dx, 0, im.width - 1);
            s += k[dy + 1] * k[dx + 1] * im.at(yy, xx, c);
          }
        out.at(y, x, c) = s;
      }
  std::normal_distribution<float> noise(0.0f, static_cast<float>(sigma));
  for (float& p : out.pixels) p += noise(rng);
  im = std::move(out);
}

}  // namespace

const std::vector<SynthClass>& synth_classes() {
  static const std::vector<SynthClass> classes{{"real", Artifact::kNone},
                                               {"periodic", Artifact::kPeriodic},
                                               {"checkerboard", Artifact::kCheckerboard},
                                               {"blocking", Artifact::kBlocking},
                                               {"blurnoise", Artifact::kBlurNoise}};
  return classes;
}

ImageTensor smooth_image(int size, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ImageTensor im(size, size, 3);
  double base[3];
  for (double& b : base) b = 60.0 + 120.0 * u(rng);
  struct Blob {
    double cx, cy, r, amp[3];
  };
  std::vector<Blob> blobs(3 + static_cast<int>(u(rng) * 4));
  for (auto& b : blobs) {
    b.cx = u(rng) * size;
    b.cy = u(rng) * size;
    b.r = size * (0.1 + 0.3 * u(rng));
    for (double& a : b.amp) a = -60.0 + 120.0 * u(rng);
  }
  const double fx = 2.0 * std::numbers::pi * (0.5 + 1.5 * u(rng)) / size;
  const double fy = 2.0 * std::numbers::pi * (0.5 + 1.5 * u(rng)) / size;
  const double ph = 2.0 * std::numbers::pi * u(rng);
  const double wave_amp = 10.0 + 20.0 * u(rng);
  std::normal_distribution<double> noise(0.0, 1.0);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      const double wave = wave_amp * std::sin(fx * x + fy * y + ph);
      for (int c = 0; c < 3; ++c) {
        double v = base[c] + wave;
        for (const auto& b : blobs) {
          const double d2 = (x - b.cx) * (x - b.cx) + (y - b.cy) * (y - b.cy);
          v += b.amp[c] * std::exp(-d2 / (2.0 * b.r * b.r));
        }
        im.at(y, x, c) = static_cast<float>(v + noise(rng));
      }
    }
  clamp_pixels(im);
  return im;
}

void apply_artifact(ImageTensor& image, Artifact artifact, std::uint64_t pattern_seed, std::mt19937_64& rng,
                    const ArtifactStrength& strength) {
  if (artifact != Artifact::kNone && strength.fingerprint > 0.0) add_fingerprint(image, pattern_seed, strength.fingerprint);
  switch (artifact) {
    case Artifact::kNone: break;
    case Artifact::kPeriodic: add_periodic(image, pattern_seed, strength.periodic); break;
    case Artifact::kCheckerboard: checkerboard(image, strength.checker); break;
    case Artifact::kBlocking: blocking(image); break;
    case Artifact::kBlurNoise: blur_noise(image, rng, strength.noise); break;
  }
  clamp_pixels(image);
}

ImageTensor synth_image(Artifact artifact, std::uint64_t seed, int class_index, int index, int size,
                        const ArtifactStrength& strength) {
  auto rng = seeded(seed, static_cast<std::uint32_t>(class_index), static_cast<std::uint32_t>(index));
  ImageTensor im = smooth_image(size, rng);
  Fnv1a h;
  h.update(&seed, sizeof(seed));
  h.update(&class_index, sizeof(class_index));
  apply_artifact(im, artifact, h.digest(), rng, strength);
  return im;
}

std::vector<std::string> write_dataset(const std::filesystem::path& root, const SynthOptions& options, int workers) {
  if (options.train_per_class < 1 || options.test_per_class < 0 || options.size < 8)
    throw ArgumentError("invalid synthetic dataset dimensions");
  const auto& classes = synth_classes();
  const int per_class = options.train_per_class + options.test_per_class;
  std::vector<std::string> names;
  for (const auto& c : classes) {
    std::filesystem::create_directories(root / c.name);
    names.push_back(c.name);
  }
  const std::size_t total = classes.size() * static_cast<std::size_t>(per_class);
  parallel_for(total, workers, [&](std::size_t i, int) {
    const int c = static_cast<int>(i / per_class), idx = static_cast<int>(i % per_class);
    char file[32];
    std::snprintf(file, sizeof(file), "%05d.png", idx);
    write_image(root / classes[c].name / file, synth_image(classes[c].artifact, options.seed, c, idx, options.size, options.strength));
  });
  return names;
}

}  // namespace genclass::synth
