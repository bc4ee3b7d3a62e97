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

#include "genclass/imaging.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "genclass/errors.hpp"
#include "genclass/util.hpp"

namespace genclass {

namespace fs = std::filesystem;

std::string_view to_string(ValueRange r) {
  return r == ValueRange::kRaw0To255 ? "raw_0_255" : "unit_0_1";
}

bool ImageTensor::in_range() const {
  const float hi = value_range == ValueRange::kRaw0To255 ? 255.0f : 1.0f;
  return std::all_of(pixels.begin(), pixels.end(), [hi](float v) { return v >= 0.0f && v <= hi; });
}

ImageTensor decode_image(const fs::path& path) {
  if (!fs::exists(path)) throw DecodeError("no such file: " + path.string());
  cv::Mat mat = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  if (mat.empty()) throw DecodeError("cannot decode image: " + path.string());
  if (mat.rows < 1 || mat.cols < 1) throw DecodeError("empty image: " + path.string());

  double scale = 1.0;
  switch (mat.depth()) {
    case CV_8U: break;
    case CV_16U: scale = 255.0 / 65535.0; break;
    default: throw DecodeError("unsupported pixel depth in " + path.string());
  }
  const int ch = mat.channels();
  if (ch != 1 && ch != 3 && ch != 4) throw DecodeError("unsupported channel count in " + path.string());

  cv::Mat f;
  mat.convertTo(f, CV_MAKETYPE(CV_32F, ch), scale);
  ImageTensor out(f.rows, f.cols, 3);
  for (int y = 0; y < f.rows; ++y) {
    const float* row = f.ptr<float>(y);
    for (int x = 0; x < f.cols; ++x) {
      const float* px = row + x * ch;
      if (ch == 1) {
        out.at(y, x, 0) = out.at(y, x, 1) = out.at(y, x, 2) = px[0];
      } else {
        // OpenCV stores BGR(A).
        out.at(y, x, 0) = px[2];
        out.at(y, x, 1) = px[1];
        out.at(y, x, 2) = px[0];
      }
    }
  }
  return out;
}

void write_image(const fs::path& path, const ImageTensor& image) {
  if (image.channels != 3) throw ShapeError("write_image expects 3 channels");
  const float gain = image.value_range == ValueRange::kUnit0To1 ? 255.0f : 1.0f;
  cv::Mat mat(image.height, image.width, CV_8UC3);
  for (int y = 0; y < image.height; ++y) {
    auto* row = mat.ptr<unsigned char>(y);
    for (int x = 0; x < image.width; ++x)
      for (int c = 0; c < 3; ++c) {
        const float v = std::clamp(std::round(image.at(y, x, c) * gain), 0.0f, 255.0f);
        row[x * 3 + (2 - c)] = static_cast<unsigned char>(v);
      }
  }
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  if (!cv::imwrite(path.string(), mat)) throw ArgumentError("cannot write image " + path.string());
}

ImageTensor center_crop(const ImageTensor& image) {
  const int side = std::min(image.height, image.width);
  const int y0 = (image.height - side) / 2;
  const int x0 = (image.width - side) / 2;
  ImageTensor out(side, side, image.channels, image.value_range);
  for (int y = 0; y < side; ++y)
    for (int x = 0; x < side; ++x)
      for (int c = 0; c < image.channels; ++c) out.at(y, x, c) = image.at(y + y0, x + x0, c);
  return out;
}

namespace {

struct Tap {
  int i0;
  int i1;
  float frac;
};

std::vector<Tap> bilinear_taps(int in_size, int out_size) {
  std::vector<Tap> taps(out_size);
  const double scale = static_cast<double>(in_size) / out_size;
  for (int o = 0; o < out_size; ++o) {
    double src = (o + 0.5) * scale - 0.5;
    int i0 = static_cast<int>(std::floor(src));
    double frac = src - i0;
    if (i0 < 0) {
      i0 = 0;
      frac = 0.0;
    }
    if (i0 >= in_size - 1) {
      i0 = in_size - 1;
      frac = 0.0;
    }
    taps[o] = {i0, std::min(i0 + 1, in_size - 1), static_cast<float>(frac)};
  }
  return taps;
}

}  // namespace

ImageTensor resize_bilinear(const ImageTensor& image, int out_height, int out_width) {
  if (out_height <= 0 || out_width <= 0) throw ArgumentError("resize target must be positive");
  if (image.height < 1 || image.width < 1) throw ArgumentError("cannot resize an empty image");
  const auto ty = bilinear_taps(image.height, out_height);
  const auto tx = bilinear_taps(image.width, out_width);
  ImageTensor out(out_height, out_width, image.channels, image.value_range);
  for (int y = 0; y < out_height; ++y) {
    const auto& a = ty[y];
    for (int x = 0; x < out_width; ++x) {
      const auto& b = tx[x];
      for (int c = 0; c < image.channels; ++c) {
        const float top = image.at(a.i0, b.i0, c) * (1 - b.frac) + image.at(a.i0, b.i1, c) * b.frac;
        const float bot = image.at(a.i1, b.i0, c) * (1 - b.frac) + image.at(a.i1, b.i1, c) * b.frac;
        out.at(y, x, c) = top * (1 - a.frac) + bot * a.frac;
      }
    }
  }
  return out;
}

ImageTensor preprocess(const ImageTensor& image, int target_size) {
  if (target_size <= 0) throw ArgumentError("target_size must be positive, got " + std::to_string(target_size));
  ImageTensor square = center_crop(image);
  if (square.height == target_size) return square;
  return resize_bilinear(square, target_size, target_size);
}

ImageTensor load_and_preprocess(const fs::path& path, int target_size) {
  if (target_size <= 0) throw ArgumentError("target_size must be positive, got " + std::to_string(target_size));
  return preprocess(decode_image(path), target_size);
}

// ---------------------------------------------------------------------------
// Manifests

std::string_view to_string(Split s) { return s == Split::kTrain ? "train" : "test"; }

Split parse_split(std::string_view s) {
  if (s == "train") return Split::kTrain;
  if (s == "test") return Split::kTest;
  throw ManifestError("unknown split '" + std::string(s) + "'");
}

int DatasetManifest::class_index(std::string_view label) const {
  for (std::size_t i = 0; i < classes.size(); ++i)
    if (classes[i] == label) return static_cast<int>(i);
  throw ManifestError("class '" + std::string(label) + "' not in manifest");
}

bool DatasetManifest::has_class(std::string_view label) const {
  return std::find(classes.begin(), classes.end(), label) != classes.end();
}

std::vector<ManifestEntry> DatasetManifest::select(int cls, Split split) const {
  std::vector<ManifestEntry> out;
  for (const auto& e : entries)
    if (e.class_index == cls && e.split == split) out.push_back(e);
  return out;
}

std::vector<ManifestEntry> DatasetManifest::select(Split split) const {
  std::vector<ManifestEntry> out;
  for (const auto& e : entries)
    if (e.split == split) out.push_back(e);
  return out;
}

std::size_t DatasetManifest::count(int cls, Split split) const {
  return static_cast<std::size_t>(std::count_if(entries.begin(), entries.end(), [&](const ManifestEntry& e) {
    return e.class_index == cls && e.split == split;
  }));
}

std::map<std::string, SplitCounts> DatasetManifest::split_counts() const {
  std::map<std::string, SplitCounts> out;
  for (const auto& c : classes) out[c] = {};
  for (const auto& e : entries) {
    auto& sc = out[classes.at(e.class_index)];
    (e.split == Split::kTrain ? sc.train : sc.test) += 1;
  }
  return out;
}

DatasetManifest DatasetManifest::subset(const std::vector<std::string>& labels) const {
  DatasetManifest out;
  out.seed = seed;
  out.root = root;
  out.resampler = resampler;
  out.target_size = target_size;
  std::map<int, int> remap;
  for (const auto& l : labels) {
    if (remap.count(class_index(l))) throw ManifestError("duplicate class in subset: " + l);
    remap[class_index(l)] = static_cast<int>(out.classes.size());
    out.classes.push_back(l);
  }
  for (const auto& e : entries) {
    auto it = remap.find(e.class_index);
    if (it == remap.end()) continue;
    ManifestEntry copy = e;
    copy.class_index = it->second;
    out.entries.push_back(copy);
  }
  return out;
}

nlohmann::json DatasetManifest::to_json() const {
  nlohmann::json j;
  j["classes"] = classes;
  j["seed"] = seed;
  j["root"] = root.generic_string();
  j["resampler"] = resampler;
  j["target_size"] = target_size;
  auto arr = nlohmann::json::array();
  for (const auto& e : entries)
    arr.push_back({{"path", e.path}, {"class", e.class_index}, {"split", std::string(to_string(e.split))}});
  j["entries"] = std::move(arr);
  nlohmann::json counts = nlohmann::json::object();
  for (const auto& [label, sc] : split_counts()) counts[label] = {{"train", sc.train}, {"test", sc.test}};
  j["split_counts"] = std::move(counts);
  if (!warnings.empty()) j["warnings"] = warnings;
  return j;
}

DatasetManifest DatasetManifest::from_json(const nlohmann::json& j) {
  DatasetManifest m;
  try {
    m.classes = j.at("classes").get<std::vector<std::string>>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.resampler = j.value("resampler", std::string("bilinear"));
    m.target_size = j.value("target_size", kInputSize);
    m.warnings = j.value("warnings", std::vector<std::string>{});
    for (const auto& e : j.at("entries")) {
      ManifestEntry entry;
      entry.path = e.at("path").get<std::string>();
      entry.class_index = e.at("class").get<int>();
      entry.split = parse_split(e.at("split").get<std::string>());
      if (entry.class_index < 0 || entry.class_index >= m.num_classes())
        throw ManifestError("entry " + entry.path + " has class index out of range");
      m.entries.push_back(std::move(entry));
    }
  } catch (const nlohmann::json::exception& ex) {
    throw ManifestError(std::string("malformed manifest: ") + ex.what());
  }
  std::set<std::string> seen(m.classes.begin(), m.classes.end());
  if (seen.size() != m.classes.size()) throw ManifestError("duplicate class names in manifest");
  return m;
}

void DatasetManifest::save(const fs::path& path) const { write_text_file(path, to_json().dump(2) + "\n"); }

DatasetManifest DatasetManifest::load(const fs::path& path, const std::optional<fs::path>& root_override) {
  if (!fs::is_regular_file(path)) throw ManifestError("manifest not found: " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::parse_error& ex) {
    throw ManifestError("cannot parse manifest " + path.string() + ": " + ex.what());
  }
  DatasetManifest m = from_json(j);
  if (root_override) {
    m.root = *root_override;
  } else if (j.contains("root")) {
    m.root = j["root"].get<std::string>();
  } else {
    m.root = path.parent_path();
  }
  return m;
}

namespace {

bool is_image_file(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

}  // namespace

DatasetManifest build_manifest(const fs::path& root, const ManifestOptions& options) {
  if (!fs::is_directory(root)) throw ManifestError("dataset root is not a directory: " + root.string());

  std::vector<std::string> names;
  for (const auto& d : fs::directory_iterator(root))
    if (d.is_directory()) names.push_back(d.path().filename().string());
  std::sort(names.begin(), names.end());
  if (names.empty()) throw ManifestError("no class directories under " + root.string());

  std::set<std::string> folded;
  for (const auto& n : names)
    if (!folded.insert(lower(n)).second) throw ManifestError("duplicate class name (case-insensitive): " + n);

  if (!options.real_class.empty()) {
    auto it = std::find(names.begin(), names.end(), options.real_class);
    if (it == names.end()) throw ManifestError("real-image class '" + options.real_class + "' not found");
    std::rotate(names.begin(), it, it + 1);
  }
  for (const auto& [label, _] : options.per_class)
    if (std::find(names.begin(), names.end(), label) == names.end())
      throw ManifestError("per-class split names unknown class '" + label + "'");

  DatasetManifest m;
  m.classes = names;
  m.seed = options.seed;
  m.root = root;
  for (int ci = 0; ci < static_cast<int>(names.size()); ++ci) {
    const auto& label = names[ci];
    std::vector<std::string> files;
    for (const auto& f : fs::directory_iterator(root / label))
      if (f.is_regular_file() && is_image_file(f.path())) files.push_back(label + "/" + f.path().filename().string());
    if (files.empty()) throw EmptyClassError("class directory '" + label + "' has no images");
    std::sort(files.begin(), files.end());

    std::seed_seq seq{static_cast<std::uint32_t>(options.seed), static_cast<std::uint32_t>(options.seed >> 32),
                      static_cast<std::uint32_t>(ci)};
    std::mt19937_64 rng(seq);
    std::shuffle(files.begin(), files.end(), rng);

    auto it = options.per_class.find(label);
    const SplitCounts want = it != options.per_class.end() ? it->second : options.default_split;
    const long n = static_cast<long>(files.size());
    long train = want.train, test = want.test;
    if (train + test > n) {
      // Shrink proportionally, keeping at least one of each requested split.
      const double share = static_cast<double>(want.train) / static_cast<double>(want.train + want.test);
      train = static_cast<long>(std::floor(n * share));
      if (want.test > 0 && train == n && n >= 2) train = n - 1;
      if (want.train > 0 && train == 0 && n >= 2) train = 1;
      test = std::min<long>(want.test, n - train);
      m.warnings.push_back("class '" + label + "' has " + std::to_string(n) + " images; requested " +
                           std::to_string(want.train) + "+" + std::to_string(want.test) + ", using " +
                           std::to_string(train) + "+" + std::to_string(test));
    }
    std::vector<ManifestEntry> train_entries, test_entries;
    for (long i = 0; i < train; ++i) train_entries.push_back({files[i], ci, Split::kTrain});
    for (long i = train; i < train + test; ++i) test_entries.push_back({files[i], ci, Split::kTest});
    auto by_path = [](const ManifestEntry& a, const ManifestEntry& b) { return a.path < b.path; };
    std::sort(train_entries.begin(), train_entries.end(), by_path);
    std::sort(test_entries.begin(), test_entries.end(), by_path);
    m.entries.insert(m.entries.end(), train_entries.begin(), train_entries.end());
    m.entries.insert(m.entries.end(), test_entries.begin(), test_entries.end());
  }
  return m;
}

}  // namespace genclass
