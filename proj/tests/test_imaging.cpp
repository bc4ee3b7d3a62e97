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

#include <fstream>
#include <set>

#include <gtest/gtest.h>
#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "fixtures.hpp"
#include "genclass/errors.hpp"
#include "genclass/imaging.hpp"
#include "genclass/util.hpp"

namespace genclass {
namespace {

namespace fs = std::filesystem;
using testing::TempDir;

void write_png(const fs::path& path, const cv::Mat& mat) {
  fs::create_directories(path.parent_path());
  ASSERT_TRUE(cv::imwrite(path.string(), mat));
}

cv::Mat gradient_bgr(int h, int w) {
  cv::Mat m(h, w, CV_8UC3);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) m.at<cv::Vec3b>(y, x) = cv::Vec3b((x * 7) % 256, (y * 3) % 256, (x + y) % 256);
  return m;
}

void touch(const fs::path& p) {
  fs::create_directories(p.parent_path());
  std::ofstream(p).put('x');
}

TEST(Preprocess, CelebaSizedImageBecomes128) {
  TempDir tmp;
  write_png(tmp / "face.png", gradient_bgr(218, 178));
  const ImageTensor t = load_and_preprocess(tmp / "face.png", 128);
  EXPECT_EQ(t.height, 128);
  EXPECT_EQ(t.width, 128);
  EXPECT_EQ(t.channels, 3);
  EXPECT_EQ(t.value_range, ValueRange::kRaw0To255);
  EXPECT_TRUE(t.in_range());
}

TEST(Preprocess, ConstantGrayIsIdentity) {
  TempDir tmp;
  write_png(tmp / "gray.png", cv::Mat(128, 128, CV_8UC3, cv::Scalar(90, 90, 90)));
  const ImageTensor t = load_and_preprocess(tmp / "gray.png", 128);
  for (float v : t.pixels) ASSERT_EQ(v, 90.0f);
}

TEST(Preprocess, CheckerboardMeanAndReferenceResampler) {
  TempDir tmp;
  cv::Mat board(256, 256, CV_8UC3);
  for (int y = 0; y < 256; ++y)
    for (int x = 0; x < 256; ++x) board.at<cv::Vec3b>(y, x) = ((x / 8 + y / 8) % 2) ? cv::Vec3b(250, 240, 230) : cv::Vec3b(10, 20, 30);
  write_png(tmp / "board.png", board);
  const ImageTensor t = load_and_preprocess(tmp / "board.png", 128);

  cv::Mat rgb, f32, ref;
  cv::cvtColor(board, rgb, cv::COLOR_BGR2RGB);
  rgb.convertTo(f32, CV_32FC3);
  cv::resize(f32, ref, cv::Size(128, 128), 0, 0, cv::INTER_LINEAR);
  double ours = 0, src = 0;
  for (int y = 0; y < 128; ++y)
    for (int x = 0; x < 128; ++x)
      for (int c = 0; c < 3; ++c) {
        ASSERT_NEAR(t.at(y, x, c), ref.at<cv::Vec3f>(y, x)[c], 1e-3);
        ours += t.at(y, x, c);
      }
  const cv::Scalar s = cv::mean(rgb);
  src = (s[0] + s[1] + s[2]) / 3.0;
  ours /= 128.0 * 128.0 * 3.0;
  EXPECT_NEAR(ours, src, 0.01 * src);
}

TEST(Preprocess, ResizeMatchesReferenceOnOddSizes) {
  ImageTensor img(37, 53);
  for (int y = 0; y < 37; ++y)
    for (int x = 0; x < 53; ++x)
      for (int c = 0; c < 3; ++c) img.at(y, x, c) = static_cast<float>((x * 13 + y * 7 + c * 29) % 256);
  cv::Mat m(37, 53, CV_32FC3, img.pixels.data());
  for (auto [h, w] : {std::pair{20, 31}, std::pair{70, 90}, std::pair{37, 53}}) {
    cv::Mat ref;
    cv::resize(m, ref, cv::Size(w, h), 0, 0, cv::INTER_LINEAR);
    const ImageTensor out = resize_bilinear(img, h, w);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        for (int c = 0; c < 3; ++c) ASSERT_NEAR(out.at(y, x, c), ref.at<cv::Vec3f>(y, x)[c], 1e-3) << h << "x" << w;
  }
}

TEST(Preprocess, CenterCropTakesMiddleSquare) {
  ImageTensor img(4, 8);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 8; ++x) img.at(y, x, 0) = static_cast<float>(x);
  const ImageTensor c = center_crop(img);
  EXPECT_EQ(c.height, 4);
  EXPECT_EQ(c.width, 4);
  EXPECT_EQ(c.at(0, 0, 0), 2.0f);
  EXPECT_EQ(c.at(3, 3, 0), 5.0f);
}

TEST(Preprocess, GrayscaleIsReplicated) {
  TempDir tmp;
  cv::Mat g(40, 40, CV_8UC1);
  for (int y = 0; y < 40; ++y)
    for (int x = 0; x < 40; ++x) g.at<unsigned char>(y, x) = static_cast<unsigned char>(x * 5 + y);
  write_png(tmp / "g.png", g);
  const ImageTensor t = decode_image(tmp / "g.png");
  ASSERT_EQ(t.channels, 3);
  for (int y = 0; y < 40; ++y)
    for (int x = 0; x < 40; ++x) {
      EXPECT_EQ(t.at(y, x, 0), g.at<unsigned char>(y, x));
      EXPECT_EQ(t.at(y, x, 1), t.at(y, x, 0));
      EXPECT_EQ(t.at(y, x, 2), t.at(y, x, 0));
    }
}

TEST(Preprocess, ChannelOrderIsRgb) {
  TempDir tmp;
  write_png(tmp / "c.png", cv::Mat(8, 8, CV_8UC3, cv::Scalar(1, 2, 3)));  // BGR
  const ImageTensor t = decode_image(tmp / "c.png");
  EXPECT_EQ(t.at(0, 0, 0), 3.0f);
  EXPECT_EQ(t.at(0, 0, 2), 1.0f);
}

TEST(Preprocess, Errors) {
  TempDir tmp;
  write_text_file(tmp / "broken.png", "not an image");
  EXPECT_THROW(load_and_preprocess(tmp / "broken.png"), DecodeError);
  EXPECT_THROW(load_and_preprocess(tmp / "missing.png"), DecodeError);
  write_png(tmp / "ok.png", gradient_bgr(10, 10));
  EXPECT_THROW(load_and_preprocess(tmp / "ok.png", 0), ArgumentError);
}

TEST(Preprocess, Deterministic) {
  TempDir tmp;
  write_png(tmp / "a.png", gradient_bgr(100, 150));
  EXPECT_EQ(load_and_preprocess(tmp / "a.png").pixels, load_and_preprocess(tmp / "a.png").pixels);
}

TEST(Manifest, FiveFilesThreeTwo) {
  TempDir tmp;
  for (int i = 0; i < 5; ++i) touch(tmp / "only" / (std::to_string(i) + ".png"));
  ManifestOptions o;
  o.default_split = {3, 2};
  const DatasetManifest m = build_manifest(tmp.path(), o);
  ASSERT_EQ(m.classes, std::vector<std::string>{"only"});
  EXPECT_EQ(m.count(0, Split::kTrain), 3u);
  EXPECT_EQ(m.count(0, Split::kTest), 2u);
  std::set<std::string> train, test;
  for (const auto& e : m.entries) (e.split == Split::kTrain ? train : test).insert(e.path);
  for (const auto& p : test) EXPECT_FALSE(train.count(p));
  EXPECT_EQ(train.size() + test.size(), 5u);
}

TEST(Manifest, EightClassesAtPaperScale) {
  TempDir tmp;
  const std::vector<std::string> names{"BEGAN", "CelebA", "DCGAN", "Glow", "IntroVAE", "PGGAN", "StyleGAN", "WGANGP"};
  for (const auto& n : names)
    for (int i = 0; i < 10100; ++i) touch(tmp / n / (std::to_string(i) + ".jpg"));
  ManifestOptions o;
  o.real_class = "CelebA";
  const DatasetManifest m = build_manifest(tmp.path(), o);
  EXPECT_EQ(m.num_classes(), 8);
  EXPECT_EQ(m.entries.size(), 80800u);
  EXPECT_EQ(m.classes[0], "CelebA");
  for (const auto& [label, c] : m.split_counts()) {
    EXPECT_EQ(c.train, 10000) << label;
    EXPECT_EQ(c.test, 100) << label;
  }
}

TEST(Manifest, SameSeedIsByteIdentical) {
  TempDir tmp;
  for (const char* c : {"a", "b"})
    for (int i = 0; i < 20; ++i) touch(tmp / c / (std::to_string(i) + ".png"));
  ManifestOptions o;
  o.default_split = {10, 5};
  o.seed = 9;
  build_manifest(tmp.path(), o).save(tmp / "m1.json");
  build_manifest(tmp.path(), o).save(tmp / "m2.json");
  EXPECT_EQ(read_text_file(tmp / "m1.json"), read_text_file(tmp / "m2.json"));
  o.seed = 10;
  build_manifest(tmp.path(), o).save(tmp / "m3.json");
  EXPECT_NE(read_text_file(tmp / "m1.json"), read_text_file(tmp / "m3.json"));
}

TEST(Manifest, ShortfallShrinksAndWarns) {
  TempDir tmp;
  for (int i = 0; i < 6; ++i) touch(tmp / "small" / (std::to_string(i) + ".png"));
  for (int i = 0; i < 30; ++i) touch(tmp / "big" / (std::to_string(i) + ".png"));
  ManifestOptions o;
  o.default_split = {20, 10};
  const DatasetManifest m = build_manifest(tmp.path(), o);
  const int small = m.class_index("small");
  EXPECT_EQ(m.count(small, Split::kTrain) + m.count(small, Split::kTest), 6u);
  EXPECT_GE(m.count(small, Split::kTest), 1u);
  EXPECT_EQ(m.count(m.class_index("big"), Split::kTrain), 20u);
  EXPECT_FALSE(m.warnings.empty());
}

TEST(Manifest, PerClassOverrideAndRealClassFirst) {
  TempDir tmp;
  for (const char* c : {"a", "real", "z"})
    for (int i = 0; i < 10; ++i) touch(tmp / c / (std::to_string(i) + ".png"));
  ManifestOptions o;
  o.default_split = {5, 5};
  o.per_class["z"] = {2, 1};
  o.real_class = "real";
  const DatasetManifest m = build_manifest(tmp.path(), o);
  EXPECT_EQ(m.classes, (std::vector<std::string>{"real", "a", "z"}));
  EXPECT_EQ(m.count(2, Split::kTrain), 2u);
  EXPECT_EQ(m.count(2, Split::kTest), 1u);
  o.real_class = "nope";
  EXPECT_THROW(build_manifest(tmp.path(), o), ManifestError);
}

TEST(Manifest, EmptyAndDuplicateClasses) {
  TempDir tmp;
  touch(tmp / "a" / "0.png");
  fs::create_directories(tmp / "empty");
  EXPECT_THROW(build_manifest(tmp.path(), {}), EmptyClassError);
  fs::remove(tmp / "empty");
  touch(tmp / "A" / "0.png");
  EXPECT_THROW(build_manifest(tmp.path(), {}), ManifestError);
  EXPECT_THROW(build_manifest(tmp / "missing", {}), ManifestError);
}

TEST(Manifest, RoundTripAndSubset) {
  TempDir tmp;
  for (const char* c : {"real", "x", "y"})
    for (int i = 0; i < 8; ++i) touch(tmp / c / (std::to_string(i) + ".png"));
  ManifestOptions o;
  o.default_split = {5, 3};
  o.real_class = "real";
  const DatasetManifest m = build_manifest(tmp.path(), o);
  m.save(tmp / "manifest.json");
  const DatasetManifest back = DatasetManifest::load(tmp / "manifest.json");
  EXPECT_EQ(back.to_json(), m.to_json());
  EXPECT_EQ(back.resolve(back.entries[0]), m.resolve(m.entries[0]));
  const auto j = m.to_json();
  EXPECT_TRUE(j.contains("classes"));
  EXPECT_TRUE(j.contains("seed"));
  EXPECT_TRUE(j["entries"][0].contains("path"));
  EXPECT_TRUE(j["entries"][0].contains("class"));
  EXPECT_TRUE(j["entries"][0].contains("split"));

  const DatasetManifest sub = m.subset({"y", "real"});
  EXPECT_EQ(sub.classes, (std::vector<std::string>{"y", "real"}));
  EXPECT_EQ(sub.entries.size(), 16u);
  for (const auto& e : sub.entries) EXPECT_TRUE(e.class_index == 0 || e.class_index == 1);
  EXPECT_THROW(m.subset({"x", "x"}), ManifestError);
  EXPECT_THROW(m.class_index("w"), ManifestError);
}

TEST(Manifest, MalformedFile) {
  TempDir tmp;
  write_text_file(tmp / "bad.json", "{\"classes\": 3}");
  EXPECT_THROW(DatasetManifest::load(tmp / "bad.json"), ManifestError);
  EXPECT_THROW(parse_split("validation"), ManifestError);
  EXPECT_EQ(parse_split(to_string(Split::kTest)), Split::kTest);
}

}  // namespace
}  // namespace genclass
