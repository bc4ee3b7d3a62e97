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

#include <random>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "genclass/errors.hpp"
#include "genclass/synth.hpp"
#include "genclass/til.hpp"
#include "genclass/util.hpp"
#include "oracles.hpp"

namespace genclass::til {
namespace {

std::vector<float> random_vector(int dim, std::mt19937_64& rng) {
  std::normal_distribution<float> d(0.0f, 1.0f);
  std::vector<float> v(dim);
  for (auto& x : v) x = d(rng);
  return v;
}

TemplateLibrary random_library(const std::vector<std::string>& labels, int dim, std::mt19937_64& rng) {
  TemplateLibrary lib("v1", 0, dim);
  for (const auto& l : labels) lib = lib.with_entry({l, random_vector(dim, rng), l + ".png"});
  return lib;
}

ModelConfig tiny_model() {
  ModelConfig c;
  c.backbone.depth = 10;
  c.backbone.base_width = 4;
  c.backbone.stem_stride = 2;
  c.embedding_dim = 16;
  return c;
}

/// Writes `per_class` synthetic images for each class and returns the manifest.
DatasetManifest image_manifest(const testing::TempDir& tmp, int classes, int per_class) {
  const auto& kinds = synth::synth_classes();
  for (int c = 0; c < classes; ++c)
    for (int i = 0; i < per_class; ++i)
      write_image(tmp / kinds[c].name / (std::to_string(i) + ".png"), synth::synth_image(kinds[c].artifact, 1, c, i, 128));
  ManifestOptions o;
  o.default_split = {per_class, 0};
  o.real_class = "real";
  return build_manifest(tmp.path(), o);
}

TEST(Library, ExactMatchHasZeroDistance) {
  std::mt19937_64 rng(1);
  const auto lib = random_library({"BEGAN", "Glow", "PGGAN"}, 512, rng);
  const auto p = lib.classify(lib.entries()[1].embedding);
  EXPECT_EQ(p.label, "Glow");
  EXPECT_EQ(p.best_distance(), 0.0);
  EXPECT_EQ(p.distances.size(), 3u);
}

TEST(Library, NearerTemplateWins) {
  TemplateLibrary lib("v", 0, 2);
  lib = lib.with_entry({"far", {2.0f, 0.0f}, ""}).with_entry({"near", {0.0f, 1.0f}, ""});
  const std::vector<float> q{0.0f, 0.0f};
  const auto p = lib.classify(q);
  EXPECT_EQ(p.label, "near");
  EXPECT_DOUBLE_EQ(p.distances.at("near"), 1.0);
  EXPECT_DOUBLE_EQ(p.distances.at("far"), 2.0);
  const auto o = oracles::brute_force_nearest({"far", "near"}, {{2.0f, 0.0f}, {0.0f, 1.0f}}, q);
  EXPECT_EQ(o.label, p.label);
  EXPECT_EQ(o.distance, p.best_distance());
}

TEST(Library, TiesGoToSmallestLabel) {
  TemplateLibrary lib("v", 0, 1);
  lib = lib.with_entry({"zeta", {1.0f}, ""}).with_entry({"alpha", {-1.0f}, ""});
  EXPECT_EQ(lib.classify(std::vector<float>{0.0f}).label, "alpha");
}

TEST(Library, ScalingInvariance) {
  std::mt19937_64 rng(2);
  const auto lib = random_library({"a", "b", "c", "d"}, 32, rng);
  TemplateLibrary scaled("v1", 0, 32);
  for (auto e : lib.entries()) {
    for (auto& x : e.embedding) x *= 3.0f;
    scaled = scaled.with_entry(e);
  }
  for (int i = 0; i < 50; ++i) {
    auto q = random_vector(32, rng);
    const auto label = lib.classify(q).label;
    for (auto& x : q) x *= 3.0f;
    EXPECT_EQ(scaled.classify(q).label, label);
  }
  EXPECT_TRUE(oracles::check_til_scaling(3).passed);
}

TEST(Library, MatchesBruteForce) {
  const auto r = oracles::check_til_nearest(4);
  EXPECT_TRUE(r.passed) << r.detail;
}

TEST(Library, BatchMatchesSequentialCalls) {
  std::mt19937_64 rng(5);
  const auto lib = random_library({"a", "b", "c", "d", "e", "f", "g", "h"}, 16, rng);
  EmbeddingMatrix q(100, 16);
  for (int i = 0; i < 100; ++i) {
    const auto v = random_vector(16, rng);
    for (int j = 0; j < 16; ++j) q(i, j) = v[j];
  }
  const auto batch = lib.classify_batch(q);
  ASSERT_EQ(batch.size(), 100u);
  for (int i = 0; i < 100; ++i) {
    const std::vector<float> row(q.row(i).data(), q.row(i).data() + 16);
    const auto single = lib.classify(row);
    EXPECT_EQ(batch[i].label, single.label);
    EXPECT_EQ(batch[i].distances, single.distances);
  }
}

TEST(Library, TemplatesClassifyAsThemselves) {
  std::mt19937_64 rng(6);
  const std::vector<std::string> labels{"BEGAN", "CelebA", "DCGAN", "Glow", "IntroVAE", "PGGAN", "StyleGAN", "WGANGP"};
  const auto lib = random_library(labels, 512, rng);
  EmbeddingMatrix q(8, 512);
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 512; ++j) q(i, j) = lib.entries()[i].embedding[j];
  const auto preds = lib.classify_batch(q);
  for (int i = 0; i < 8; ++i) {
    EXPECT_EQ(preds[i].label, labels[i]);
    EXPECT_EQ(preds[i].best_distance(), 0.0);
  }
}

TEST(Library, AddingFartherClassKeepsPrediction) {
  std::mt19937_64 rng(7);
  const auto lib = random_library({"a", "b", "c"}, 8, rng);
  const auto bigger = lib.with_entry({"d", random_vector(8, rng), ""});
  for (int i = 0; i < 200; ++i) {
    const auto q = random_vector(8, rng);
    const auto before = lib.classify(q);
    const auto after = bigger.classify(q);
    if (before.best_distance() < after.distances.at("d")) EXPECT_EQ(after.label, before.label);
  }
}

TEST(Library, PermutationInvariance) {
  std::mt19937_64 rng(8);
  const auto lib = random_library({"a", "b", "c", "d"}, 8, rng);
  TemplateLibrary reversed("v1", 0, 8);
  for (auto it = lib.entries().rbegin(); it != lib.entries().rend(); ++it) reversed = reversed.with_entry(*it);
  for (int i = 0; i < 100; ++i) {
    const auto q = random_vector(8, rng);
    EXPECT_EQ(lib.classify(q).label, reversed.classify(q).label);
  }
}

TEST(Library, Errors) {
  TemplateLibrary empty("v", 0, 4);
  EXPECT_THROW(empty.classify(std::vector<float>(4)), EmptyLibraryError);
  const auto lib = empty.with_entry({"a", std::vector<float>(4, 1.0f), ""});
  EXPECT_THROW(lib.classify(std::vector<float>(3)), ShapeError);
  EXPECT_THROW(lib.with_entry({"a", std::vector<float>(4), ""}), DuplicateClassError);
  EXPECT_THROW(lib.with_entry({"b", std::vector<float>(5), ""}), ShapeError);
  EXPECT_EQ(empty.size(), 0u);
}

TEST(Library, SaveLoadRoundTrip) {
  testing::TempDir tmp;
  std::mt19937_64 rng(9);
  const auto lib = random_library({"x", "y", "z"}, 512, rng);
  lib.save(tmp / "til.json");
  EXPECT_TRUE(std::filesystem::exists(tmp / "til.json.bin"));
  EXPECT_EQ(std::filesystem::file_size(tmp / "til.json.bin"), 3u * 512u * 4u);
  const auto back = TemplateLibrary::load(tmp / "til.json");
  EXPECT_EQ(back.model_version(), "v1");
  ASSERT_EQ(back.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(back.entries()[i].class_label, lib.entries()[i].class_label);
    EXPECT_EQ(back.entries()[i].embedding, lib.entries()[i].embedding);
    EXPECT_EQ(back.entries()[i].source_image_id, lib.entries()[i].source_image_id);
  }
  const auto j = nlohmann::json::parse(read_text_file(tmp / "til.json"));
  EXPECT_TRUE(j.contains("created_seed"));
  EXPECT_TRUE(j["entries"][1].contains("embedding_file_offset"));
  std::filesystem::remove(tmp / "til.json.bin");
  EXPECT_THROW(TemplateLibrary::load(tmp / "til.json"), FormatError);
}

TEST(BuildTil, OneEntryPerClassAndDeterministic) {
  testing::TempDir tmp;
  const auto m = image_manifest(tmp, 3, 3);
  EmbeddingModel model(tiny_model(), 1);
  const auto a = build_til(model, m, 4);
  const auto b = build_til(model, m, 4);
  ASSERT_EQ(a.size(), 3u);
  EXPECT_EQ(a.labels(), m.classes);
  EXPECT_EQ(a.model_version(), model.version());
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(a.entries()[i].source_image_id, b.entries()[i].source_image_id);
  const auto chosen = select_templates(m, 4);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(a.entries()[i].source_image_id, chosen[i].path);
}

TEST(BuildTil, SingleClassLibraryAlwaysAnswersThatClass) {
  testing::TempDir tmp;
  const auto m = image_manifest(tmp, 1, 2);
  EmbeddingModel model(tiny_model(), 1);
  const auto lib = build_til(model, m, 0);
  ASSERT_EQ(lib.size(), 1u);
  std::mt19937_64 rng(1);
  EXPECT_EQ(lib.classify(random_vector(16, rng)).label, "real");
}

TEST(BuildTil, EmptyClassIsRejected) {
  testing::TempDir tmp;
  auto m = image_manifest(tmp, 2, 2);
  std::erase_if(m.entries, [](const ManifestEntry& e) { return e.class_index == 1; });
  EmbeddingModel model(tiny_model(), 1);
  EXPECT_THROW(build_til(model, m, 0), EmptyClassError);
}

TEST(AddClass, GrowsAndSelfMatches) {
  testing::TempDir tmp;
  const auto m = image_manifest(tmp, 2, 2);
  EmbeddingModel model(tiny_model(), 1);
  const auto lib = build_til(model, m, 0);
  const ImageTensor img = synth::synth_image(synth::Artifact::kBlocking, 1, 7, 0, 128);
  const auto bigger = add_class(lib, "StyleGAN2", img, model, "new.png");
  EXPECT_EQ(bigger.size(), lib.size() + 1);
  EXPECT_EQ(lib.size(), 2u);
  for (std::size_t i = 0; i < lib.size(); ++i) EXPECT_EQ(bigger.entries()[i].embedding, lib.entries()[i].embedding);
  const srm::ResidualTensor r = srm::srm_residuals(img);
  const std::vector<const srm::ResidualTensor*> one{&r};
  const auto e = model.embed(make_batch<float>(one));
  const std::vector<float> q(e.row(0).data(), e.row(0).data() + e.cols());
  const auto p = bigger.classify(q);
  EXPECT_EQ(p.label, "StyleGAN2");
  EXPECT_EQ(p.best_distance(), 0.0);
  EXPECT_THROW(add_class(lib, "real", img, model), DuplicateClassError);
  EmbeddingModel other(tiny_model(), 2);
  EXPECT_THROW(add_class(lib, "new", img, other), VersionError);
}

}  // namespace
}  // namespace genclass::til
