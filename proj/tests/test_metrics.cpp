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

#include <cmath>
#include <limits>
#include <random>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "genclass/errors.hpp"
#include "genclass/metrics.hpp"
#include "oracles.hpp"

namespace genclass::metrics {
namespace {

using testing::tiny_finetune_config;
using testing::tiny_train_config;
using testing::toy_experiment;

TEST(Auroc, Examples) {
  const std::vector<int> y{0, 0, 1, 1};
  EXPECT_EQ(auroc(std::vector<double>{0.1, 0.2, 0.8, 0.9}, y), 1.0);
  EXPECT_EQ(auroc(std::vector<double>{0.5, 0.5, 0.5, 0.5}, y), 0.5);
  const std::vector<double> s{0.1, 0.4, 0.35, 0.8};
  EXPECT_EQ(auroc(s, y), 0.75);
  EXPECT_EQ(auroc(s, y), oracles::brute_force_auroc(s, y));
}

TEST(Auroc, MatchesPairCounting) {
  const auto r = oracles::check_auroc(41);
  EXPECT_TRUE(r.passed) << r.detail;
  std::mt19937_64 rng(42);
  std::vector<double> s(1000);
  std::vector<int> y(1000);
  for (int i = 0; i < 1000; ++i) {
    s[i] = static_cast<double>(rng() % 50);
    y[i] = static_cast<int>(rng() % 2);
  }
  EXPECT_EQ(auroc(s, y), oracles::brute_force_auroc(s, y));
}

TEST(Auroc, InvariantUnderIncreasingTransforms) {
  const auto r = oracles::check_auroc_monotone(43);
  EXPECT_TRUE(r.passed) << r.detail;
  const std::vector<double> s{0.3, -1.0, 2.0, 0.7, 0.7, 5.0};
  const std::vector<int> y{1, 0, 1, 0, 1, 0};
  std::vector<double> t;
  for (double v : s) t.push_back(std::exp(3.0 * v) + 1.0);
  EXPECT_EQ(auroc(s, y), auroc(t, y));
}

TEST(Auroc, Errors) {
  EXPECT_THROW(auroc(std::vector<double>{0.1, 0.2}, std::vector<int>{1, 1}), DegenerateLabelsError);
  EXPECT_THROW(auroc(std::vector<double>{0.1}, std::vector<int>{1, 0}), ShapeError);
  EXPECT_THROW(auroc(std::vector<double>{0.1, 0.2}, std::vector<int>{0, 2}), LabelError);
  EXPECT_THROW(auroc(std::vector<double>{0.1, std::numeric_limits<double>::quiet_NaN()}, std::vector<int>{0, 1}),
               ArgumentError);
}

TEST(Top1, Examples) {
  const std::vector<std::string> t{"a", "b", "c"};
  EXPECT_EQ(top1_accuracy(t, t), 1.0);
  EXPECT_EQ(top1_accuracy(std::vector<std::string>{"b", "c", "a"}, t), 0.0);
  std::vector<std::string> truth(100, "x"), pred(100, "x");
  pred[17] = "y";
  EXPECT_EQ(top1_accuracy(pred, truth), 0.99);
  EXPECT_EQ(top1_accuracy(pred, truth) * 100, 99.0);
  EXPECT_THROW(top1_accuracy(std::vector<std::string>{"a"}, t), ShapeError);
  EXPECT_THROW(top1_accuracy(std::vector<std::string>{}, std::vector<std::string>{}), ShapeError);
}

EvalReport sample_report() {
  EvalReport r;
  r.protocol = Protocol::kOpenSet;
  r.config_hash = "deadbeef";
  r.seed = 3;
  r.config = {{"k", 20}};
  r.columns = {"others_top1", "held_out_top1"};
  r.rows = {{"Glow before", {0.95, 0.5}}, {"base", {1.0, std::nullopt}}};
  r.per_class = {{"Glow", 0.5}};
  r.aggregate = {{"top1", 0.9}};
  r.records = {{"before", "img/1.png", "Glow", "BEGAN", 0.25}, {"before", "img/2.png", "Glow", "Glow", 0.0}};
  return r;
}

TEST(Report, JsonRoundTrip) {
  const EvalReport r = sample_report();
  const EvalReport back = EvalReport::from_json(r.to_json());
  EXPECT_EQ(back.to_json(), r.to_json());
  EXPECT_EQ(back.records, r.records);
  EXPECT_EQ(r.to_json()["protocol"], "open_set");
  EXPECT_FALSE(back.rows[1].values[1].has_value());
}

TEST(Report, TableAndCsv) {
  const EvalReport r = sample_report();
  const std::string table = r.table();
  EXPECT_NE(table.find("Glow before"), std::string::npos);
  EXPECT_NE(table.find("0.9500"), std::string::npos);
  EXPECT_NE(table.find("-"), std::string::npos);
  const std::string csv = r.csv();
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "condition,others_top1,held_out_top1");
  testing::TempDir tmp;
  r.save(tmp.path());
  for (const char* f : {"report.json", "report.txt", "report.csv"}) EXPECT_TRUE(std::filesystem::exists(tmp / f)) << f;
}

TEST(Protocols, Names) {
  EXPECT_EQ(to_string(Protocol::kBinary), "binary");
  EXPECT_EQ(to_string(Protocol::kCloseSet), "close_set");
  EXPECT_EQ(to_string(Protocol::kScalability), "scalability");
  EXPECT_EQ(to_string(Protocol::kPrnuBaseline), "prnu_baseline");
}

TEST(CloseSet, TemplatesAsTestItemsScorePerfectly) {
  auto d = toy_experiment(3, 6, 0);
  const auto trained = train_on(tiny_train_config(), d.train, d.manifest.classes).checkpoint;
  const auto templates = til::select_templates(d.manifest, 7);
  for (const auto& e : templates) {
    auto entry = e;
    entry.split = Split::kTest;
    d.manifest.entries.push_back(entry);
    d.test.append(d.train_residual(e.path), e.class_index, e.path);
  }
  const auto r = eval_close_set(trained, d, {7, 1});
  EXPECT_EQ(r.aggregate.at("top1"), 1.0);
  for (const auto& c : d.manifest.classes) EXPECT_EQ(r.per_class.at(c), 1.0);
  EXPECT_EQ(r.records.size(), 3u);
}

TEST(CloseSet, AggregateIsFunctionOfRecords) {
  const auto d = toy_experiment(3, 10, 6);
  const auto trained = train_on(tiny_train_config(), d.train, d.manifest.classes).checkpoint;
  const auto r = eval_close_set(trained, d, {1, 2});
  ASSERT_EQ(r.records.size(), 18u);
  std::vector<std::string> p, t;
  for (const auto& rec : r.records) {
    p.push_back(rec.prediction);
    t.push_back(rec.truth);
  }
  EXPECT_EQ(r.aggregate.at("top1"), top1_accuracy(p, t));
  const auto again = eval_close_set(trained, d, {1, 1});
  EXPECT_EQ(again.records, r.records);
}

TEST(Binary, PerTypeAndMixedRows) {
  auto d = toy_experiment(3, 12, 5);
  auto pooled = d.train;
  for (auto& y : pooled.labels) y = y == 0 ? 0 : 1;
  TrainConfig tc = tiny_train_config();
  tc.epochs = 3;
  const auto trained = train_binary_on(tc, pooled).checkpoint;
  const auto r = eval_binary(trained, d, {"real", {}, 1});
  ASSERT_EQ(r.rows.size(), 3u);
  EXPECT_EQ(r.rows.back().name, "mixed");
  std::vector<double> s;
  std::vector<int> y;
  for (const auto& rec : r.records) {
    s.push_back(rec.score);
    y.push_back(rec.truth == "1" ? 1 : 0);
  }
  EXPECT_EQ(r.aggregate.at("auroc"), auroc(s, y));
}

TEST(Binary, OneClassTestSetIsDegenerate) {
  auto d = toy_experiment(2, 6, 3);
  auto pooled = d.train;
  const auto trained = train_binary_on(tiny_train_config(), pooled).checkpoint;
  std::erase_if(d.manifest.entries, [](const ManifestEntry& e) { return e.split == Split::kTest && e.class_index == 1; });
  ResidualDataset reals;
  for (std::size_t i = 0; i < d.test.size(); ++i)
    if (d.test.labels[i] == 0) reals.append(d.test.residuals[i], 0, d.test.ids[i]);
  d.test = reals;
  EXPECT_THROW(eval_binary(trained, d, {"real", {}, 1}), DegenerateLabelsError);
}

TEST(OpenSet, BeforeAndAfterRows) {
  const auto d = toy_experiment(3, 10, 4);
  OpenSetOptions o;
  o.train = tiny_train_config();
  o.finetune = tiny_finetune_config();
  o.finetune_sizes = {0, 4};
  const auto r = eval_open_set(d, {"gen2"}, o);
  ASSERT_EQ(r.rows.size(), 3u);
  EXPECT_EQ(r.rows[0].name, "gen2 before");
  EXPECT_EQ(r.rows[1].name, "gen2 k=0");
  EXPECT_EQ(r.rows[1].values, r.rows[0].values);
  EXPECT_EQ(r.rows[2].name, "gen2 k=4");
  EXPECT_EQ(r.columns, (std::vector<std::string>{"others_top1", "held_out_top1"}));
  EXPECT_TRUE(r.aggregate.count("mean/k=4/held_out_top1"));
}

TEST(OpenSet, Errors) {
  const auto d = toy_experiment(3, 4, 2);
  OpenSetOptions o;
  o.train = tiny_train_config();
  o.finetune = tiny_finetune_config();
  EXPECT_THROW(eval_open_set(d, {"gen7"}, o), ConfigError);
  EXPECT_THROW(eval_open_set(d, {"real"}, o), ConfigError);
  o.finetune_sizes = {1};
  EXPECT_THROW(eval_open_set(d, {"gen1"}, o), ConfigError);
}

TEST(Scalability, EmptyOrderHasOnlyBaseRow) {
  const auto d = toy_experiment(3, 6, 2);
  ScalabilityOptions o;
  o.train = tiny_train_config();
  o.finetune = tiny_finetune_config();
  const auto r = eval_scalability(d, {"real", "gen1"}, {}, o);
  ASSERT_EQ(r.rows.size(), 1u);
  EXPECT_EQ(r.rows[0].name, "base");
}

TEST(Scalability, ChainedAdditions) {
  const auto d = toy_experiment(4, 8, 3);
  ScalabilityOptions o;
  o.train = tiny_train_config();
  o.finetune = tiny_finetune_config();
  const auto r = eval_scalability(d, {"real", "gen1"}, {"gen2", "gen3"}, o);
  ASSERT_EQ(r.rows.size(), 3u);
  EXPECT_EQ(r.rows[1].name, "+gen2");
  EXPECT_EQ(r.rows[2].name, "+gen3");
  EXPECT_TRUE(r.rows[2].values[1].has_value());
  EXPECT_TRUE(r.aggregate.count("min_new_top1"));
}

TEST(PickTrainImages, SeededAndNested) {
  const auto d = toy_experiment(2, 20, 0);
  const auto five = pick_train_images(d.manifest, "gen1", 5, 3);
  const auto ten = pick_train_images(d.manifest, "gen1", 10, 3);
  for (std::size_t i = 0; i < five.size(); ++i) EXPECT_EQ(five[i].path, ten[i].path);
  EXPECT_EQ(pick_train_images(d.manifest, "gen1", 5, 3)[0].path, five[0].path);
  EXPECT_THROW(pick_train_images(d.manifest, "gen1", 21, 3), ConfigError);
}

}  // namespace
}  // namespace genclass::metrics
