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

#include "genclass/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "genclass/errors.hpp"
#include "genclass/util.hpp"

namespace genclass::metrics {

// ---------------------------------------------------------------------------
// Primitives

double auroc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size())
    throw ShapeError("auroc: " + std::to_string(scores.size()) + " scores vs " + std::to_string(labels.size()) +
                     " labels");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::uint64_t pos = 0, neg = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (std::isnan(scores[i])) throw ArgumentError("auroc: NaN score");
    if (labels[i] == 1)
      ++pos;
    else if (labels[i] == 0)
      ++neg;
    else
      throw LabelError("auroc labels must be 0 or 1, got " + std::to_string(labels[i]));
  }
  if (pos == 0 || neg == 0) throw DegenerateLabelsError("auroc needs both positive and negative samples");
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  std::uint64_t wins = 0, ties = 0, neg_below = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    std::uint64_t p = 0, q = 0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      (labels[order[j]] == 1 ? p : q) += 1;
      ++j;
    }
    wins += p * neg_below;
    ties += p * q;
    neg_below += q;
    i = j;
  }
  return (static_cast<double>(wins) + 0.5 * static_cast<double>(ties)) /
         (static_cast<double>(pos) * static_cast<double>(neg));
}

double top1_accuracy(std::span<const std::string> predictions, std::span<const std::string> truth) {
  if (predictions.size() != truth.size())
    throw ShapeError("top1: " + std::to_string(predictions.size()) + " predictions vs " +
                     std::to_string(truth.size()) + " labels");
  if (predictions.empty()) throw ShapeError("top1 needs at least one prediction");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hits += predictions[i] == truth[i];
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

std::string_view to_string(Protocol p) {
  switch (p) {
    case Protocol::kBinary: return "binary";
    case Protocol::kCloseSet: return "close_set";
    case Protocol::kOpenSet: return "open_set";
    case Protocol::kScalability: return "scalability";
    case Protocol::kPrnuBaseline: return "prnu_baseline";
  }
  return "unknown";
}

static Protocol parse_protocol(const std::string& s) {
  for (Protocol p : {Protocol::kBinary, Protocol::kCloseSet, Protocol::kOpenSet, Protocol::kScalability,
                     Protocol::kPrnuBaseline})
    if (to_string(p) == s) return p;
  throw FormatError("unknown protocol '" + s + "'");
}

// ---------------------------------------------------------------------------
// Reports

nlohmann::json SampleRecord::to_json() const {
  nlohmann::json j{{"condition", condition}, {"id", id}, {"truth", truth}, {"prediction", prediction}};
  j["score"] = score;
  return j;
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::json rows_json = nlohmann::json::array();
  for (const auto& r : rows) {
    nlohmann::json vals = nlohmann::json::array();
    for (const auto& v : r.values) vals.push_back(v ? nlohmann::json(*v) : nlohmann::json(nullptr));
    rows_json.push_back({{"name", r.name}, {"values", vals}});
  }
  nlohmann::json recs = nlohmann::json::array();
  for (const auto& r : records) recs.push_back(r.to_json());
  return {{"protocol", std::string(to_string(protocol))},
          {"config_hash", config_hash},
          {"seed", seed},
          {"config", config},
          {"columns", columns},
          {"rows", rows_json},
          {"per_class", per_class},
          {"aggregate", aggregate},
          {"records", recs}};
}

EvalReport EvalReport::from_json(const nlohmann::json& j) {
  EvalReport r;
  r.protocol = parse_protocol(j.at("protocol").get<std::string>());
  r.config_hash = j.value("config_hash", std::string());
  r.seed = j.value("seed", std::uint64_t{0});
  r.config = j.value("config", nlohmann::json::object());
  r.columns = j.value("columns", std::vector<std::string>{});
  for (const auto& row : j.value("rows", nlohmann::json::array())) {
    ReportRow rr{row.at("name").get<std::string>(), {}};
    for (const auto& v : row.at("values"))
      rr.values.push_back(v.is_null() ? std::optional<double>() : std::optional<double>(v.get<double>()));
    r.rows.push_back(std::move(rr));
  }
  r.per_class = j.value("per_class", std::map<std::string, double>{});
  r.aggregate = j.value("aggregate", std::map<std::string, double>{});
  for (const auto& rec : j.value("records", nlohmann::json::array()))
    r.records.push_back({rec.at("condition").get<std::string>(), rec.at("id").get<std::string>(),
                         rec.at("truth").get<std::string>(), rec.at("prediction").get<std::string>(),
                         rec.value("score", 0.0)});
  return r;
}

namespace {

std::string format_cell(const std::optional<double>& v) {
  if (!v) return "-";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", *v);
  return buf;
}

}  // namespace

std::string EvalReport::table() const {
  std::vector<std::vector<std::string>> cells;
  cells.push_back({"condition"});
  for (const auto& c : columns) cells.back().push_back(c);
  for (const auto& r : rows) {
    cells.push_back({r.name});
    for (const auto& v : r.values) cells.back().push_back(format_cell(v));
  }
  std::vector<std::size_t> width;
  for (const auto& line : cells)
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (width.size() <= i) width.push_back(0);
      width[i] = std::max(width[i], line[i].size());
    }
  std::ostringstream os;
  os << to_string(protocol) << " (config " << config_hash << ", seed " << seed << ")\n";
  for (std::size_t l = 0; l < cells.size(); ++l) {
    for (std::size_t i = 0; i < cells[l].size(); ++i) {
      const auto& s = cells[l][i];
      if (i == 0)
        os << s << std::string(width[i] - s.size(), ' ');
      else
        os << "  " << std::string(width[i] - s.size(), ' ') << s;
    }
    os << '\n';
    if (l == 0) {
      std::size_t total = 0;
      for (std::size_t i = 0; i < width.size(); ++i) total += width[i] + (i ? 2 : 0);
      os << std::string(total, '-') << '\n';
    }
  }
  return os.str();
}

std::string EvalReport::csv() const {
  auto quote = [](const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) q += (c == '"') ? std::string("\"\"") : std::string(1, c);
    return q + "\"";
  };
  std::ostringstream os;
  os << "condition";
  for (const auto& c : columns) os << ',' << quote(c);
  os << '\n';
  for (const auto& r : rows) {
    os << quote(r.name);
    for (const auto& v : r.values) {
      os << ',';
      if (v) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.17g", *v);
        os << buf;
      }
    }
    os << '\n';
  }
  return os.str();
}

void EvalReport::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  write_text_file(dir / "report.json", to_json().dump(2) + "\n");
  write_text_file(dir / "report.txt", table());
  write_text_file(dir / "report.csv", csv());
}

// ---------------------------------------------------------------------------
// Data

ExperimentData ExperimentData::load(const DatasetManifest& manifest, int workers) {
  ExperimentData d;
  d.manifest = manifest;
  d.train = load_split(manifest, Split::kTrain, workers);
  d.test = load_split(manifest, Split::kTest, workers);
  for (std::size_t i = 0; i < d.train.size(); ++i) d.train_index.emplace(d.train.ids[i], i);
  return d;
}

const srm::ResidualTensor& ExperimentData::train_residual(const std::string& path) const {
  const auto it = train_index.find(path);
  if (it == train_index.end()) throw ManifestError("'" + path + "' is not a training entry");
  return train.residuals[it->second];
}

ResidualDataset ExperimentData::restrict(Split split, const std::vector<std::string>& labels) const {
  std::vector<int> remap(manifest.classes.size(), -1);
  for (std::size_t i = 0; i < labels.size(); ++i) remap[manifest.class_index(labels[i])] = static_cast<int>(i);
  const ResidualDataset& src = split == Split::kTrain ? train : test;
  ResidualDataset out;
  for (std::size_t i = 0; i < src.size(); ++i)
    if (remap[src.labels[i]] >= 0) out.append(src.residuals[i], remap[src.labels[i]], src.ids[i]);
  return out;
}

std::vector<ManifestEntry> pick_train_images(const DatasetManifest& manifest, const std::string& label, int k,
                                             std::uint64_t seed) {
  auto entries = manifest.select(manifest.class_index(label), Split::kTrain);
  if (k < 1 || static_cast<std::size_t>(k) > entries.size())
    throw ConfigError("cannot pick " + std::to_string(k) + " training images of '" + label + "' (" +
                      std::to_string(entries.size()) + " available)");
  Fnv1a h;
  h.update(label);
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(h.digest()), static_cast<std::uint32_t>(h.digest() >> 32), 0x5e1ec7u};
  std::mt19937_64 rng(seq);
  std::shuffle(entries.begin(), entries.end(), rng);
  entries.resize(static_cast<std::size_t>(k));
  return entries;
}

namespace {

std::vector<float> embed_single(EmbeddingModel& model, const srm::ResidualTensor& r) {
  const srm::ResidualTensor* ptr = &r;
  const auto e = model.embed(make_batch<float>(std::span<const srm::ResidualTensor* const>(&ptr, 1)));
  return {e.data(), e.data() + e.cols()};
}

/// Template entries (label, manifest entry) chosen per label.
std::vector<std::pair<std::string, ManifestEntry>> choose_templates(const DatasetManifest& manifest,
                                                                    const std::vector<std::string>& labels,
                                                                    std::uint64_t seed) {
  const auto chosen = til::select_templates(manifest.subset(labels), seed);
  std::vector<std::pair<std::string, ManifestEntry>> out;
  for (std::size_t i = 0; i < labels.size(); ++i) out.emplace_back(labels[i], chosen[i]);
  return out;
}

til::TemplateLibrary til_from_templates(EmbeddingModel& model, const ExperimentData& data,
                                        const std::vector<std::pair<std::string, ManifestEntry>>& templates,
                                        std::uint64_t seed) {
  til::TemplateLibrary lib(model.version(), seed, model.config().embedding_dim);
  for (const auto& [label, entry] : templates)
    lib = lib.with_entry({label, embed_single(model, data.train_residual(entry.path)), entry.path});
  return lib;
}

struct SplitEval {
  double others = 0.0;
  double target = 0.0;
};

/// Classifies `others` and `target` test items; records go under `condition`.
SplitEval evaluate_two_column(EmbeddingModel& model, const til::TemplateLibrary& lib, const ResidualDataset& others,
                              const std::vector<std::string>& other_labels, const ResidualDataset& target,
                              const std::string& target_label, const std::string& condition, int workers,
                              std::vector<SampleRecord>& records) {
  SplitEval out;
  auto run = [&](const ResidualDataset& ds, auto truth_of) {
    const auto pred = classify_residuals(model, lib, ds.residuals, workers);
    std::vector<std::string> truth;
    for (std::size_t i = 0; i < ds.size(); ++i) {
      truth.push_back(truth_of(ds.labels[i]));
      records.push_back({condition, ds.ids[i], truth.back(), pred[i], 0.0});
    }
    return top1_accuracy(pred, truth);
  };
  if (others.size()) out.others = run(others, [&](int y) { return other_labels[y]; });
  if (target.size()) out.target = run(target, [&](int) { return target_label; });
  return out;
}

std::string condition_name(int k) { return k == 0 ? "before" : "k=" + std::to_string(k); }

Checkpoint finetune_from_data(const Checkpoint& base, const ExperimentData& data,
                              const std::vector<std::pair<std::string, std::vector<ManifestEntry>>>& new_images,
                              const std::vector<std::string>& new_labels, const FinetuneConfig& config) {
  std::set<std::string> exclude;
  for (const auto& [label, _] : new_images) exclude.insert(label);
  const SupportSelection support = select_support(base, data.manifest, exclude, config);
  ResidualDataset pool;
  std::vector<std::string> pool_classes = support.classes;
  for (std::size_t i = 0; i < support.entries.size(); ++i)
    pool.append(data.train_residual(support.entries[i].path), support.labels[i], support.entries[i].path);
  for (const auto& [label, entries] : new_images) {
    const int idx = static_cast<int>(pool_classes.size());
    pool_classes.push_back(label);
    for (const auto& e : entries) pool.append(data.train_residual(e.path), idx, e.path);
  }
  return finetune_on(base, pool, pool_classes, new_labels, config).checkpoint;
}

void check_fake_class(const DatasetManifest& manifest, const std::string& label) {
  if (!manifest.has_class(label)) throw ConfigError("class '" + label + "' is not in the manifest");
  if (manifest.classes.front() == label) throw ConfigError("'" + label + "' is the real class");
}

}  // namespace

til::TemplateLibrary build_til_from_data(EmbeddingModel& model, const ExperimentData& data,
                                         const std::vector<std::string>& labels, std::uint64_t seed, int) {
  return til_from_templates(model, data, choose_templates(data.manifest, labels, seed), seed);
}

std::vector<std::string> classify_residuals(EmbeddingModel& model, const til::TemplateLibrary& til,
                                            std::span<const srm::ResidualTensor> residuals, int workers) {
  std::vector<std::string> out;
  if (residuals.empty()) return out;
  const auto emb = embed_residuals(model, residuals, workers);
  for (auto& p : til.classify_batch(emb)) out.push_back(std::move(p.label));
  return out;
}

// ---------------------------------------------------------------------------
// Protocols

EvalReport eval_close_set(const Checkpoint& checkpoint, const ExperimentData& data, const CloseSetOptions& options) {
  for (const auto& c : data.manifest.classes)
    if (std::find(checkpoint.classes.begin(), checkpoint.classes.end(), c) == checkpoint.classes.end() &&
        std::find(checkpoint.finetuned_classes.begin(), checkpoint.finetuned_classes.end(), c) ==
            checkpoint.finetuned_classes.end())
      throw ConfigError("test class '" + c + "' was not seen in training");
  EmbeddingModel model = checkpoint.restore();
  const auto& labels = data.manifest.classes;
  const auto lib = build_til_from_data(model, data, labels, options.til_seed, options.workers);
  const auto pred = classify_residuals(model, lib, data.test.residuals, options.workers);

  EvalReport r;
  r.protocol = Protocol::kCloseSet;
  r.seed = options.til_seed;
  r.config = {{"til_seed", options.til_seed}, {"checkpoint_config_hash", checkpoint.config_hash},
              {"model_version", model.version()}};
  r.config_hash = hash_hex(r.config.dump());
  r.columns = {"top1"};
  std::vector<std::string> truth;
  for (std::size_t i = 0; i < data.test.size(); ++i) {
    truth.push_back(labels[data.test.labels[i]]);
    r.records.push_back({"close_set", data.test.ids[i], truth.back(), pred[i], 0.0});
  }
  for (const auto& c : labels) {
    std::vector<std::string> p, t;
    for (std::size_t i = 0; i < truth.size(); ++i)
      if (truth[i] == c) {
        p.push_back(pred[i]);
        t.push_back(truth[i]);
      }
    if (t.empty()) continue;
    r.per_class[c] = top1_accuracy(p, t);
    r.rows.push_back({c, {r.per_class[c]}});
  }
  r.aggregate["top1"] = top1_accuracy(pred, truth);
  r.rows.push_back({"overall", {r.aggregate["top1"]}});
  return r;
}

EvalReport eval_binary(const Checkpoint& checkpoint, const ExperimentData& data, const BinaryOptions& options) {
  const auto& m = data.manifest;
  const int real = m.class_index(options.real_class);
  std::vector<std::string> fakes = options.fake_classes;
  if (fakes.empty())
    for (const auto& c : m.classes)
      if (c != options.real_class) fakes.push_back(c);
  std::set<int> fake_idx;
  for (const auto& f : fakes) fake_idx.insert(m.class_index(f));

  std::vector<srm::ResidualTensor> items;
  std::vector<int> cls;
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < data.test.size(); ++i)
    if (data.test.labels[i] == real || fake_idx.count(data.test.labels[i])) {
      items.push_back(data.test.residuals[i]);
      cls.push_back(data.test.labels[i]);
      ids.push_back(data.test.ids[i]);
    }
  EmbeddingModel model = checkpoint.restore();
  const auto scores = fake_scores(model, items, options.workers);

  EvalReport r;
  r.protocol = Protocol::kBinary;
  r.config = {{"real_class", options.real_class}, {"fake_classes", fakes},
              {"checkpoint_config_hash", checkpoint.config_hash}, {"model_version", model.version()}};
  r.config_hash = hash_hex(r.config.dump());
  r.columns = {"auroc"};
  std::vector<int> y;
  for (std::size_t i = 0; i < items.size(); ++i) {
    y.push_back(cls[i] == real ? 0 : 1);
    r.records.push_back({m.classes[cls[i]], ids[i], std::to_string(y.back()), scores[i] >= 0.5 ? "1" : "0", scores[i]});
  }
  for (const auto& f : fakes) {
    const int fi = m.class_index(f);
    std::vector<double> s;
    std::vector<int> l;
    for (std::size_t i = 0; i < items.size(); ++i)
      if (cls[i] == real || cls[i] == fi) {
        s.push_back(scores[i]);
        l.push_back(y[i]);
      }
    r.per_class[f] = auroc(s, l);
    r.rows.push_back({f, {r.per_class[f]}});
  }
  r.aggregate["auroc"] = auroc(scores, y);
  r.rows.push_back({fakes.size() > 1 ? "mixed" : "overall", {r.aggregate["auroc"]}});
  return r;
}

EvalReport eval_open_set(const ExperimentData& data, const std::vector<std::string>& held_out,
                         const OpenSetOptions& options) {
  const auto& m = data.manifest;
  if (held_out.empty()) throw ConfigError("no held-out class given");
  for (const auto& h : held_out) check_fake_class(m, h);
  for (int k : options.finetune_sizes)
    if (k != 0 && k < 2) throw ConfigError("fine-tune sizes must be 0 or >= 2, got " + std::to_string(k));

  EvalReport r;
  r.protocol = Protocol::kOpenSet;
  r.seed = options.train.seed;
  r.config = {{"train", options.train.to_json()}, {"finetune", options.finetune.to_json()},
              {"finetune_sizes", options.finetune_sizes}, {"held_out", held_out},
              {"til_seed", options.til_seed}};
  r.config_hash = hash_hex(r.config.dump());
  r.columns = {"others_top1", "held_out_top1"};

  std::vector<int> conditions{0};
  for (int k : options.finetune_sizes)
    if (k != 0) conditions.push_back(k);
  std::map<std::string, std::vector<double>> sums;

  for (const auto& h : held_out) {
    std::vector<std::string> base_classes;
    for (const auto& c : m.classes)
      if (c != h) base_classes.push_back(c);
    const auto base = train_on(options.train, data.restrict(Split::kTrain, base_classes), base_classes).checkpoint;
    auto templates = choose_templates(m, base_classes, options.til_seed);
    templates.push_back(choose_templates(m, {h}, options.til_seed).front());
    const ResidualDataset others = data.restrict(Split::kTest, base_classes);
    const ResidualDataset target = data.restrict(Split::kTest, {h});

    for (int k : conditions) {
      Checkpoint ck = k == 0 ? base
                             : finetune_from_data(base, data, {{h, pick_train_images(m, h, k, options.finetune.seed)}},
                                                  {h}, options.finetune);
      EmbeddingModel model = ck.restore();
      const auto lib = til_from_templates(model, data, templates, options.til_seed);
      const std::string cond = condition_name(k);
      const SplitEval ev = evaluate_two_column(model, lib, others, base_classes, target, h, h + "/" + cond,
                                               options.workers, r.records);
      r.rows.push_back({h + " " + cond, {ev.others, ev.target}});
      r.per_class[h + "/" + cond + "/others_top1"] = ev.others;
      r.per_class[h + "/" + cond + "/held_out_top1"] = ev.target;
      sums[cond + "/others_top1"].push_back(ev.others);
      sums[cond + "/held_out_top1"].push_back(ev.target);
      if (k == 0 && std::find(options.finetune_sizes.begin(), options.finetune_sizes.end(), 0) !=
                        options.finetune_sizes.end())
        r.rows.push_back({h + " k=0", {ev.others, ev.target}});
    }
  }
  for (const auto& [key, v] : sums)
    r.aggregate["mean/" + key] = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  if (held_out.size() > 1)
    for (int k : conditions) {
      const std::string c = condition_name(k);
      r.rows.push_back({"mean " + c, {r.aggregate["mean/" + c + "/others_top1"], r.aggregate["mean/" + c + "/held_out_top1"]}});
    }
  return r;
}

EvalReport eval_scalability(const ExperimentData& data, const std::vector<std::string>& base_classes,
                            const std::vector<std::string>& new_class_order, const ScalabilityOptions& options) {
  const auto& m = data.manifest;
  const int k = options.finetune.new_class_count;
  if (k < 2) throw ConfigError("scalability needs k >= 2");
  if (base_classes.size() < 2) throw ConfigError("scalability needs at least 2 base classes");
  std::set<std::string> seen(base_classes.begin(), base_classes.end());
  for (const auto& c : base_classes)
    if (!m.has_class(c)) throw ConfigError("base class '" + c + "' is not in the manifest");
  for (const auto& c : new_class_order)
    if (!m.has_class(c) || !seen.insert(c).second) throw ConfigError("invalid or repeated new class '" + c + "'");

  EvalReport r;
  r.protocol = Protocol::kScalability;
  r.seed = options.train.seed;
  r.config = {{"train", options.train.to_json()}, {"finetune", options.finetune.to_json()},
              {"base_classes", base_classes}, {"new_class_order", new_class_order}, {"til_seed", options.til_seed}};
  r.config_hash = hash_hex(r.config.dump());
  r.columns = {"others_top1", "new_top1"};

  Checkpoint ck = train_on(options.train, data.restrict(Split::kTrain, base_classes), base_classes).checkpoint;
  auto templates = choose_templates(m, base_classes, options.til_seed);
  {
    EmbeddingModel model = ck.restore();
    const auto lib = til_from_templates(model, data, templates, options.til_seed);
    const SplitEval ev = evaluate_two_column(model, lib, data.restrict(Split::kTest, base_classes), base_classes, {},
                                             "", "base", options.workers, r.records);
    r.rows.push_back({"base", {ev.others, std::nullopt}});
    r.per_class["base/others_top1"] = ev.others;
  }

  std::vector<std::string> known = base_classes;
  std::vector<std::pair<std::string, std::vector<ManifestEntry>>> added;
  for (const auto& c : new_class_order) {
    added.emplace_back(c, pick_train_images(m, c, k, options.finetune.seed));
    ck = finetune_from_data(ck, data, added, {c}, options.finetune);
    templates.push_back(choose_templates(m, {c}, options.til_seed).front());
    EmbeddingModel model = ck.restore();
    const auto lib = til_from_templates(model, data, templates, options.til_seed);
    const std::string cond = "+" + c;
    const SplitEval ev = evaluate_two_column(model, lib, data.restrict(Split::kTest, known), known,
                                             data.restrict(Split::kTest, {c}), c, cond, options.workers, r.records);
    r.rows.push_back({cond, {ev.others, ev.target}});
    r.per_class[cond + "/others_top1"] = ev.others;
    r.per_class[cond + "/new_top1"] = ev.target;
    known.push_back(c);
  }
  double min_new = 1.0, min_other = 1.0;
  for (const auto& row : r.rows) {
    min_other = std::min(min_other, *row.values[0]);
    if (row.values[1]) min_new = std::min(min_new, *row.values[1]);
  }
  r.aggregate["min_others_top1"] = min_other;
  if (!new_class_order.empty()) r.aggregate["min_new_top1"] = min_new;
  return r;
}

namespace {

std::vector<prnu::Raster> test_residuals(const DatasetManifest& manifest, const std::vector<ManifestEntry>& test,
                                         int workers, const prnu::Denoiser& denoiser) {
  std::vector<prnu::Raster> out(test.size());
  parallel_for(test.size(), workers, [&](std::size_t i, int) {
    out[i] = prnu::extract_residual(load_and_preprocess(manifest.resolve(test[i]), manifest.target_size), denoiser);
  });
  return out;
}

/// Classifies `residuals` against `fps`; records go under `condition`.
double prnu_condition(const DatasetManifest& manifest, const std::vector<ManifestEntry>& test,
                      const std::vector<prnu::Raster>& residuals, std::span<const prnu::Fingerprint> fps,
                      const std::string& condition, int workers, EvalReport& r) {
  std::vector<std::string> pred(test.size()), truth(test.size());
  std::vector<double> score(test.size());
  parallel_for(test.size(), workers, [&](std::size_t i, int) {
    const auto p = prnu::prnu_classify(residuals[i], fps);
    pred[i] = p.label;
    score[i] = p.correlations.at(p.label);
  });
  for (std::size_t i = 0; i < test.size(); ++i) {
    truth[i] = manifest.classes[test[i].class_index];
    r.records.push_back({condition, test[i].path, truth[i], pred[i], score[i]});
  }
  for (const auto& label : manifest.classes) {
    std::vector<std::string> p, t;
    for (std::size_t i = 0; i < test.size(); ++i)
      if (truth[i] == label) {
        p.push_back(pred[i]);
        t.push_back(label);
      }
    if (!t.empty()) r.per_class[condition + "/" + label] = top1_accuracy(p, t);
  }
  const double top1 = top1_accuracy(pred, truth);
  r.aggregate[condition + "/top1"] = top1;
  return top1;
}

}  // namespace

std::vector<prnu::Fingerprint> build_class_fingerprints(const DatasetManifest& manifest, int k, std::uint64_t seed,
                                                        const prnu::Denoiser& denoiser) {
  std::vector<prnu::Fingerprint> fps;
  for (const auto& label : manifest.classes) {
    std::vector<ImageTensor> images;
    for (const auto& e : pick_train_images(manifest, label, k, seed))
      images.push_back(load_and_preprocess(manifest.resolve(e), manifest.target_size));
    fps.push_back(prnu::build_fingerprint(images, label, denoiser));
  }
  return fps;
}

EvalReport eval_prnu_fingerprints(const DatasetManifest& manifest, std::span<const prnu::Fingerprint> fingerprints,
                                  int workers, const prnu::Denoiser& denoiser) {
  if (fingerprints.empty()) throw ArgumentError("no fingerprints given");
  const auto test = manifest.select(Split::kTest);
  EvalReport r;
  r.protocol = Protocol::kPrnuBaseline;
  std::vector<std::string> labels;
  std::vector<int> ks;
  for (const auto& f : fingerprints) {
    labels.push_back(f.class_label);
    ks.push_back(f.k);
  }
  r.config = {{"fingerprint_labels", labels}, {"fingerprint_k", ks}, {"denoiser_id", denoiser.id()},
              {"test_images", test.size()}};
  r.config_hash = hash_hex(r.config.dump());
  r.columns = {"top1"};
  const auto residuals = test_residuals(manifest, test, workers, denoiser);
  r.rows.push_back({"PRNU", {prnu_condition(manifest, test, residuals, fingerprints, "fingerprints", workers, r)}});
  return r;
}

EvalReport eval_prnu(const DatasetManifest& manifest, const PrnuOptions& options, const prnu::Denoiser& denoiser) {
  if (options.ks.empty()) throw ConfigError("no fingerprint sizes given");
  const auto test = manifest.select(Split::kTest);
  EvalReport r;
  r.protocol = Protocol::kPrnuBaseline;
  r.seed = options.seed;
  r.config = {{"ks", options.ks}, {"seed", options.seed}, {"denoiser_id", denoiser.id()},
              {"test_images", test.size()}};
  r.config_hash = hash_hex(r.config.dump());
  r.columns = {"top1"};
  const auto residuals = test_residuals(manifest, test, options.workers, denoiser);
  for (int k : options.ks) {
    const auto fps = build_class_fingerprints(manifest, k, options.seed, denoiser);
    const double top1 =
        prnu_condition(manifest, test, residuals, fps, "k=" + std::to_string(k), options.workers, r);
    r.rows.push_back({"PRNU-" + std::to_string(k), {top1}});
  }
  return r;
}

}  // namespace genclass::metrics
