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

// genclass command-line interface.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "genclass/errors.hpp"
#include "genclass/imaging.hpp"
#include "genclass/metrics.hpp"
#include "genclass/model.hpp"
#include "genclass/prnu.hpp"
#include "genclass/synth.hpp"
#include "genclass/til.hpp"
#include "genclass/trainer.hpp"
#include "genclass/util.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace genclass;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

/// A command-line flag that overrides one key of the JSON config.
struct Override {
  CLI::Option* option;
  json::json_pointer key;
  std::function<json()> value;
};

struct Command {
  CLI::App* app = nullptr;
  std::vector<Override> overrides;
  std::function<int(const json&, const fs::path&, int)> run;

  template <typename T>
  void flag(const std::string& name, const std::string& key, const std::string& help) {
    auto storage = std::make_shared<T>();
    CLI::Option* opt = app->add_option(name, *storage, help);
    if constexpr (std::is_same_v<T, std::vector<std::string>> || std::is_same_v<T, std::vector<int>>)
      opt->delimiter(',');
    overrides.push_back({opt, json::json_pointer(key), [storage] { return json(*storage); }});
  }
};

struct Globals {
  std::string config_path;
  std::string out = "genclass-out";
  std::optional<std::uint64_t> seed;
  int workers = 1;
  std::string device = "cpu";
};

template <typename T>
T get_or(const json& cfg, const std::string& key, T fallback) {
  const json::json_pointer p(key);
  return cfg.contains(p) && !cfg.at(p).is_null() ? cfg.at(p).get<T>() : fallback;
}

std::string require(const json& cfg, const std::string& key) {
  const json::json_pointer p(key);
  if (!cfg.contains(p) || cfg.at(p).is_null() || cfg.at(p).get<std::string>().empty())
    throw ArgumentError("missing required setting " + key.substr(1));
  return cfg.at(p).get<std::string>();
}

std::optional<fs::path> data_root(const json& cfg) {
  if (cfg.contains("data_root") && cfg["data_root"].is_string() && !cfg["data_root"].get<std::string>().empty())
    return fs::path(cfg["data_root"].get<std::string>());
  if (const char* env = std::getenv("GENCLASS_DATA_ROOT"); env && *env) return fs::path(env);
  return std::nullopt;
}

DatasetManifest load_manifest(const json& cfg, const std::string& key = "/manifest") {
  return DatasetManifest::load(require(cfg, key), data_root(cfg));
}

TrainConfig train_config(const json& cfg) {
  TrainConfig tc = TrainConfig::from_json(cfg.value("train", json::object()));
  tc.seed = cfg.value("seed", tc.seed);
  return tc;
}

FinetuneConfig finetune_config(const json& cfg) {
  FinetuneConfig fc = FinetuneConfig::from_json(cfg.value("finetune", json::object()));
  fc.seed = cfg.value("seed", fc.seed);
  return fc;
}

void log(const std::string& line) { std::cerr << line << std::endl; }

void save_report(const metrics::EvalReport& report, const fs::path& out) {
  report.save(out);
  std::cerr << report.table();
  log("report written to " + (out / "report.json").string());
}

TrainHooks progress_hooks(const fs::path& out, const std::string& prefix) {
  auto steps = std::make_shared<std::ofstream>(out / (prefix + "_log.jsonl"));
  TrainHooks hooks;
  hooks.on_step = [steps](const StepRecord& r) { *steps << r.to_json().dump() << '\n'; };
  hooks.on_epoch = [out, steps, prefix](const Checkpoint& ck) {
    steps->flush();
    char name[32];
    std::snprintf(name, sizeof(name), "epoch_%03d.gck", ck.epoch);
    ck.save(out / "checkpoints" / name);
    log(prefix + ": epoch " + std::to_string(ck.epoch) + " checkpoint saved");
  };
  return hooks;
}

std::vector<fs::path> image_files(const fs::path& p) {
  if (!fs::is_directory(p)) return {p};
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(p)) {
    std::string ext = e.path().extension().string();
    for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (e.is_regular_file() && (ext == ".png" || ext == ".jpg" || ext == ".jpeg")) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw ArgumentError("no images found in " + p.string());
  return files;
}

int run_with_divergence_guard(const fs::path& out, const std::function<TrainResult()>& fn) {
  try {
    fn();
  } catch (const DivergenceError& e) {
    e.last_good().save(out / "last_good.gck");
    throw;
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// Commands

int cmd_ingest(const json& cfg, const fs::path& out, int) {
  const auto root = data_root(cfg);
  if (!root) throw ArgumentError("ingest needs --data-root or GENCLASS_DATA_ROOT");
  ManifestOptions mo;
  mo.default_split = {get_or<int>(cfg, "/train_per_class", 10000), get_or<int>(cfg, "/test_per_class", 100)};
  mo.seed = cfg.value("seed", std::uint64_t{0});
  mo.real_class = get_or<std::string>(cfg, "/real_class", "");
  const auto manifest = build_manifest(*root, mo);
  manifest.save(out / "manifest.json");
  for (const auto& [label, c] : manifest.split_counts())
    log(label + ": " + std::to_string(c.train) + " train / " + std::to_string(c.test) + " test");
  for (const auto& w : manifest.warnings) log("warning: " + w);
  log("manifest written to " + (out / "manifest.json").string());
  return kExitOk;
}

int cmd_synth(const json& cfg, const fs::path& out, int workers) {
  synth::SynthOptions so;
  so.train_per_class = get_or<int>(cfg, "/train_per_class", so.train_per_class);
  so.test_per_class = get_or<int>(cfg, "/test_per_class", so.test_per_class);
  so.size = get_or<int>(cfg, "/size", so.size);
  so.seed = cfg.value("seed", std::uint64_t{0});
  const auto names = synth::write_dataset(out, so, workers);
  log("wrote " + std::to_string(names.size()) + " classes to " + out.string());
  return kExitOk;
}

int cmd_train(const json& cfg, const fs::path& out, int workers) {
  const auto manifest = load_manifest(cfg);
  const TrainConfig tc = train_config(cfg);
  return run_with_divergence_guard(out, [&] {
    auto result = train(tc, manifest, progress_hooks(out, "train"), workers);
    result.checkpoint.save(out / "model.gck");
    log("model written to " + (out / "model.gck").string());
    return result;
  });
}

int cmd_train_binary(const json& cfg, const fs::path& out, int workers) {
  const auto manifest = load_manifest(cfg);
  const TrainConfig tc = train_config(cfg);
  const std::string real = get_or<std::string>(cfg, "/real_class", manifest.classes.front());
  auto fakes = get_or<std::vector<std::string>>(cfg, "/fake_classes", {});
  if (fakes.empty())
    for (const auto& c : manifest.classes)
      if (c != real) fakes.push_back(c);
  return run_with_divergence_guard(out, [&] {
    auto result = train_binary(tc, manifest, real, fakes, progress_hooks(out, "train_binary"), workers);
    result.checkpoint.save(out / "model.gck");
    log("binary model written to " + (out / "model.gck").string());
    return result;
  });
}

int cmd_finetune(const json& cfg, const fs::path& out, int workers) {
  const Checkpoint base = Checkpoint::load(require(cfg, "/model"));
  const auto manifest = load_manifest(cfg);
  FinetuneConfig fc = finetune_config(cfg);
  const std::string label = require(cfg, "/new_class");
  auto files = image_files(require(cfg, "/images"));
  if (files.size() > static_cast<std::size_t>(fc.new_class_count)) {
    std::mt19937_64 rng(fc.seed);
    std::shuffle(files.begin(), files.end(), rng);
    files.resize(static_cast<std::size_t>(fc.new_class_count));
    std::sort(files.begin(), files.end());
  }
  NewClassImages nc{label, {}, {}};
  for (const auto& f : files) {
    nc.residuals.push_back(srm::srm_residuals(load_and_preprocess(f, manifest.target_size)));
    nc.ids.push_back(f.string());
  }
  log("fine-tuning on " + std::to_string(files.size()) + " images of '" + label + "'");
  auto result = finetune(base, {nc}, manifest, fc, {}, workers);
  std::ofstream logf(out / "finetune_log.jsonl");
  for (const auto& r : result.log) logf << r.to_json().dump() << '\n';
  result.checkpoint.save(out / "model.gck");
  log("fine-tuned model written to " + (out / "model.gck").string());
  return kExitOk;
}

int cmd_build_til(const json& cfg, const fs::path& out, int) {
  EmbeddingModel model = Checkpoint::load(require(cfg, "/model")).restore();
  const auto manifest = load_manifest(cfg);
  const auto lib = til::build_til(model, manifest, get_or<std::uint64_t>(cfg, "/til_seed", cfg.value("seed", 0ull)));
  lib.save(out / "til.json");
  log("template library with " + std::to_string(lib.size()) + " classes written to " + (out / "til.json").string());
  return kExitOk;
}

int cmd_add_template(const json& cfg, const fs::path& out, int) {
  EmbeddingModel model = Checkpoint::load(require(cfg, "/model")).restore();
  const auto lib = til::TemplateLibrary::load(require(cfg, "/til"));
  const std::string image = require(cfg, "/image");
  const auto updated = til::add_class(lib, require(cfg, "/label"), load_and_preprocess(image), model, image);
  updated.save(out / "til.json");
  log("template library with " + std::to_string(updated.size()) + " classes written to " + (out / "til.json").string());
  return kExitOk;
}

int cmd_classify(const json& cfg, const fs::path& out, int workers) {
  EmbeddingModel model = Checkpoint::load(require(cfg, "/model")).restore();
  const auto lib = til::TemplateLibrary::load(require(cfg, "/til"));
  if (lib.model_version() != model.version())
    throw VersionError("library was built with model " + lib.model_version() + ", got " + model.version());
  const std::string image = get_or<std::string>(cfg, "/image", "");
  const std::string dir = get_or<std::string>(cfg, "/dir", "");
  if (image.empty() == dir.empty()) throw ArgumentError("give exactly one of --image or --dir");
  const auto files = image.empty() ? image_files(dir) : std::vector<fs::path>{image};
  std::vector<srm::ResidualTensor> residuals(files.size());
  parallel_for(files.size(), workers, [&](std::size_t i, int) {
    residuals[i] = srm::srm_residuals(load_and_preprocess(files[i]));
  });
  const auto preds = lib.classify_batch(embed_residuals(model, residuals, workers));
  json results = json::array();
  std::string csv = "image,label,distance\n";
  for (std::size_t i = 0; i < files.size(); ++i) {
    results.push_back({{"image", files[i].string()}, {"label", preds[i].label}, {"distances", preds[i].distances}});
    char dist[32];
    std::snprintf(dist, sizeof(dist), "%.9g", preds[i].best_distance());
    csv += files[i].string() + "," + preds[i].label + "," + dist + "\n";
  }
  const json doc = image.empty() ? results : results.front();
  write_text_file(out / "predictions.json", doc.dump(2) + "\n");
  write_text_file(out / "predictions.csv", csv);
  if (const auto path = get_or<std::string>(cfg, "/csv", ""); !path.empty()) write_text_file(path, csv);
  std::cout << doc.dump(2) << std::endl;
  return kExitOk;
}

int cmd_eval_binary(const json& cfg, const fs::path& out, int workers) {
  const Checkpoint ck = Checkpoint::load(require(cfg, "/model"));
  const auto manifest = load_manifest(cfg);
  metrics::BinaryOptions bo;
  bo.real_class = get_or<std::string>(cfg, "/real_class", manifest.classes.front());
  bo.fake_classes = get_or<std::vector<std::string>>(cfg, "/fake_classes", {});
  bo.workers = workers;
  std::vector<std::string> keep{bo.real_class};
  for (const auto& c : manifest.classes)
    if (c != bo.real_class && (bo.fake_classes.empty() || std::count(bo.fake_classes.begin(), bo.fake_classes.end(), c)))
      keep.push_back(c);
  DatasetManifest test_only = manifest.subset(keep);
  std::erase_if(test_only.entries, [](const ManifestEntry& e) { return e.split != Split::kTest; });
  const auto data = metrics::ExperimentData::load(test_only, workers);
  save_report(metrics::eval_binary(ck, data, bo), out);
  return kExitOk;
}

int cmd_eval_close_set(const json& cfg, const fs::path& out, int workers) {
  const Checkpoint ck = Checkpoint::load(require(cfg, "/model"));
  const auto manifest = load_manifest(cfg);
  const auto data = metrics::ExperimentData::load(manifest, workers);
  metrics::CloseSetOptions co{get_or<std::uint64_t>(cfg, "/til_seed", cfg.value("seed", 0ull)), workers};
  save_report(metrics::eval_close_set(ck, data, co), out);
  return kExitOk;
}

int cmd_eval_open_set(const json& cfg, const fs::path& out, int workers) {
  const auto manifest = load_manifest(cfg);
  metrics::OpenSetOptions oo;
  oo.train = train_config(cfg);
  oo.finetune = finetune_config(cfg);
  oo.finetune_sizes = get_or<std::vector<int>>(cfg, "/finetune_sizes", oo.finetune_sizes);
  oo.til_seed = get_or<std::uint64_t>(cfg, "/til_seed", cfg.value("seed", 0ull));
  oo.workers = workers;
  auto held = get_or<std::vector<std::string>>(cfg, "/hold_out", {});
  if (held.empty()) throw ArgumentError("eval-open-set needs --hold-out (a class name, a list, or 'all')");
  if (held.size() == 1 && held.front() == "all") {
    held.clear();
    for (std::size_t c = 1; c < manifest.classes.size(); ++c) held.push_back(manifest.classes[c]);
  }
  const auto data = metrics::ExperimentData::load(manifest, workers);
  save_report(metrics::eval_open_set(data, held, oo), out);
  return kExitOk;
}

int cmd_eval_scalability(const json& cfg, const fs::path& out, int workers) {
  const auto manifest = load_manifest(cfg);
  metrics::ScalabilityOptions so;
  so.train = train_config(cfg);
  so.finetune = finetune_config(cfg);
  so.til_seed = get_or<std::uint64_t>(cfg, "/til_seed", cfg.value("seed", 0ull));
  so.workers = workers;
  const auto base = get_or<std::vector<std::string>>(cfg, "/base_classes", {});
  const auto order = get_or<std::vector<std::string>>(cfg, "/new_classes", {});
  if (base.empty()) throw ArgumentError("eval-scalability needs --base-classes");
  const auto data = metrics::ExperimentData::load(manifest, workers);
  save_report(metrics::eval_scalability(data, base, order, so), out);
  return kExitOk;
}

int cmd_prnu_build(const json& cfg, const fs::path& out, int) {
  const auto manifest = load_manifest(cfg);
  const int k = get_or<int>(cfg, "/k", 5);
  const auto fps = metrics::build_class_fingerprints(manifest, k, cfg.value("seed", std::uint64_t{0}));
  for (const auto& f : fps) f.save(out / "fingerprints" / (f.class_label + ".gfp"));
  log(std::to_string(fps.size()) + " fingerprints (k = " + std::to_string(k) + ") written to " +
      (out / "fingerprints").string());
  return kExitOk;
}

int cmd_prnu_eval(const json& cfg, const fs::path& out, int workers) {
  const auto manifest = load_manifest(cfg);
  const std::string dir = get_or<std::string>(cfg, "/fingerprints", "");
  if (!dir.empty()) {
    std::vector<prnu::Fingerprint> fps;
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir))
      if (e.path().extension() == ".gfp") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) fps.push_back(prnu::Fingerprint::load(f));
    save_report(metrics::eval_prnu_fingerprints(manifest, fps, workers), out);
    return kExitOk;
  }
  metrics::PrnuOptions po;
  po.ks = get_or<std::vector<int>>(cfg, "/ks", po.ks);
  po.seed = cfg.value("seed", std::uint64_t{0});
  po.workers = workers;
  save_report(metrics::eval_prnu(manifest, po), out);
  return kExitOk;
}

int cmd_selftest(const json& cfg, const fs::path& out, int) {
  const auto results = oracles::run_selftest(cfg.value("seed", std::uint64_t{0}));
  json doc = json::array();
  bool all = true;
  for (const auto& r : results) {
    std::cerr << (r.passed ? "PASS " : "FAIL ") << r.name << " (" << r.seconds << " s): " << r.detail << '\n';
    doc.push_back({{"name", r.name}, {"passed", r.passed}, {"detail", r.detail}, {"seconds", r.seconds}});
    all = all && r.passed;
  }
  write_text_file(out / "selftest.json", doc.dump(2) + "\n");
  return all ? kExitOk : kExitRuntime;
}

// ---------------------------------------------------------------------------
// Wiring

void add_train_flags(Command& c) {
  c.flag<int>("--epochs", "/train/epochs", "training epochs");
  c.flag<double>("--lr", "/train/initial_lr", "initial learning rate");
  c.flag<double>("--lr-decay", "/train/lr_decay_per_epoch", "learning-rate decay per epoch");
  c.flag<int>("--batch-size", "/train/batch_size", "batch size");
  c.flag<double>("--lambda", "/train/loss/lambda", "center-loss weight");
  c.flag<int>("--depth", "/train/model/backbone_depth", "backbone depth (10, 18, 34 or 50)");
  c.flag<int>("--width", "/train/model/base_width", "channels of the first backbone stage");
  c.flag<int>("--stem-stride", "/train/model/stem_stride", "stride of the stem convolution");
  c.flag<int>("--embedding-dim", "/train/model/embedding_dim", "embedding dimension");
}

void add_finetune_flags(Command& c) {
  c.flag<int>("-k,--new-class-count", "/finetune/new_class_count", "images of each new class");
  c.flag<int>("--support", "/finetune/support_per_old_class", "support images per known class");
  c.flag<int>("--finetune-epochs", "/finetune/epochs", "fine-tuning epochs");
  c.flag<double>("--finetune-lr", "/finetune/lr", "fine-tuning learning rate");
  c.flag<double>("--margin", "/finetune/margin", "triplet margin");
  c.flag<std::string>("--mining", "/finetune/mining_strategy", "auto, all_valid or batch_semi_hard");
}

/// Config with defaults filled in, as written to resolved_config.json.
json resolve(const std::string& name, json cfg) {
  cfg["command"] = name;
  if (cfg.contains("train")) cfg["train"] = train_config(cfg).to_json();
  if (cfg.contains("finetune")) cfg["finetune"] = finetune_config(cfg).to_json();
  cfg.erase("config_hash");
  cfg["config_hash"] = hash_hex(cfg.dump());
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"genclass: SRM residual metric learning for generated-image classification"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config_path, "JSON config file (flags override its keys)");
  app.add_option("--out", g.out, "output directory (created if absent)");
  app.add_option("--seed", g.seed, "seed for every sampling decision");
  app.add_option("--workers", g.workers, "worker threads (1 = deterministic order)")->check(CLI::PositiveNumber);
  app.add_option("--device", g.device, "compute device (cpu only)");

  std::map<std::string, Command> commands;
  auto add = [&](const std::string& name, const std::string& help,
                 std::function<int(const json&, const fs::path&, int)> fn) -> Command& {
    Command& c = commands[name];
    c.app = app.add_subcommand(name, help);
    c.run = std::move(fn);
    return c;
  };

  {
    auto& c = add("ingest", "scan <data-root>/<class>/ and write a split manifest", cmd_ingest);
    c.flag<std::string>("--data-root", "/data_root", "dataset root (default: $GENCLASS_DATA_ROOT)");
    c.flag<std::string>("--real-class", "/real_class", "directory of the real-image class");
    c.flag<int>("--train", "/train_per_class", "training images per class");
    c.flag<int>("--test", "/test_per_class", "test images per class");
  }
  {
    auto& c = add("synth", "write the synthetic real + 4 artifact-class dataset into --out", cmd_synth);
    c.flag<int>("--train", "/train_per_class", "training images per class");
    c.flag<int>("--test", "/test_per_class", "test images per class");
    c.flag<int>("--size", "/size", "image side length");
  }
  {
    auto& c = add("train", "train the embedding network (cross entropy + center loss)", cmd_train);
    c.flag<std::string>("--manifest", "/manifest", "manifest JSON");
    c.flag<std::string>("--data-root", "/data_root", "dataset root override");
    add_train_flags(c);
  }
  {
    auto& c = add("train-binary", "train the real-vs-fake detector", cmd_train_binary);
    c.flag<std::string>("--manifest", "/manifest", "manifest JSON");
    c.flag<std::string>("--data-root", "/data_root", "dataset root override");
    c.flag<std::string>("--real-class", "/real_class", "real class (default: manifest class 0)");
    c.flag<std::vector<std::string>>("--fake-classes", "/fake_classes", "comma-separated fake classes");
    add_train_flags(c);
  }
  {
    auto& c = add("finetune", "triplet fine-tuning on a few images of a new class", cmd_finetune);
    c.flag<std::string>("--model", "/model", "base checkpoint");
    c.flag<std::string>("--manifest", "/manifest", "manifest of the known classes (support images)");
    c.flag<std::string>("--data-root", "/data_root", "dataset root override");
    c.flag<std::string>("--new-class", "/new_class", "label of the new class");
    c.flag<std::string>("--images", "/images", "image file or directory of the new class");
    add_finetune_flags(c);
  }
  {
    auto& c = add("build-til", "build the template library from a manifest's training split", cmd_build_til);
    c.flag<std::string>("--model", "/model", "checkpoint");
    c.flag<std::string>("--manifest", "/manifest", "manifest JSON");
    c.flag<std::string>("--data-root", "/data_root", "dataset root override");
    c.flag<std::uint64_t>("--til-seed", "/til_seed", "template selection seed (default: --seed)");
  }
  {
    auto& c = add("add-template", "add one class template to a library", cmd_add_template);
    c.flag<std::string>("--til", "/til", "template library JSON");
    c.flag<std::string>("--model", "/model", "checkpoint the library was built with");
    c.flag<std::string>("--label", "/label", "new class label");
    c.flag<std::string>("--image", "/image", "template image");
  }
  {
    auto& c = add("classify", "nearest-template labels for an image or a directory", cmd_classify);
    c.flag<std::string>("--til", "/til", "template library JSON");
    c.flag<std::string>("--model", "/model", "checkpoint");
    c.flag<std::string>("--image", "/image", "single image");
    c.flag<std::string>("--dir", "/dir", "directory of images");
    c.flag<std::string>("--csv", "/csv", "also write predictions as CSV to this path");
  }
  {
    auto& c = add("eval-binary", "AUROC of a binary checkpoint on the test split", cmd_eval_binary);
    c.flag<std::string>("--model", "/model", "binary checkpoint");
    c.flag<std::string>("--manifest", "/manifest", "manifest JSON");
    c.flag<std::string>("--data-root", "/data_root", "dataset root override");
    c.flag<std::string>("--real-class", "/real_class", "real class (default: manifest class 0)");
    c.flag<std::vector<std::string>>("--fake-classes", "/fake_classes", "comma-separated fake classes");
  }
  {
    auto& c = add("eval-close-set", "close-set Top-1 through the template library", cmd_eval_close_set);
    c.flag<std::string>("--model", "/model", "checkpoint");
    c.flag<std::string>("--manifest", "/manifest", "manifest JSON");
    c.flag<std::string>("--data-root", "/data_root", "dataset root override");
    c.flag<std::uint64_t>("--til-seed", "/til_seed", "template selection seed (default: --seed)");
  }
  {
    auto& c = add("eval-open-set", "leave-one-out open-set protocol with fine-tuning sweeps", cmd_eval_open_set);
    c.flag<std::string>("--manifest", "/manifest", "manifest JSON");
    c.flag<std::string>("--data-root", "/data_root", "dataset root override");
    c.flag<std::vector<std::string>>("--hold-out", "/hold_out", "held-out class(es), or 'all'");
    c.flag<std::vector<int>>("--finetune-sizes", "/finetune_sizes", "comma-separated k values");
    c.flag<std::uint64_t>("--til-seed", "/til_seed", "template selection seed (default: --seed)");
    add_train_flags(c);
    add_finetune_flags(c);
  }
  {
    auto& c = add("eval-scalability", "add new classes one by one with chained fine-tunes", cmd_eval_scalability);
    c.flag<std::string>("--manifest", "/manifest", "manifest JSON");
    c.flag<std::string>("--data-root", "/data_root", "dataset root override");
    c.flag<std::vector<std::string>>("--base-classes", "/base_classes", "comma-separated base classes");
    c.flag<std::vector<std::string>>("--new-classes", "/new_classes", "comma-separated classes in order");
    c.flag<std::uint64_t>("--til-seed", "/til_seed", "template selection seed (default: --seed)");
    add_train_flags(c);
    add_finetune_flags(c);
  }
  {
    auto& c = add("prnu-build", "PRNU fingerprints from k training images per class", cmd_prnu_build);
    c.flag<std::string>("--manifest", "/manifest", "manifest JSON");
    c.flag<std::string>("--data-root", "/data_root", "dataset root override");
    c.flag<int>("-k", "/k", "images averaged per fingerprint");
  }
  {
    auto& c = add("prnu-eval", "PRNU baseline Top-1 on the test split", cmd_prnu_eval);
    c.flag<std::string>("--manifest", "/manifest", "manifest JSON");
    c.flag<std::string>("--data-root", "/data_root", "dataset root override");
    c.flag<std::vector<int>>("--ks", "/ks", "comma-separated fingerprint sizes");
    c.flag<std::string>("--fingerprints", "/fingerprints", "evaluate saved fingerprints instead");
  }
  add("selftest", "run the oracle and property checks", cmd_selftest);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitUsage;
  }

  std::string name;
  Command* cmd = nullptr;
  for (auto& [n, c] : commands)
    if (c.app->parsed()) {
      name = n;
      cmd = &c;
    }

  try {
    if (g.device != "cpu") throw ConfigError("device '" + g.device + "' is not available; only 'cpu' is supported");
    json cfg = json::object();
    if (!g.config_path.empty()) {
      try {
        cfg = json::parse(read_text_file(g.config_path));
      } catch (const json::parse_error& e) {
        throw ConfigError("cannot parse " + g.config_path + ": " + e.what());
      }
    }
    for (const auto& o : cmd->overrides)
      if (o.option->count() > 0) cfg[o.key] = o.value();
    if (g.seed) cfg["seed"] = *g.seed;
    cfg["workers"] = g.workers;
    const json resolved = resolve(name, cfg);

    const fs::path out(g.out);
    fs::create_directories(out);
    write_text_file(out / "resolved_config.json", resolved.dump(2) + "\n");
    return cmd->run(resolved, out, g.workers);
  } catch (const genclass::Error& e) {
    std::cerr << e.name() << ": " << e.what() << std::endl;
    return kExitRuntime;
  } catch (const json::exception& e) {
    std::cerr << "ConfigError: " << e.what() << std::endl;
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "RuntimeError: " << e.what() << std::endl;
    return kExitRuntime;
  }
}
