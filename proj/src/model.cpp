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

#include "genclass/model.hpp"

#include <algorithm>
#include <fstream>

#include "genclass/util.hpp"

namespace genclass {

namespace {
constexpr char kCheckpointMagic[8] = {'G', 'E', 'N', 'C', 'K', 'P', 'T', '1'};
}

nlohmann::json ModelConfig::to_json() const {
  nlohmann::json j;
  j["backbone_depth"] = backbone.depth;
  j["base_width"] = backbone.base_width;
  j["stem_stride"] = backbone.stem_stride;
  j["embedding_dim"] = embedding_dim;
  j["num_classes"] = num_classes ? nlohmann::json(*num_classes) : nlohmann::json(nullptr);
  j["input_size"] = input_size;
  j["srm_bank_id"] = srm_bank_id;
  return j;
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.backbone.depth = j.value("backbone_depth", c.backbone.depth);
  c.backbone.base_width = j.value("base_width", c.backbone.base_width);
  c.backbone.stem_stride = j.value("stem_stride", c.backbone.stem_stride);
  c.embedding_dim = j.value("embedding_dim", c.embedding_dim);
  if (j.contains("num_classes") && !j["num_classes"].is_null()) c.num_classes = j["num_classes"].get<int>();
  c.input_size = j.value("input_size", c.input_size);
  c.srm_bank_id = j.value("srm_bank_id", c.srm_bank_id);
  return c;
}

template <typename T>
std::string BasicEmbeddingModel<T>::version() const {
  auto& self = const_cast<BasicEmbeddingModel&>(*this);
  Fnv1a h;
  h.update(config_.to_json().dump());
  for (const auto& entry : self.state()) {
    h.update(entry.name);
    for (T v : *entry.values) {
      const float f = static_cast<float>(v);
      h.update(&f, sizeof(f));
    }
  }
  return h.hex();
}

template class BasicEmbeddingModel<float>;
template class BasicEmbeddingModel<double>;

template <typename T>
nn::Tensor<T> make_batch(std::span<const srm::ResidualTensor* const> residuals) {
  if (residuals.empty()) throw ShapeError("empty batch");
  const auto& first = *residuals.front();
  nn::Tensor<T> batch(static_cast<int>(residuals.size()), first.channels, first.height, first.width);
  for (std::size_t i = 0; i < residuals.size(); ++i) {
    const auto& r = *residuals[i];
    if (r.channels != first.channels || r.height != first.height || r.width != first.width)
      throw ShapeError("residual maps in a batch must share a shape");
    std::copy(r.values.begin(), r.values.end(), batch.sample(static_cast<int>(i)));
  }
  return batch;
}

template nn::Tensor<float> make_batch<float>(std::span<const srm::ResidualTensor* const>);
template nn::Tensor<double> make_batch<double>(std::span<const srm::ResidualTensor* const>);

EmbeddingMatrix embed_residuals(const EmbeddingModel& model, std::span<const srm::ResidualTensor> residuals,
                                int workers, int chunk) {
  const int dim = model.config().embedding_dim;
  EmbeddingMatrix out(static_cast<Eigen::Index>(residuals.size()), dim);
  if (residuals.empty()) return out;
  chunk = std::max(chunk, 1);
  const std::size_t chunks = (residuals.size() + chunk - 1) / chunk;
  const int lanes = std::max(1, std::min<int>(workers, static_cast<int>(chunks)));
  std::vector<EmbeddingModel> copies(lanes, model);
  parallel_for(chunks, lanes, [&](std::size_t c, int lane) {
    const std::size_t begin = c * chunk;
    const std::size_t end = std::min(residuals.size(), begin + chunk);
    std::vector<const srm::ResidualTensor*> ptrs;
    for (std::size_t i = begin; i < end; ++i) ptrs.push_back(&residuals[i]);
    auto batch = make_batch<float>(ptrs);
    auto emb = copies[lane].embed(batch, nn::Mode::kInference);
    out.middleRows(static_cast<Eigen::Index>(begin), emb.rows()) = emb;
  });
  return out;
}

Checkpoint Checkpoint::capture(EmbeddingModel& model) {
  Checkpoint ck;
  ck.model_config = model.config();
  for (const auto& entry : model.state())
    ck.model_state.insert(ck.model_state.end(), entry.values->begin(), entry.values->end());
  return ck;
}

EmbeddingModel Checkpoint::restore() const {
  EmbeddingModel model(model_config, 0);
  std::size_t offset = 0;
  for (const auto& entry : model.state()) {
    if (offset + entry.values->size() > model_state.size())
      throw FormatError("checkpoint state is smaller than the model layout");
    std::copy_n(model_state.begin() + static_cast<std::ptrdiff_t>(offset), entry.values->size(),
                entry.values->begin());
    offset += entry.values->size();
  }
  if (offset != model_state.size()) throw FormatError("checkpoint state is larger than the model layout");
  return model;
}

void Checkpoint::save(const std::filesystem::path& path) const {
  EmbeddingModel model = restore();
  nlohmann::json header = model_config.to_json();
  header["format"] = "genclass-checkpoint";
  header["format_version"] = 1;
  header["config_hash"] = config_hash;
  header["epoch"] = epoch;
  header["classes"] = classes;
  header["finetuned_classes"] = finetuned_classes;
  header["lineage"] = lineage;
  header["model_version"] = model.version();
  auto tensors = nlohmann::json::array();
  std::size_t offset = 0;
  for (const auto& entry : model.state()) {
    tensors.push_back({{"name", entry.name}, {"shape", entry.shape}, {"offset", offset},
                       {"count", entry.values->size()}});
    offset += entry.values->size();
  }
  header["tensors"] = std::move(tensors);
  header["centers"] = {{"rows", centers.rows()}, {"cols", centers.cols()}, {"offset", offset}};

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ArgumentError("cannot write checkpoint " + path.string());
  const std::string text = header.dump();
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  write_u64_le(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  write_f32_le(out, model_state);
  std::vector<float> c(centers.data(), centers.data() + centers.size());
  write_f32_le(out, c);
  if (!out) throw ArgumentError("failed writing checkpoint " + path.string());
}

Checkpoint Checkpoint::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArgumentError("cannot open checkpoint " + path.string());
  char magic[8];
  in.read(magic, 8);
  if (!in || !std::equal(magic, magic + 8, kCheckpointMagic)) throw FormatError("not a genclass checkpoint: " + path.string());
  const std::uint64_t len = read_u64_le(in);
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw FormatError("truncated checkpoint header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& ex) {
    throw FormatError(std::string("bad checkpoint header: ") + ex.what());
  }
  Checkpoint ck;
  ck.model_config = ModelConfig::from_json(header);
  ck.config_hash = header.value("config_hash", std::string());
  ck.epoch = header.value("epoch", 0);
  ck.classes = header.value("classes", std::vector<std::string>{});
  ck.finetuned_classes = header.value("finetuned_classes", std::vector<std::string>{});
  ck.lineage = header.value("lineage", std::vector<std::string>{});
  std::size_t total = 0;
  for (const auto& t : header.at("tensors")) total += t.at("count").get<std::size_t>();
  ck.model_state.resize(total);
  read_f32_le(in, ck.model_state);
  const auto rows = header.at("centers").at("rows").get<Eigen::Index>();
  const auto cols = header.at("centers").at("cols").get<Eigen::Index>();
  std::vector<float> c(static_cast<std::size_t>(rows * cols));
  read_f32_le(in, c);
  ck.centers.resize(rows, cols);
  for (Eigen::Index i = 0; i < rows * cols; ++i) ck.centers.data()[i] = c[static_cast<std::size_t>(i)];
  // Validates the layout against the configuration.
  (void)ck.restore();
  return ck;
}

}  // namespace genclass
