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

#include "genclass/losses.hpp"

#include <cmath>
#include <limits>
#include <map>

#include "genclass/errors.hpp"

namespace genclass::losses {

std::string_view to_string(MiningStrategy s) {
  switch (s) {
    case MiningStrategy::kAllValid: return "all_valid";
    case MiningStrategy::kBatchSemiHard: return "batch_semi_hard";
    case MiningStrategy::kAuto: break;
  }
  return "auto";
}

MiningStrategy parse_mining_strategy(std::string_view s) {
  if (s == "all_valid") return MiningStrategy::kAllValid;
  if (s == "batch_semi_hard") return MiningStrategy::kBatchSemiHard;
  if (s == "auto") return MiningStrategy::kAuto;
  throw ConfigError("unknown mining strategy '" + std::string(s) + "'");
}

void LossConfig::validate() const {
  if (!std::isfinite(center_weight) || center_weight < 0) throw ConfigError("lambda must be finite and >= 0");
  if (!std::isfinite(center_update_rate) || center_update_rate < 0 || center_update_rate > 1)
    throw ConfigError("center_update_rate must lie in [0, 1]");
  if (!std::isfinite(triplet_margin) || triplet_margin < 0) throw ConfigError("triplet_margin must be finite and >= 0");
}

nlohmann::json LossConfig::to_json() const {
  return {{"lambda", center_weight},
          {"center_update_rate", center_update_rate},
          {"triplet_margin", triplet_margin},
          {"mining_strategy", std::string(to_string(mining_strategy))}};
}

LossConfig LossConfig::from_json(const nlohmann::json& j) {
  LossConfig c;
  c.center_weight = j.value("lambda", c.center_weight);
  c.center_update_rate = j.value("center_update_rate", c.center_update_rate);
  c.triplet_margin = j.value("triplet_margin", c.triplet_margin);
  c.mining_strategy = parse_mining_strategy(j.value("mining_strategy", std::string("auto")));
  c.validate();
  return c;
}

namespace {

void check_labels(std::span<const int> labels, Eigen::Index rows, int num_classes) {
  if (rows < 1) throw ShapeError("empty batch");
  if (static_cast<Eigen::Index>(labels.size()) != rows)
    throw ShapeError("label count " + std::to_string(labels.size()) + " != batch size " + std::to_string(rows));
  for (int y : labels)
    if (y < 0 || y >= num_classes)
      throw LabelError("label " + std::to_string(y) + " outside [0, " + std::to_string(num_classes) + ")");
}

double squared_distance(const Matrix& a, Eigen::Index i, const Matrix& b, Eigen::Index j) {
  double s = 0.0;
  for (Eigen::Index k = 0; k < a.cols(); ++k) {
    const double d = a(i, k) - b(j, k);
    s += d * d;
  }
  return s;
}

}  // namespace

double center_loss(const Matrix& embeddings, std::span<const int> labels, const ClassCenters& centers) {
  check_labels(labels, embeddings.rows(), centers.num_classes());
  if (embeddings.cols() != centers.centers.cols()) throw ShapeError("embedding / center dimension mismatch");
  double total = 0.0;
  for (Eigen::Index i = 0; i < embeddings.rows(); ++i) total += squared_distance(embeddings, i, centers.centers, labels[i]);
  return 0.5 * total;
}

LossWithGrad center_loss_with_grad(const Matrix& embeddings, std::span<const int> labels, const ClassCenters& centers) {
  LossWithGrad out;
  out.value = center_loss(embeddings, labels, centers);
  out.grad.resize(embeddings.rows(), embeddings.cols());
  for (Eigen::Index i = 0; i < embeddings.rows(); ++i) out.grad.row(i) = embeddings.row(i) - centers.centers.row(labels[i]);
  return out;
}

ClassCenters update_centers(const ClassCenters& centers, const Matrix& embeddings, std::span<const int> labels) {
  check_labels(labels, embeddings.rows(), centers.num_classes());
  if (embeddings.cols() != centers.centers.cols()) throw ShapeError("embedding / center dimension mismatch");
  ClassCenters out = centers;
  const int k = centers.num_classes();
  Matrix delta = Matrix::Zero(k, centers.centers.cols());
  std::vector<int> counts(k, 0);
  for (Eigen::Index i = 0; i < embeddings.rows(); ++i) {
    delta.row(labels[i]) += centers.centers.row(labels[i]) - embeddings.row(i);
    ++counts[labels[i]];
  }
  for (int j = 0; j < k; ++j) {
    if (counts[j] == 0) continue;
    out.centers.row(j) -= centers.update_rate * delta.row(j) / (1.0 + counts[j]);
  }
  return out;
}

LossWithGrad cross_entropy_with_grad(const Matrix& logits, std::span<const int> labels) {
  if (logits.cols() < 2) throw ShapeError("cross_entropy needs at least 2 classes");
  check_labels(labels, logits.rows(), static_cast<int>(logits.cols()));
  const auto m = logits.rows();
  LossWithGrad out;
  out.grad.resize(m, logits.cols());
  double total = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) {
    const double peak = logits.row(i).maxCoeff();
    double z = 0.0;
    for (Eigen::Index c = 0; c < logits.cols(); ++c) z += std::exp(logits(i, c) - peak);
    const double log_z = peak + std::log(z);
    total += log_z - logits(i, labels[i]);
    for (Eigen::Index c = 0; c < logits.cols(); ++c) out.grad(i, c) = std::exp(logits(i, c) - log_z) / m;
    out.grad(i, labels[i]) -= 1.0 / m;
  }
  out.value = total / m;
  return out;
}

double cross_entropy(const Matrix& logits, std::span<const int> labels) {
  return cross_entropy_with_grad(logits, labels).value;
}

double combined_loss(const Matrix& logits, const Matrix& embeddings, std::span<const int> labels,
                     const ClassCenters& centers, double center_weight) {
  return cross_entropy(logits, labels) + center_weight * center_loss(embeddings, labels, centers);
}

LossWithGrad binary_cross_entropy_with_grad(const Matrix& logits, std::span<const int> labels) {
  if (logits.cols() != 1) throw ShapeError("binary cross entropy expects a single logit column");
  check_labels(labels, logits.rows(), 2);
  const auto m = logits.rows();
  LossWithGrad out;
  out.grad.resize(m, 1);
  double total = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) {
    const double z = logits(i, 0);
    const double y = labels[i];
    total += std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
    const double p = z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
    out.grad(i, 0) = (p - y) / m;
  }
  out.value = total / m;
  return out;
}

TripletGrads triplet_loss_with_grad(const Matrix& anchor, const Matrix& positive, const Matrix& negative,
                                    double margin) {
  if (anchor.rows() < 1) throw ShapeError("triplet_loss needs at least one triplet");
  if (positive.rows() != anchor.rows() || negative.rows() != anchor.rows() || positive.cols() != anchor.cols() ||
      negative.cols() != anchor.cols())
    throw ShapeError("anchor, positive and negative must have equal shapes");
  TripletGrads out;
  out.anchor = Matrix::Zero(anchor.rows(), anchor.cols());
  out.positive = Matrix::Zero(anchor.rows(), anchor.cols());
  out.negative = Matrix::Zero(anchor.rows(), anchor.cols());
  for (Eigen::Index i = 0; i < anchor.rows(); ++i) {
    const double hinge = squared_distance(anchor, i, positive, i) - squared_distance(anchor, i, negative, i) + margin;
    if (hinge <= 0.0) continue;
    out.value += hinge;
    out.anchor.row(i) = 2.0 * (negative.row(i) - positive.row(i));
    out.positive.row(i) = 2.0 * (positive.row(i) - anchor.row(i));
    out.negative.row(i) = 2.0 * (anchor.row(i) - negative.row(i));
  }
  return out;
}

double triplet_loss(const Matrix& anchor, const Matrix& positive, const Matrix& negative, double margin) {
  return triplet_loss_with_grad(anchor, positive, negative, margin).value;
}

namespace {

Matrix pairwise_squared_distances(const Matrix& e) {
  const auto n = e.rows();
  Matrix d(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    d(i, i) = 0.0;
    for (Eigen::Index j = i + 1; j < n; ++j) d(i, j) = d(j, i) = squared_distance(e, i, e, j);
  }
  return d;
}

}  // namespace

LossWithGrad pooled_triplet_loss_with_grad(const Matrix& embeddings, std::span<const Triplet> triplets, double margin,
                                           std::size_t* active) {
  const auto n = embeddings.rows();
  const Matrix d = pairwise_squared_distances(embeddings);
  // Each active triplet contributes +d(a,p) - d(a,n); collect the pair
  // coefficients and expand the gradient once.
  Matrix weights = Matrix::Zero(n, n);
  LossWithGrad out;
  std::size_t hits = 0;
  for (const auto& t : triplets) {
    if (t.anchor < 0 || t.anchor >= n || t.positive < 0 || t.positive >= n || t.negative < 0 || t.negative >= n)
      throw ShapeError("triplet index outside the embedding pool");
    const double hinge = d(t.anchor, t.positive) - d(t.anchor, t.negative) + margin;
    if (hinge <= 0.0) continue;
    out.value += hinge;
    ++hits;
    weights(t.anchor, t.positive) += 1.0;
    weights(t.positive, t.anchor) += 1.0;
    weights(t.anchor, t.negative) -= 1.0;
    weights(t.negative, t.anchor) -= 1.0;
  }
  const Eigen::VectorXd row_sums = weights.rowwise().sum();
  out.grad = 2.0 * (row_sums.asDiagonal() * embeddings - weights * embeddings);
  if (active) *active = hits;
  return out;
}

std::size_t all_valid_triplet_count(std::span<const int> labels) {
  std::map<int, std::size_t> counts;
  for (int y : labels) ++counts[y];
  const std::size_t total = labels.size();
  std::size_t sum = 0;
  for (const auto& [_, c] : counts) sum += c * (c - 1) * (total - c);
  return sum;
}

TripletSet mine_triplets(const Matrix& embeddings, std::span<const int> labels, MiningStrategy strategy,
                         double margin) {
  (void)margin;
  const auto n = static_cast<int>(labels.size());
  if (embeddings.rows() != n) throw ShapeError("label count does not match embedding rows");
  if (strategy == MiningStrategy::kAuto)
    strategy = labels.size() <= kAllValidPoolLimit ? MiningStrategy::kAllValid : MiningStrategy::kBatchSemiHard;

  TripletSet out;
  if (strategy == MiningStrategy::kAllValid) {
    out.reserve(all_valid_triplet_count(labels));
    for (int a = 0; a < n; ++a)
      for (int p = 0; p < n; ++p) {
        if (p == a || labels[p] != labels[a]) continue;
        for (int q = 0; q < n; ++q)
          if (labels[q] != labels[a]) out.push_back({a, p, q});
      }
  } else {
    const Matrix d = pairwise_squared_distances(embeddings);
    for (int a = 0; a < n; ++a)
      for (int p = 0; p < n; ++p) {
        if (p == a || labels[p] != labels[a]) continue;
        int semi_hard = -1, hardest = -1;
        for (int q = 0; q < n; ++q) {
          if (labels[q] == labels[a]) continue;
          if (hardest < 0 || d(a, q) < d(a, hardest)) hardest = q;
          if (d(a, q) > d(a, p) && (semi_hard < 0 || d(a, q) < d(a, semi_hard))) semi_hard = q;
        }
        if (hardest < 0) continue;
        out.push_back({a, p, semi_hard >= 0 ? semi_hard : hardest});
      }
  }
  if (out.empty()) throw EmptyTripletError("no (anchor, positive, negative) triple exists in the pool");
  return out;
}

}  // namespace genclass::losses
