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

// Training objectives in double precision, each with its analytic gradient.
//
//   center loss    L_c = 1/2 sum_i ||x_i - c_{y_i}||^2          (batch sum)
//   cross entropy  L_ce = mean_i -log softmax(z_i)[y_i]          (batch mean)
//   combined       L = L_ce + lambda * L_c
//   triplet loss   L_t = sum_i [ ||a_i - p_i||^2 - ||a_i - n_i||^2 + margin ]_+

#ifndef GENCLASS_LOSSES_HPP
#define GENCLASS_LOSSES_HPP

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "genclass/nn/tensor.hpp"

namespace genclass::losses {

using Matrix = nn::Matrix<double>;

enum class MiningStrategy { kAuto, kAllValid, kBatchSemiHard };

std::string_view to_string(MiningStrategy s);
MiningStrategy parse_mining_strategy(std::string_view s);

/// kAuto picks all_valid up to this pool size and batch_semi_hard above it.
inline constexpr std::size_t kAllValidPoolLimit = 512;

struct LossConfig {
  double center_weight = 0.01;       // lambda
  double center_update_rate = 0.5;   // alpha_c
  double triplet_margin = 0.2;       // alpha
  MiningStrategy mining_strategy = MiningStrategy::kAuto;

  void validate() const;
  nlohmann::json to_json() const;
  static LossConfig from_json(const nlohmann::json& j);
};

struct ClassCenters {
  Matrix centers;  // (num_classes, dim)
  double update_rate = 0.5;

  ClassCenters() = default;
  ClassCenters(int num_classes, int dim, double rate = 0.5) : centers(Matrix::Zero(num_classes, dim)), update_rate(rate) {}
  int num_classes() const { return static_cast<int>(centers.rows()); }
};

struct LossWithGrad {
  double value = 0.0;
  Matrix grad;  // same shape as the differentiated input
};

double center_loss(const Matrix& embeddings, std::span<const int> labels, const ClassCenters& centers);
/// Gradient w.r.t. the embeddings: x_i - c_{y_i}.
LossWithGrad center_loss_with_grad(const Matrix& embeddings, std::span<const int> labels, const ClassCenters& centers);

/// c_j <- c_j - rate * sum_{i: y_i = j} (c_j - x_i) / (1 + n_j) for classes
/// present in the batch.
ClassCenters update_centers(const ClassCenters& centers, const Matrix& embeddings, std::span<const int> labels);

double cross_entropy(const Matrix& logits, std::span<const int> labels);
LossWithGrad cross_entropy_with_grad(const Matrix& logits, std::span<const int> labels);

double combined_loss(const Matrix& logits, const Matrix& embeddings, std::span<const int> labels,
                     const ClassCenters& centers, double center_weight);

/// Binary cross entropy on a (m, 1) logit column; labels are 0 or 1. Mean.
LossWithGrad binary_cross_entropy_with_grad(const Matrix& logits, std::span<const int> labels);

double triplet_loss(const Matrix& anchor, const Matrix& positive, const Matrix& negative, double margin);

struct TripletGrads {
  double value = 0.0;
  Matrix anchor;
  Matrix positive;
  Matrix negative;
};
TripletGrads triplet_loss_with_grad(const Matrix& anchor, const Matrix& positive, const Matrix& negative,
                                    double margin);

struct Triplet {
  int anchor = 0;
  int positive = 0;
  int negative = 0;

  friend bool operator==(const Triplet&, const Triplet&) = default;
  friend auto operator<=>(const Triplet&, const Triplet&) = default;
};

using TripletSet = std::vector<Triplet>;

/// Triplet loss over index triples into one embedding pool; the gradient is
/// accumulated per pool row. `active` receives the number of triplets with a
/// positive hinge.
LossWithGrad pooled_triplet_loss_with_grad(const Matrix& embeddings, std::span<const Triplet> triplets,
                                           double margin, std::size_t* active = nullptr);

/// kAllValid: every (a, p, n) with y_a == y_p, a != p, y_n != y_a in
/// lexicographic order. kBatchSemiHard: per anchor-positive pair, the
/// negative with the smallest d_an^2 still above d_ap^2, else the closest
/// negative. kAuto resolves by pool size.
TripletSet mine_triplets(const Matrix& embeddings, std::span<const int> labels, MiningStrategy strategy,
                         double margin);

/// Closed-form |all_valid| = sum_c n_c (n_c - 1) (N - n_c).
std::size_t all_valid_triplet_count(std::span<const int> labels);

}  // namespace genclass::losses

#endif  // GENCLASS_LOSSES_HPP
