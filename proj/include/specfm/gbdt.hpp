/*
Copyright 2026, the specfm authors

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
*/
#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace specfm::gbdt {

struct GbdtConfig {
  std::size_t max_depth = 6;
  double eta = 0.3;
  double lambda_l2 = 1.0;
  double min_child_weight = 1.0;
  std::size_t max_rounds = 2000;
  std::size_t early_stopping_rounds = 32;

  void validate() const;
};

struct FeatureMatrix {
  std::size_t n = 0;
  std::size_t d = 0;
  std::vector<double> data;  // row-major

  const double* row(std::size_t i) const { return data.data() + i * d; }
  void validate() const;  // shape + no NaN
};

struct TreeNode {
  std::int32_t feature = -1;  // -1 marks a leaf
  double threshold = 0.0;     // left when x[feature] < threshold
  std::int32_t left = -1;
  std::int32_t right = -1;
  double value = 0.0;  // leaf weight, already scaled by eta
};

struct Tree {
  std::vector<TreeNode> nodes;
  double predict(const double* row) const;
};

struct GbdtModel {
  double base_score = 0.0;  // log-odds of the training positive rate
  std::size_t n_features = 0;
  GbdtConfig cfg;
  std::vector<Tree> trees;
};

struct GbdtFitInfo {
  std::size_t rounds_built = 0;
  std::size_t best_round = 0;  // 1-based; 0 = no trees kept
  double best_valid_auroc = 0.0;
  std::vector<double> train_loss_per_round;  // mean logistic loss after each round
};

// Logistic-loss boosting with exact greedy second-order split search; early
// stopping on validation AUROC; the returned model is truncated at the best
// round. Throws DegenerateLabels when the training labels are single-class.
GbdtModel gbdt_fit(const FeatureMatrix& x, const std::vector<int>& y, const FeatureMatrix& x_valid,
                   const std::vector<int>& y_valid, const GbdtConfig& cfg, GbdtFitInfo* info = nullptr);

// sigmoid(base_score + sum of tree outputs) per row
std::vector<double> gbdt_predict(const GbdtModel& model, const FeatureMatrix& x);

// Versioned binary container, magic "SGBT".
std::string serialize_gbdt(const GbdtModel& model);
GbdtModel parse_gbdt(const std::string& bytes);

}  // namespace specfm::gbdt
