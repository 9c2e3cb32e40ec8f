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
#include <functional>
#include <string>
#include <vector>

namespace specfm::metrics {

struct ScoredLabels {
  std::vector<double> scores;
  std::vector<int> labels;  // 0/1

  void validate() const;  // throws DegenerateInput on shape problems
  std::size_t n_pos() const;
  std::size_t n_neg() const;
};

// Mann-Whitney statistic with tie groups: P(score_pos > score_neg) +
// 0.5 * P(tie). Throws DegenerateLabels unless both classes are present.
double auroc(const ScoredLabels& s);

struct RocPoint {
  double threshold = 0.0;
  double fpr = 0.0;
  double tpr = 0.0;
};

struct PrPoint {
  double threshold = 0.0;
  double recall = 0.0;
  double precision = 0.0;
};

// Threshold sweep over distinct scores descending; starts at (0,0), ends at
// (1,1).
std::vector<RocPoint> roc_points(const ScoredLabels& s);

// Step-wise precision/recall points at each distinct threshold.
std::vector<PrPoint> pr_points(const ScoredLabels& s);

// Average precision: sum_i (R_i - R_{i-1}) * P_i.
double aupr(const ScoredLabels& s);

// F1 of predictions (score >= threshold); 0 when there are no predicted
// positives or no true positives.
double f1_at(const ScoredLabels& s, double threshold = 0.5);

struct PcaResult {
  std::size_t dim = 0;
  std::size_t k = 0;
  std::vector<double> components;         // k rows of length dim, orthonormal
  std::vector<double> projections;        // n rows of length k
  std::vector<double> variance_explained; // fraction per component, non-increasing
};

// Top-k principal components of the row-major n x dim matrix via iterated
// deflated power method on the sample covariance (divisor n-1).
PcaResult pca(const std::vector<double>& data, std::size_t n, std::size_t dim, std::size_t k);

// ---- learning curve ----------------------------------------------------------

struct CurveMethod {
  std::string name;
  // Trains on the given subset of training indices and returns scores for a
  // fixed evaluation set (defined by the caller's closure).
  std::function<std::vector<double>(const std::vector<std::size_t>&)> run;
};

struct LearningCurve {
  std::vector<std::size_t> sizes;              // ascending
  std::vector<std::string> method_names;
  std::vector<std::vector<double>> auroc_by_subset;  // [subset][method]

  std::string to_tsv() const;
};

// Nested subsets by repeated halving of a seed-shuffled index list; each
// method is trained on identical indices per subset and scored by AUROC
// against eval_labels.
LearningCurve learning_curve(const std::vector<int>& train_labels, const std::vector<int>& eval_labels,
                             std::size_t n_subsets, std::uint64_t seed, const std::vector<CurveMethod>& methods);

// ---- serialization ------------------------------------------------------------

std::string metrics_json(const std::string& task, const ScoredLabels& s, double threshold = 0.5);
std::string roc_csv(const std::vector<RocPoint>& pts);
std::string pr_csv(const std::vector<PrPoint>& pts);
// "scan_id,pc1,pc2,label" rows plus a header comment with variance-explained
// percentages.
std::string pca_csv(const PcaResult& r, const std::vector<std::string>& scan_ids, const std::vector<int>& labels);

}  // namespace specfm::metrics
