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
#include "specfm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "specfm/errors.hpp"
#include "specfm/msio.hpp"
#include "specfm/rng.hpp"

namespace specfm::metrics {

void ScoredLabels::validate() const {
  if (scores.size() != labels.size()) throw DegenerateInput("scores and labels differ in length");
  for (double v : scores) {
    if (!std::isfinite(v)) throw DegenerateInput("non-finite score");
  }
  for (int y : labels) {
    if (y != 0 && y != 1) throw DegenerateInput("labels must be 0 or 1");
  }
}

std::size_t ScoredLabels::n_pos() const {
  return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
}

std::size_t ScoredLabels::n_neg() const { return labels.size() - n_pos(); }

namespace {

void require_both_classes(const ScoredLabels& s) {
  s.validate();
  if (s.n_pos() == 0 || s.n_neg() == 0) {
    throw DegenerateLabels("degenerate labels: need at least one positive and one negative");
  }
}

// indices sorted by score descending; equal scores keep input order
std::vector<std::size_t> order_desc(const ScoredLabels& s) {
  std::vector<std::size_t> idx(s.scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return s.scores[a] > s.scores[b]; });
  return idx;
}

}  // namespace

double auroc(const ScoredLabels& s) {
  require_both_classes(s);
  const std::size_t n = s.scores.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return s.scores[a] < s.scores[b]; });

  // average ranks within tie groups (1-based)
  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && s.scores[idx[j + 1]] == s.scores[idx[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j + 1);
    for (std::size_t t = i; t <= j; ++t) {
      if (s.labels[idx[t]] == 1) rank_sum_pos += avg_rank;
    }
    i = j + 1;
  }
  const double p = static_cast<double>(s.n_pos());
  const double q = static_cast<double>(s.n_neg());
  const double u = rank_sum_pos - p * (p + 1.0) / 2.0;
  return u / (p * q);
}

std::vector<RocPoint> roc_points(const ScoredLabels& s) {
  require_both_classes(s);
  const auto idx = order_desc(s);
  const double p = static_cast<double>(s.n_pos());
  const double q = static_cast<double>(s.n_neg());

  std::vector<RocPoint> pts;
  pts.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
  std::size_t tp = 0, fp = 0;
  std::size_t i = 0;
  while (i < idx.size()) {
    const double t = s.scores[idx[i]];
    while (i < idx.size() && s.scores[idx[i]] == t) {
      if (s.labels[idx[i]] == 1) ++tp;
      else ++fp;
      ++i;
    }
    pts.push_back({t, static_cast<double>(fp) / q, static_cast<double>(tp) / p});
  }
  return pts;
}

std::vector<PrPoint> pr_points(const ScoredLabels& s) {
  require_both_classes(s);
  const auto idx = order_desc(s);
  const double p = static_cast<double>(s.n_pos());

  std::vector<PrPoint> pts;
  std::size_t tp = 0, fp = 0;
  std::size_t i = 0;
  while (i < idx.size()) {
    const double t = s.scores[idx[i]];
    while (i < idx.size() && s.scores[idx[i]] == t) {
      if (s.labels[idx[i]] == 1) ++tp;
      else ++fp;
      ++i;
    }
    pts.push_back({t, static_cast<double>(tp) / p,
                   static_cast<double>(tp) / static_cast<double>(tp + fp)});
  }
  return pts;
}

double aupr(const ScoredLabels& s) {
  const auto pts = pr_points(s);
  double ap = 0.0;
  double prev_recall = 0.0;
  for (const auto& pt : pts) {
    ap += (pt.recall - prev_recall) * pt.precision;
    prev_recall = pt.recall;
  }
  return ap;
}

double f1_at(const ScoredLabels& s, double threshold) {
  s.validate();
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < s.scores.size(); ++i) {
    const bool pred = s.scores[i] >= threshold;
    if (pred && s.labels[i] == 1) ++tp;
    else if (pred) ++fp;
    else if (s.labels[i] == 1) ++fn;
  }
  if (tp == 0) return 0.0;
  return 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
}

// ---- PCA -----------------------------------------------------------------------

namespace {

// v -= (v . u) u for each existing component u; then renormalize
void orthogonalize(std::vector<double>& v, const std::vector<double>& components, std::size_t n_comp,
                   std::size_t dim) {
  for (std::size_t c = 0; c < n_comp; ++c) {
    const double* u = components.data() + c * dim;
    double dot = 0.0;
    for (std::size_t j = 0; j < dim; ++j) dot += v[j] * u[j];
    for (std::size_t j = 0; j < dim; ++j) v[j] -= dot * u[j];
  }
}

double norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

PcaResult pca(const std::vector<double>& data, std::size_t n, std::size_t dim, std::size_t k) {
  if (n < 2) throw DegenerateInput("pca: need at least 2 rows");
  if (k > dim) throw DegenerateInput("pca: k exceeds dimensionality");
  if (data.size() != n * dim) throw DegenerateInput("pca: data size mismatch");

  // mean-center
  std::vector<double> mean(dim, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < dim; ++j) mean[j] += data[i * dim + j];
  }
  for (double& m : mean) m /= static_cast<double>(n);
  std::vector<double> centered(n * dim);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < dim; ++j) centered[i * dim + j] = data[i * dim + j] - mean[j];
  }

  // sample covariance, divisor n-1
  std::vector<double> cov(dim * dim, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = centered.data() + i * dim;
    for (std::size_t a = 0; a < dim; ++a) {
      const double ra = row[a];
      double* cov_row = cov.data() + a * dim;
      for (std::size_t b = a; b < dim; ++b) cov_row[b] += ra * row[b];
    }
  }
  for (std::size_t a = 0; a < dim; ++a) {
    for (std::size_t b = a; b < dim; ++b) {
      const double v = cov[a * dim + b] / static_cast<double>(n - 1);
      cov[a * dim + b] = v;
      cov[b * dim + a] = v;
    }
  }
  double total_var = 0.0;
  for (std::size_t a = 0; a < dim; ++a) total_var += cov[a * dim + a];

  PcaResult result;
  result.dim = dim;
  result.k = k;
  result.components.assign(k * dim, 0.0);
  result.variance_explained.assign(k, 0.0);

  constexpr double kTol = 1e-12;
  constexpr std::size_t kMaxIter = 200000;
  Rng rng(0x9ca0c0ffee);

  std::vector<double> work(cov);  // deflated in place
  std::vector<double> v(dim), next(dim);
  for (std::size_t c = 0; c < k; ++c) {
    for (std::size_t j = 0; j < dim; ++j) v[j] = rng.normal();
    orthogonalize(v, result.components, c, dim);
    double vn = norm(v);
    if (vn == 0.0) {
      v.assign(dim, 0.0);
      v[c % dim] = 1.0;
      orthogonalize(v, result.components, c, dim);
      vn = norm(v);
    }
    for (double& x : v) x /= vn;

    double lambda = 0.0;
    for (std::size_t it = 0; it < kMaxIter; ++it) {
      for (std::size_t a = 0; a < dim; ++a) {
        double s = 0.0;
        const double* row = work.data() + a * dim;
        for (std::size_t b = 0; b < dim; ++b) s += row[b] * v[b];
        next[a] = s;
      }
      orthogonalize(next, result.components, c, dim);
      const double nn = norm(next);
      if (nn < 1e-300) {
        // deflated matrix is (numerically) null in this subspace: zero
        // eigenvalue, keep the current orthonormal direction
        lambda = 0.0;
        break;
      }
      double diff = 0.0;
      double sign = 0.0;
      for (std::size_t j = 0; j < dim; ++j) sign += next[j] * v[j];
      const double flip = sign < 0.0 ? -1.0 : 1.0;
      for (std::size_t j = 0; j < dim; ++j) {
        const double nv = flip * next[j] / nn;
        diff = std::max(diff, std::abs(nv - v[j]));
        v[j] = nv;
      }
      lambda = flip * nn;  // Rayleigh quotient of the unit iterate
      if (diff < kTol) break;
    }
    if (lambda < 0.0) lambda = 0.0;

    // canonical sign: largest-magnitude coordinate positive
    std::size_t arg = 0;
    for (std::size_t j = 1; j < dim; ++j) {
      if (std::abs(v[j]) > std::abs(v[arg])) arg = j;
    }
    if (v[arg] < 0.0) {
      for (double& x : v) x = -x;
    }

    for (std::size_t j = 0; j < dim; ++j) result.components[c * dim + j] = v[j];
    result.variance_explained[c] = total_var > 0.0 ? lambda / total_var : 0.0;

    // explicit deflation
    for (std::size_t a = 0; a < dim; ++a) {
      for (std::size_t b = 0; b < dim; ++b) work[a * dim + b] -= lambda * v[a] * v[b];
    }
  }

  result.projections.assign(n * k, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = centered.data() + i * dim;
    for (std::size_t c = 0; c < k; ++c) {
      const double* comp = result.components.data() + c * dim;
      double s = 0.0;
      for (std::size_t j = 0; j < dim; ++j) s += row[j] * comp[j];
      result.projections[i * k + c] = s;
    }
  }
  return result;
}

// ---- learning curve --------------------------------------------------------------

LearningCurve learning_curve(const std::vector<int>& train_labels, const std::vector<int>& eval_labels,
                             std::size_t n_subsets, std::uint64_t seed,
                             const std::vector<CurveMethod>& methods) {
  if (n_subsets < 1) throw ConfigError("learning_curve: n_subsets must be >= 1");
  const std::size_t n = train_labels.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(order);

  // nested prefixes: sizes n, n/2, n/4, ...
  std::vector<std::size_t> sizes;
  std::size_t sz = n;
  for (std::size_t i = 0; i < n_subsets; ++i) {
    sizes.push_back(sz);
    sz /= 2;
  }
  std::reverse(sizes.begin(), sizes.end());  // ascending

  // the smallest subset must contain both classes
  {
    const std::size_t smallest = sizes.front();
    std::size_t pos = 0;
    for (std::size_t i = 0; i < smallest; ++i) pos += static_cast<std::size_t>(train_labels[order[i]]);
    if (smallest == 0 || pos == 0 || pos == smallest) {
      throw DegenerateLabels("learning_curve: smallest subset lacks both classes");
    }
  }

  LearningCurve curve;
  curve.sizes = sizes;
  for (const auto& m : methods) curve.method_names.push_back(m.name);
  for (std::size_t si = 0; si < sizes.size(); ++si) {
    std::vector<std::size_t> subset(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(sizes[si]));
    std::vector<double> row;
    for (const auto& m : methods) {
      ScoredLabels scored;
      scored.scores = m.run(subset);
      scored.labels = eval_labels;
      row.push_back(auroc(scored));
    }
    curve.auroc_by_subset.push_back(std::move(row));
  }
  return curve;
}

std::string LearningCurve::to_tsv() const {
  std::string out = "train_size";
  for (const auto& name : method_names) out += "\t" + name;
  out += "\n";
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    out += std::to_string(sizes[i]);
    for (double v : auroc_by_subset[i]) out += "\t" + io::format_double(v);
    out += "\n";
  }
  return out;
}

// ---- serialization ---------------------------------------------------------------

std::string metrics_json(const std::string& task, const ScoredLabels& s, double threshold) {
  const double roc = auroc(s);
  const double pr = aupr(s);
  const double f1 = f1_at(s, threshold);
  std::string out = "{";
  out += "\"task\": \"" + task + "\", ";
  out += "\"n\": " + std::to_string(s.labels.size()) + ", ";
  out += "\"n_pos\": " + std::to_string(s.n_pos()) + ", ";
  out += "\"auroc\": " + io::format_double(roc) + ", ";
  out += "\"aupr\": " + io::format_double(pr) + ", ";
  out += "\"f1\": " + io::format_double(f1) + ", ";
  out += "\"threshold\": " + io::format_double(threshold);
  out += "}\n";
  return out;
}

std::string roc_csv(const std::vector<RocPoint>& pts) {
  std::string out = "threshold,fpr,tpr\n";
  for (const auto& p : pts) {
    out += io::format_double(p.threshold) + "," + io::format_double(p.fpr) + "," + io::format_double(p.tpr) + "\n";
  }
  return out;
}

std::string pr_csv(const std::vector<PrPoint>& pts) {
  std::string out = "threshold,recall,precision\n";
  for (const auto& p : pts) {
    out += io::format_double(p.threshold) + "," + io::format_double(p.recall) + "," +
           io::format_double(p.precision) + "\n";
  }
  return out;
}

std::string pca_csv(const PcaResult& r, const std::vector<std::string>& scan_ids, const std::vector<int>& labels) {
  const std::size_t n = scan_ids.size();
  if (labels.size() != n || r.projections.size() != n * r.k) {
    throw DegenerateInput("pca_csv: inconsistent row counts");
  }
  std::string out = "# variance_explained:";
  for (double v : r.variance_explained) {
    out += " " + io::format_double(v * 100.0) + "%";
  }
  out += "\nscan_id,pc1,pc2,label\n";
  for (std::size_t i = 0; i < n; ++i) {
    const double pc1 = r.k > 0 ? r.projections[i * r.k] : 0.0;
    const double pc2 = r.k > 1 ? r.projections[i * r.k + 1] : 0.0;
    out += scan_ids[i] + "," + io::format_double(pc1) + "," + io::format_double(pc2) + "," +
           std::to_string(labels[i]) + "\n";
  }
  return out;
}

}  // namespace specfm::metrics
