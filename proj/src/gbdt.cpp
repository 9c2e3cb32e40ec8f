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
#include "specfm/gbdt.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>

#include "specfm/errors.hpp"
#include "specfm/metrics.hpp"

namespace specfm::gbdt {

void GbdtConfig::validate() const {
  if (max_depth < 1) throw ConfigError("gbdt: max_depth must be >= 1");
  if (!(eta > 0.0 && eta <= 1.0)) throw ConfigError("gbdt: eta must be in (0, 1]");
  if (lambda_l2 < 0.0) throw ConfigError("gbdt: lambda_l2 must be non-negative");
  if (min_child_weight < 0.0) throw ConfigError("gbdt: min_child_weight must be non-negative");
  if (max_rounds < 1) throw ConfigError("gbdt: max_rounds must be >= 1");
  if (early_stopping_rounds < 1) throw ConfigError("gbdt: early_stopping_rounds must be >= 1");
}

void FeatureMatrix::validate() const {
  if (data.size() != n * d) throw DegenerateInput("feature matrix: data size mismatch");
  for (double v : data) {
    if (std::isnan(v)) throw DegenerateInput("feature matrix: NaN feature value");
  }
}

double Tree::predict(const double* row) const {
  std::int32_t at = 0;
  while (nodes[static_cast<std::size_t>(at)].feature >= 0) {
    const TreeNode& node = nodes[static_cast<std::size_t>(at)];
    at = row[node.feature] < node.threshold ? node.left : node.right;
  }
  return nodes[static_cast<std::size_t>(at)].value;
}

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

struct SplitChoice {
  bool found = false;
  std::int32_t feature = -1;
  double threshold = 0.0;
  double gain = 0.0;
};

// Exact greedy search over one node's rows. Rows of the node are marked in
// `in_node`; feature_order holds the global presorted row indices per
// feature. Ties resolve to the lowest feature index, then lowest threshold,
// because candidates are scanned in that order and only strictly better
// gains replace the incumbent.
SplitChoice best_split(const FeatureMatrix& x, const std::vector<double>& grad, const std::vector<double>& hess,
                       const std::vector<std::vector<std::uint32_t>>& feature_order,
                       const std::vector<char>& in_node, double g_total, double h_total, const GbdtConfig& cfg) {
  SplitChoice best;
  best.gain = -1.0;
  const double parent_score = g_total * g_total / (h_total + cfg.lambda_l2);
  for (std::size_t f = 0; f < x.d; ++f) {
    double gl = 0.0, hl = 0.0;
    double prev_value = 0.0;
    bool have_prev = false;
    for (const std::uint32_t ri : feature_order[f]) {
      if (!in_node[ri]) continue;
      const double value = x.row(ri)[f];
      if (have_prev && value > prev_value) {
        const double gr = g_total - gl;
        const double hr = h_total - hl;
        if (hl >= cfg.min_child_weight && hr >= cfg.min_child_weight) {
          const double gain = 0.5 * (gl * gl / (hl + cfg.lambda_l2) + gr * gr / (hr + cfg.lambda_l2) -
                                     parent_score);
          // zero-gain splits are accepted (no pruning penalty); the gain of a
          // balanced XOR root is exactly 0 and must still split. Strictly
          // better gain replaces the incumbent, so ties keep the lowest
          // feature index and then the lowest threshold.
          if (gain >= 0.0 && gain > best.gain + 1e-12) {
            best.found = true;
            best.feature = static_cast<std::int32_t>(f);
            best.threshold = 0.5 * (prev_value + value);
            best.gain = gain;
          }
        }
      }
      gl += grad[ri];
      hl += hess[ri];
      prev_value = value;
      have_prev = true;
    }
  }
  return best;
}

struct PendingNode {
  std::int32_t id = 0;
  std::size_t depth = 0;
  double g_total = 0.0;
  double h_total = 0.0;
  std::vector<std::uint32_t> rows;
};

}  // namespace

GbdtModel gbdt_fit(const FeatureMatrix& x, const std::vector<int>& y, const FeatureMatrix& x_valid,
                   const std::vector<int>& y_valid, const GbdtConfig& cfg, GbdtFitInfo* info) {
  cfg.validate();
  x.validate();
  x_valid.validate();
  if (y.size() != x.n || y_valid.size() != x_valid.n) throw DegenerateInput("gbdt: label count mismatch");
  const std::size_t n_pos = static_cast<std::size_t>(std::count(y.begin(), y.end(), 1));
  if (n_pos == 0 || n_pos == y.size()) throw DegenerateLabels("gbdt: training labels are single-class");

  const double p_bar = static_cast<double>(n_pos) / static_cast<double>(y.size());
  GbdtModel model;
  model.base_score = std::log(p_bar / (1.0 - p_bar));
  model.n_features = x.d;
  model.cfg = cfg;

  // global presort per feature
  std::vector<std::vector<std::uint32_t>> feature_order(x.d);
  for (std::size_t f = 0; f < x.d; ++f) {
    auto& order = feature_order[f];
    order.resize(x.n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::uint32_t a, std::uint32_t b) { return x.row(a)[f] < x.row(b)[f]; });
  }

  std::vector<double> margin(x.n, model.base_score);
  std::vector<double> margin_valid(x_valid.n, model.base_score);
  std::vector<double> grad(x.n), hess(x.n);
  std::vector<char> in_node(x.n);

  double best_auroc = -1.0;
  std::size_t best_round = 0;
  std::size_t since_best = 0;

  for (std::size_t round = 1; round <= cfg.max_rounds; ++round) {
    for (std::size_t i = 0; i < x.n; ++i) {
      const double p = sigmoid(margin[i]);
      grad[i] = p - static_cast<double>(y[i]);
      hess[i] = p * (1.0 - p);
    }

    Tree tree;
    std::vector<PendingNode> queue;
    {
      PendingNode root;
      root.id = 0;
      root.depth = 0;
      root.rows.resize(x.n);
      std::iota(root.rows.begin(), root.rows.end(), 0);
      for (std::size_t i = 0; i < x.n; ++i) {
        root.g_total += grad[i];
        root.h_total += hess[i];
      }
      tree.nodes.push_back({});
      queue.push_back(std::move(root));
    }

    while (!queue.empty()) {
      PendingNode node = std::move(queue.front());
      queue.erase(queue.begin());

      SplitChoice split;
      if (node.depth < cfg.max_depth && node.rows.size() >= 2) {
        std::fill(in_node.begin(), in_node.end(), 0);
        for (const std::uint32_t ri : node.rows) in_node[ri] = 1;
        split = best_split(x, grad, hess, feature_order, in_node, node.g_total, node.h_total, cfg);
      }
      if (!split.found) {
        TreeNode& leaf = tree.nodes[static_cast<std::size_t>(node.id)];
        leaf.feature = -1;
        leaf.value = -node.g_total / (node.h_total + cfg.lambda_l2) * cfg.eta;
        continue;
      }

      PendingNode left, right;
      left.depth = right.depth = node.depth + 1;
      for (const std::uint32_t ri : node.rows) {
        if (x.row(ri)[static_cast<std::size_t>(split.feature)] < split.threshold) {
          left.rows.push_back(ri);
          left.g_total += grad[ri];
          left.h_total += hess[ri];
        } else {
          right.rows.push_back(ri);
          right.g_total += grad[ri];
          right.h_total += hess[ri];
        }
      }
      left.id = static_cast<std::int32_t>(tree.nodes.size());
      tree.nodes.push_back({});
      right.id = static_cast<std::int32_t>(tree.nodes.size());
      tree.nodes.push_back({});
      // fill the parent after the children exist: push_back may reallocate
      TreeNode& parent = tree.nodes[static_cast<std::size_t>(node.id)];
      parent.feature = split.feature;
      parent.threshold = split.threshold;
      parent.left = left.id;
      parent.right = right.id;
      queue.push_back(std::move(left));
      queue.push_back(std::move(right));
    }

    for (std::size_t i = 0; i < x.n; ++i) margin[i] += tree.predict(x.row(i));
    for (std::size_t i = 0; i < x_valid.n; ++i) margin_valid[i] += tree.predict(x_valid.row(i));
    model.trees.push_back(std::move(tree));

    if (info) {
      double loss = 0.0;
      for (std::size_t i = 0; i < x.n; ++i) {
        const double m = margin[i];
        loss += std::max(m, 0.0) - m * static_cast<double>(y[i]) + std::log1p(std::exp(-std::abs(m)));
      }
      info->train_loss_per_round.push_back(loss / static_cast<double>(x.n));
    }

    metrics::ScoredLabels scored;
    scored.scores = margin_valid;
    scored.labels = y_valid;
    const double roc = metrics::auroc(scored);
    if (roc > best_auroc) {
      best_auroc = roc;
      best_round = round;
      since_best = 0;
    } else {
      ++since_best;
    }
    if (since_best >= cfg.early_stopping_rounds) break;
  }

  if (info) {
    info->rounds_built = model.trees.size();
    info->best_round = best_round;
    info->best_valid_auroc = best_auroc;
  }
  model.trees.resize(best_round);
  return model;
}

std::vector<double> gbdt_predict(const GbdtModel& model, const FeatureMatrix& x) {
  x.validate();
  if (x.d != model.n_features) throw DegenerateInput("gbdt_predict: feature count mismatch");
  std::vector<double> out(x.n);
  for (std::size_t i = 0; i < x.n; ++i) {
    double margin = model.base_score;
    for (const Tree& t : model.trees) margin += t.predict(x.row(i));
    out[i] = sigmoid(margin);
  }
  return out;
}

// ---- serialization ----------------------------------------------------------

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  char b[4];
  std::memcpy(b, &v, 4);
  out.append(b, 4);
}

void put_f64(std::string& out, double v) {
  char b[8];
  std::memcpy(b, &v, 8);
  out.append(b, 8);
}

struct Reader {
  const std::string& bytes;
  std::size_t off = 0;

  void need(std::size_t n) const {
    if (off + n > bytes.size()) throw FormatError("gbdt model file: truncated");
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v;
    std::memcpy(&v, bytes.data() + off, 4);
    off += 4;
    return v;
  }
  double f64() {
    need(8);
    double v;
    std::memcpy(&v, bytes.data() + off, 8);
    off += 8;
    return v;
  }
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
};

}  // namespace

std::string serialize_gbdt(const GbdtModel& model) {
  std::string out = "SGBT";
  put_u32(out, 1);  // version
  put_u32(out, static_cast<std::uint32_t>(model.cfg.max_depth));
  put_f64(out, model.cfg.eta);
  put_f64(out, model.cfg.lambda_l2);
  put_f64(out, model.cfg.min_child_weight);
  put_u32(out, static_cast<std::uint32_t>(model.cfg.max_rounds));
  put_u32(out, static_cast<std::uint32_t>(model.cfg.early_stopping_rounds));
  put_f64(out, model.base_score);
  put_u32(out, static_cast<std::uint32_t>(model.n_features));
  put_u32(out, static_cast<std::uint32_t>(model.trees.size()));
  for (const Tree& t : model.trees) {
    put_u32(out, static_cast<std::uint32_t>(t.nodes.size()));
    for (const TreeNode& n : t.nodes) {
      put_u32(out, static_cast<std::uint32_t>(n.feature));
      put_f64(out, n.threshold);
      put_u32(out, static_cast<std::uint32_t>(n.left));
      put_u32(out, static_cast<std::uint32_t>(n.right));
      put_f64(out, n.value);
    }
  }
  return out;
}

GbdtModel parse_gbdt(const std::string& bytes) {
  if (bytes.size() < 8 || bytes.compare(0, 4, "SGBT") != 0) throw FormatError("gbdt model file: bad magic");
  Reader r{bytes, 4};
  const std::uint32_t version = r.u32();
  if (version != 1) throw FormatError("gbdt model file: unsupported version");
  GbdtModel m;
  m.cfg.max_depth = r.u32();
  m.cfg.eta = r.f64();
  m.cfg.lambda_l2 = r.f64();
  m.cfg.min_child_weight = r.f64();
  m.cfg.max_rounds = r.u32();
  m.cfg.early_stopping_rounds = r.u32();
  m.base_score = r.f64();
  m.n_features = r.u32();
  const std::uint32_t n_trees = r.u32();
  m.trees.resize(n_trees);
  for (auto& t : m.trees) {
    const std::uint32_t n_nodes = r.u32();
    t.nodes.resize(n_nodes);
    for (auto& n : t.nodes) {
      n.feature = r.i32();
      n.threshold = r.f64();
      n.left = r.i32();
      n.right = r.i32();
      n.value = r.f64();
    }
  }
  if (r.off != bytes.size()) throw FormatError("gbdt model file: trailing bytes");
  return m;
}

}  // namespace specfm::gbdt
