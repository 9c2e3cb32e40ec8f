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
#include "specfm/train.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>

#include "specfm/metrics.hpp"

namespace specfm::train {

void TrainConfig::validate() const {
  if (lr <= 0.0) throw ConfigError("train: lr must be positive");
  if (weight_decay < 0.0) throw ConfigError("train: weight_decay must be non-negative");
  if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  if (label_smoothing < 0.0 || label_smoothing >= 0.5) {
    throw ConfigError("train: label_smoothing must be in [0, 0.5)");
  }
  if (patience_epochs < 1) throw ConfigError("train: patience_epochs must be >= 1");
  if (max_steps < 1) throw ConfigError("train: max_steps must be >= 1");
  if (valid_every < 1) throw ConfigError("train: valid_every must be >= 1");
  if (use_schedule && (warmup_steps < 1 || cosine_half_period < 1)) {
    throw ConfigError("train: schedule needs warmup_steps and cosine_half_period >= 1");
  }
}

double bce_smoothed(double logit, int y, double eps) {
  const double target = static_cast<double>(y) * (1.0 - eps) + (1.0 - static_cast<double>(y)) * eps;
  return std::max(logit, 0.0) - logit * target + std::log1p(std::exp(-std::abs(logit)));
}

double lr_at(std::size_t step, const TrainConfig& cfg) {
  const double peak = cfg.lr;
  const std::size_t w = cfg.warmup_steps;
  const std::size_t t = cfg.cosine_half_period;
  if (step < w) return peak * static_cast<double>(step) / static_cast<double>(w);
  if (step > w + t) return 0.0;
  constexpr double pi = 3.14159265358979323846;
  return peak * 0.5 * (1.0 + std::cos(pi * static_cast<double>(step - w) / static_cast<double>(t)));
}

AdamState AdamState::init_like(const nn::ParamSet<float>& params) {
  AdamState s;
  for (const auto& [name, t] : params.items) {
    (void)name;
    s.m.emplace_back(t.rows, t.cols, 0.0f);
    s.v.emplace_back(t.rows, t.cols, 0.0f);
  }
  return s;
}

void adam_step(nn::ParamSet<float>& params, const std::vector<nn::Tensor<float>>& grads, AdamState& state,
               double lr, double weight_decay) {
  if (grads.size() != params.items.size()) throw NumericError("adam: gradient/parameter count mismatch");
  state.step += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  const float b1 = static_cast<float>(state.beta1);
  const float b2 = static_cast<float>(state.beta2);
  const float wd = static_cast<float>(weight_decay);
  for (std::size_t pi = 0; pi < params.items.size(); ++pi) {
    auto& [name, p] = params.items[pi];
    const auto& g = grads[pi];
    if (g.rows != p.rows || g.cols != p.cols) throw NumericError("adam: gradient shape mismatch for " + name);
    auto& m = state.m[pi];
    auto& v = state.v[pi];
    for (std::size_t i = 0; i < p.data.size(); ++i) {
      float gi = g.data[i];
      if (!std::isfinite(gi)) throw NumericError("non-finite gradient in parameter '" + name + "'");
      gi += wd * p.data[i];
      m.data[i] = b1 * m.data[i] + (1.0f - b1) * gi;
      v.data[i] = b2 * v.data[i] + (1.0f - b2) * gi * gi;
      const double mhat = static_cast<double>(m.data[i]) / bc1;
      const double vhat = static_cast<double>(v.data[i]) / bc2;
      p.data[i] -= static_cast<float>(lr * mhat / (std::sqrt(vhat) + state.eps));
    }
  }
}

// ---- inference helpers -------------------------------------------------------

io::EmbeddingMatrix embed_spectra(const encoder::EncoderModel<float>& enc,
                                  const std::vector<preprocess::ProcessedSpectrum>& spectra) {
  io::EmbeddingMatrix m;
  m.n_rows = spectra.size();
  m.dim = enc.cfg.d_model;
  m.data.resize(m.n_rows * m.dim);
  std::vector<double> mz, inten;
  for (std::size_t i = 0; i < spectra.size(); ++i) {
    mz.clear();
    inten.clear();
    for (const auto& p : spectra[i].peaks) {
      mz.push_back(p.mz);
      inten.push_back(p.intensity);
    }
    nn::Graph<float> g;
    const auto bound = nn::bind_params(g, enc.params, false);
    const nn::Var pooled = enc.build(g, bound, mz, inten);
    const auto& row = g.value(pooled);
    std::copy(row.data.begin(), row.data.end(), m.data.begin() + static_cast<std::ptrdiff_t>(i * m.dim));
  }
  return m;
}

namespace {

std::vector<double> head_logits(const HeadModel<float>& head, const io::EmbeddingMatrix& emb) {
  const auto& w1 = head.params.get(head.prefix + ".w1");
  const auto& b1 = head.params.get(head.prefix + ".b1");
  const auto& w2 = head.params.get(head.prefix + ".w2");
  const auto& b2 = head.params.get(head.prefix + ".b2");
  std::vector<double> out(emb.n_rows);
  std::vector<double> h(head.hidden_dim);
  for (std::size_t r = 0; r < emb.n_rows; ++r) {
    const float* row = emb.data.data() + r * emb.dim;
    for (std::size_t j = 0; j < head.hidden_dim; ++j) {
      double acc = b1.data[j];
      for (std::size_t i = 0; i < emb.dim; ++i) acc += static_cast<double>(row[i]) * w1.at(i, j);
      h[j] = acc > 0.0 ? acc : 0.0;
    }
    double logit = b2.data[0];
    for (std::size_t j = 0; j < head.hidden_dim; ++j) logit += h[j] * w2.at(j, 0);
    out[r] = logit;
  }
  return out;
}

double mean_bce(const std::vector<double>& logits, const std::vector<int>& labels, double eps) {
  double acc = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) acc += bce_smoothed(logits[i], labels[i], eps);
  return logits.empty() ? 0.0 : acc / static_cast<double>(logits.size());
}

// shuffled cycling index stream; each task's loader advances independently
class Loader {
 public:
  Loader(std::size_t n, std::uint64_t seed) : rng_(seed, 0x10adUL) {
    order_.resize(n);
    std::iota(order_.begin(), order_.end(), 0);
    rng_.shuffle(order_);
  }

  std::vector<std::size_t> next(std::size_t b) {
    std::vector<std::size_t> out;
    out.reserve(b);
    while (out.size() < b) {
      if (pos_ == order_.size()) {
        rng_.shuffle(order_);
        pos_ = 0;
      }
      out.push_back(order_[pos_++]);
    }
    return out;
  }

 private:
  std::vector<std::size_t> order_;
  std::size_t pos_ = 0;
  Rng rng_;
};

std::vector<float> smoothed_targets(const std::vector<int>& labels, const std::vector<std::size_t>& idx,
                                    double eps) {
  std::vector<float> t;
  t.reserve(idx.size());
  for (std::size_t i : idx) {
    t.push_back(static_cast<float>(eps + static_cast<double>(labels[i]) * (1.0 - 2.0 * eps)));
  }
  return t;
}

std::vector<nn::Tensor<float>> collect_grads(nn::Graph<float>& g, const nn::BoundParams<float>& bound) {
  std::vector<nn::Tensor<float>> grads;
  grads.reserve(bound.vars.size());
  for (const auto& [name, var] : bound.vars) {
    (void)name;
    grads.push_back(g.grad(var));
  }
  return grads;
}

// mean of scalar loss vars
nn::Var mean_scalars(nn::Graph<float>& g, const std::vector<nn::Var>& items) {
  nn::Var total = items[0];
  for (std::size_t i = 1; i < items.size(); ++i) total = g.add(total, items[i]);
  return g.mul_scalar(total, 1.0f / static_cast<float>(items.size()));
}

std::string log_line(std::size_t step, const std::string& task, const std::string& split, double loss,
                     double auroc_value) {
  return std::to_string(step) + "\t" + task + "\t" + split + "\t" + io::format_double(loss) + "\t" +
         io::format_double(auroc_value);
}

void peaks_of(const preprocess::ProcessedSpectrum& s, std::vector<double>& mz, std::vector<double>& inten) {
  mz.clear();
  inten.clear();
  for (const auto& p : s.peaks) {
    mz.push_back(p.mz);
    inten.push_back(p.intensity);
  }
}

double valid_auroc_or_nan(const std::vector<double>& scores, const std::vector<int>& labels) {
  metrics::ScoredLabels s;
  s.scores = scores;
  s.labels = labels;
  return metrics::auroc(s);
}

}  // namespace

std::vector<double> head_scores(const HeadModel<float>& head, const io::EmbeddingMatrix& emb) {
  std::vector<double> logits = head_logits(head, emb);
  for (double& x : logits) x = 1.0 / (1.0 + std::exp(-x));
  return logits;
}

// ---- train_head ------------------------------------------------------------------

HeadTrainResult train_head(const io::EmbeddingMatrix& train_emb, const std::vector<int>& train_labels,
                           const io::EmbeddingMatrix& valid_emb, const std::vector<int>& valid_labels,
                           const TrainConfig& cfg, const std::string& task_label) {
  cfg.validate();
  if (train_emb.n_rows != train_labels.size() || valid_emb.n_rows != valid_labels.size()) {
    throw ConfigError("train_head: embedding/label row mismatch");
  }
  const std::size_t n_pos = static_cast<std::size_t>(std::count(valid_labels.begin(), valid_labels.end(), 1));
  if (n_pos == 0 || n_pos == valid_labels.size()) {
    throw DegenerateValidation("train_head: validation set has a single class");
  }

  const std::size_t d = train_emb.dim;
  const std::size_t hidden = cfg.head_hidden == 0 ? d : cfg.head_hidden;
  HeadModel<float> head = HeadModel<float>::init(task_label, d, hidden, cfg.seed);
  AdamState state = AdamState::init_like(head.params);

  nn::ParamSet<float> best_params = head.params;
  double best_auroc = -1.0;
  std::size_t since_best = 0;
  std::size_t steps_total = 0;
  std::size_t epoch = 0;
  HeadTrainResult result;

  const std::size_t n = train_emb.n_rows;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng shuffle_rng(cfg.seed, 0x5afe);

  while (since_best < cfg.patience_epochs && steps_total < cfg.max_steps) {
    ++epoch;
    shuffle_rng.shuffle(order);
    double train_loss_acc = 0.0;
    std::size_t train_batches = 0;
    for (std::size_t start = 0; start < n && steps_total < cfg.max_steps; start += cfg.batch_size) {
      const std::size_t b = std::min(cfg.batch_size, n - start);
      std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                   order.begin() + static_cast<std::ptrdiff_t>(start + b));
      nn::Graph<float> g;
      const auto bound = nn::bind_params(g, head.params);
      nn::Tensor<float> x(b, d);
      for (std::size_t i = 0; i < b; ++i) {
        const float* row = train_emb.data.data() + idx[i] * d;
        std::copy(row, row + d, x.data.begin() + static_cast<std::ptrdiff_t>(i * d));
      }
      nn::Var logits = head.build(g, bound, g.leaf(std::move(x)));
      nn::Var loss = g.mean_all(g.bce_rows(logits, smoothed_targets(train_labels, idx, cfg.label_smoothing)));
      g.backward(loss);
      train_loss_acc += g.value(loss).at(0, 0);
      ++train_batches;
      adam_step(head.params, collect_grads(g, bound), state, cfg.lr, cfg.weight_decay);
      ++steps_total;
    }

    const std::vector<double> logits = head_logits(head, valid_emb);
    const double vloss = mean_bce(logits, valid_labels, cfg.label_smoothing);
    const double vauroc = valid_auroc_or_nan(logits, valid_labels);
    result.log.push_back(log_line(steps_total, task_label, "valid", vloss, vauroc));
    (void)train_loss_acc;
    (void)train_batches;
    if (vauroc > best_auroc) {
      best_auroc = vauroc;
      best_params = head.params;
      since_best = 0;
    } else {
      ++since_best;
    }
  }

  head.params = best_params;
  result.head = std::move(head);
  result.best_auroc = best_auroc;
  result.epochs_run = epoch;
  return result;
}

// ---- train_end_to_end ---------------------------------------------------------------

namespace {

E2eResult train_e2e_once(const LabeledSpectra& train, const LabeledSpectra& valid,
                         const encoder::EncoderConfig& enc_cfg, const TrainConfig& cfg,
                         const std::string& task_label, bool freeze_encoder) {
  const std::size_t n = train.spectra.size();
  if (n == 0) throw ConfigError("train_end_to_end: empty training set");
  const std::size_t n_pos = static_cast<std::size_t>(std::count(valid.labels.begin(), valid.labels.end(), 1));
  if (n_pos == 0 || n_pos == valid.labels.size()) {
    throw DegenerateValidation("train_end_to_end: validation set has a single class");
  }

  encoder::EncoderModel<float> enc = encoder::EncoderModel<float>::init(enc_cfg, cfg.seed);
  const std::size_t hidden = cfg.head_hidden == 0 ? enc_cfg.d_model : cfg.head_hidden;
  HeadModel<float> head = HeadModel<float>::init(task_label, enc_cfg.d_model, hidden, cfg.seed);
  AdamState enc_state = AdamState::init_like(enc.params);
  AdamState head_state = AdamState::init_like(head.params);

  nn::ParamSet<float> best_enc = enc.params;
  nn::ParamSet<float> best_head = head.params;
  double best_auroc = -1.0;
  std::size_t since_best = 0;
  std::size_t steps_total = 0;

  E2eResult result;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng shuffle_rng(cfg.seed, 0xe2e);
  std::vector<double> mz, inten;

  while (since_best < cfg.patience_epochs && steps_total < cfg.max_steps) {
    shuffle_rng.shuffle(order);
    for (std::size_t start = 0; start < n && steps_total < cfg.max_steps; start += cfg.batch_size) {
      const std::size_t b = std::min(cfg.batch_size, n - start);
      std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                   order.begin() + static_cast<std::ptrdiff_t>(start + b));
      nn::Graph<float> g;
      const auto be = nn::bind_params(g, enc.params, !freeze_encoder);
      const auto bh = nn::bind_params(g, head.params);
      std::vector<nn::Var> item_losses;
      std::vector<float> targets = smoothed_targets(train.labels, idx, cfg.label_smoothing);
      for (std::size_t i = 0; i < b; ++i) {
        peaks_of(train.spectra[idx[i]], mz, inten);
        nn::Var pooled = enc.build(g, be, mz, inten);
        nn::Var logit = head.build(g, bh, pooled);
        item_losses.push_back(g.mean_all(g.bce_rows(logit, {targets[i]})));
      }
      nn::Var loss = mean_scalars(g, item_losses);
      g.backward(loss);
      if (!freeze_encoder) adam_step(enc.params, collect_grads(g, be), enc_state, cfg.lr, cfg.weight_decay);
      adam_step(head.params, collect_grads(g, bh), head_state, cfg.lr, cfg.weight_decay);
      ++steps_total;
    }

    const io::EmbeddingMatrix vemb = embed_spectra(enc, valid.spectra);
    const std::vector<double> logits = head_logits(head, vemb);
    const double vloss = mean_bce(logits, valid.labels, cfg.label_smoothing);
    const double vauroc = valid_auroc_or_nan(logits, valid.labels);
    result.log.push_back(log_line(steps_total, task_label, "valid", vloss, vauroc));
    if (vauroc > best_auroc) {
      best_auroc = vauroc;
      best_enc = enc.params;
      best_head = head.params;
      since_best = 0;
    } else {
      ++since_best;
    }
  }

  enc.params = std::move(best_enc);
  head.params = std::move(best_head);
  result.enc = std::move(enc);
  result.head = std::move(head);
  result.best_auroc = best_auroc;
  result.chosen_layers = enc_cfg.n_layers;
  return result;
}

}  // namespace

E2eResult train_end_to_end(const LabeledSpectra& train, const LabeledSpectra& valid,
                           encoder::EncoderConfig enc_cfg, const TrainConfig& cfg,
                           const std::string& task_label, std::vector<std::size_t> layer_sweep,
                           bool freeze_encoder) {
  cfg.validate();
  if (layer_sweep.empty()) layer_sweep.push_back(enc_cfg.n_layers);
  std::sort(layer_sweep.begin(), layer_sweep.end());

  E2eResult best;
  bool have = false;
  for (std::size_t layers : layer_sweep) {
    enc_cfg.n_layers = layers;
    E2eResult r = train_e2e_once(train, valid, enc_cfg, cfg, task_label, freeze_encoder);
    // ties keep the smaller layer count (sweep runs in ascending order)
    if (!have || r.best_auroc > best.best_auroc) {
      const auto log_prefix = best.log;
      best = std::move(r);
      have = true;
      if (!log_prefix.empty()) {
        best.log.insert(best.log.begin(), log_prefix.begin(), log_prefix.end());
      }
    } else {
      best.log.insert(best.log.end(), r.log.begin(), r.log.end());
    }
  }
  return best;
}

// ---- pretrain_denovo -------------------------------------------------------------------

namespace {

double denovo_valid_loss(const encoder::EncoderModel<float>& enc, const denovo::DecoderModel<float>& dec,
                         const std::vector<DenovoExample>& valid) {
  double acc = 0.0;
  for (const auto& ex : valid) acc += denovo::sequencing_loss(enc, dec, ex.spectrum, ex.peptide);
  return valid.empty() ? 0.0 : acc / static_cast<double>(valid.size());
}

}  // namespace

PretrainResult pretrain_denovo(const DenovoData& data, const encoder::EncoderConfig& enc_cfg,
                               const denovo::DecoderConfig& dec_cfg, const denovo::Vocabulary& vocab,
                               const TrainConfig& cfg) {
  cfg.validate();
  if (data.train.empty()) throw ConfigError("pretrain_denovo: empty training set");

  encoder::EncoderModel<float> enc = encoder::EncoderModel<float>::init(enc_cfg, cfg.seed);
  denovo::DecoderModel<float> dec = denovo::DecoderModel<float>::init(dec_cfg, vocab, cfg.seed);
  AdamState enc_state = AdamState::init_like(enc.params);
  AdamState dec_state = AdamState::init_like(dec.params);

  // tokenize up front; also validates every peptide against the vocabulary
  std::vector<std::vector<int>> token_ids;
  token_ids.reserve(data.train.size());
  for (const auto& ex : data.train) token_ids.push_back(vocab.tokenize(ex.peptide));

  PretrainResult result;
  nn::ParamSet<float> best_enc = enc.params;
  nn::ParamSet<float> best_dec = dec.params;
  double best_valid = std::numeric_limits<double>::infinity();

  Loader loader(data.train.size(), cfg.seed);
  std::vector<double> mz, inten;
  for (std::size_t step = 1; step <= cfg.max_steps; ++step) {
    const auto idx = loader.next(cfg.batch_size);
    nn::Graph<float> g;
    const auto be = nn::bind_params(g, enc.params);
    const auto bd = nn::bind_params(g, dec.params);
    std::vector<nn::Var> item_losses;
    for (std::size_t i : idx) {
      const auto& ex = data.train[i];
      peaks_of(ex.spectrum, mz, inten);
      nn::Var memory;
      enc.build(g, be, mz, inten, nullptr, &memory);
      auto [loss, rows] = dec.build_loss(g, bd, memory, ex.spectrum.precursor_mz, ex.spectrum.precursor_charge,
                                         token_ids[i]);
      (void)rows;
      item_losses.push_back(loss);
    }
    nn::Var loss = mean_scalars(g, item_losses);
    g.backward(loss);
    const double rate = cfg.use_schedule ? lr_at(step, cfg) : cfg.lr;
    adam_step(enc.params, collect_grads(g, be), enc_state, rate, cfg.weight_decay);
    adam_step(dec.params, collect_grads(g, bd), dec_state, rate, cfg.weight_decay);

    if (step % cfg.valid_every == 0 || step == cfg.max_steps) {
      const double vloss = data.valid.empty() ? static_cast<double>(g.value(loss).at(0, 0))
                                              : denovo_valid_loss(enc, dec, data.valid);
      result.log.push_back(log_line(step, "denovo", "valid", vloss, std::nan("")));
      if (vloss < best_valid) {
        best_valid = vloss;
        best_enc = enc.params;
        best_dec = dec.params;
      }
    }
  }

  enc.params = std::move(best_enc);
  dec.params = std::move(best_dec);
  result.enc = std::move(enc);
  result.dec = std::move(dec);
  result.best_valid_loss = best_valid;
  return result;
}

// ---- finetune_multitask ----------------------------------------------------------------

MultitaskResult finetune_multitask(const encoder::EncoderModel<float>& enc0,
                                   const denovo::DecoderModel<float>& dec0, const TaskData& quality,
                                   const TaskData& chimera, const TaskData& phospho, const DenovoData& dn,
                                   const TrainConfig& cfg) {
  cfg.validate();
  const std::array<const TaskData*, 3> tasks = {&quality, &chimera, &phospho};
  const std::array<Task, 3> task_ids = {Task::quality, Task::chimera, Task::phospho};
  const std::array<double, 3> weights = {cfg.w_quality, cfg.w_chimera, cfg.w_phospho};
  for (const TaskData* t : tasks) {
    if (t->train.spectra.empty() || t->valid.spectra.empty()) {
      throw ConfigError("finetune_multitask: every task needs non-empty train and valid sets");
    }
  }
  if (dn.train.empty()) throw ConfigError("finetune_multitask: empty de novo training set");

  encoder::EncoderModel<float> enc = enc0;
  denovo::DecoderModel<float> dec = dec0;
  const std::size_t d = enc.cfg.d_model;
  const std::size_t hidden = cfg.head_hidden == 0 ? d : cfg.head_hidden;
  std::map<Task, HeadModel<float>> heads;
  for (std::size_t t = 0; t < 3; ++t) {
    heads.emplace(task_ids[t], HeadModel<float>::init(task_name(task_ids[t]), d, hidden, cfg.seed));
  }

  AdamState enc_state = AdamState::init_like(enc.params);
  AdamState dec_state = AdamState::init_like(dec.params);
  std::map<Task, AdamState> head_states;
  for (auto& [task, head] : heads) head_states.emplace(task, AdamState::init_like(head.params));

  std::vector<std::vector<int>> dn_tokens;
  dn_tokens.reserve(dn.train.size());
  for (const auto& ex : dn.train) dn_tokens.push_back(dec.vocab.tokenize(ex.peptide));

  MultitaskResult result;
  struct Snapshot {
    nn::ParamSet<float> enc, dec;
    std::map<Task, nn::ParamSet<float>> heads;
  } best;
  double best_mean = std::numeric_limits<double>::infinity();
  std::size_t best_step = 0;

  auto run_validation = [&](std::size_t step) {
    double mean_downstream = 0.0;
    for (std::size_t t = 0; t < 3; ++t) {
      const io::EmbeddingMatrix vemb = embed_spectra(enc, tasks[t]->valid.spectra);
      const std::vector<double> logits = head_logits(heads.at(task_ids[t]), vemb);
      const double vloss = mean_bce(logits, tasks[t]->valid.labels, cfg.label_smoothing);
      const double vauroc = valid_auroc_or_nan(logits, tasks[t]->valid.labels);
      result.log.push_back(log_line(step, task_name(task_ids[t]), "valid", vloss, vauroc));
      mean_downstream += vloss;
    }
    mean_downstream /= 3.0;
    const double dn_loss = denovo_valid_loss(enc, dec, dn.valid);
    result.log.push_back(log_line(step, "denovo", "valid", dn_loss, std::nan("")));
    result.log.push_back(log_line(step, "downstream_mean", "valid", mean_downstream, std::nan("")));
    if (mean_downstream < best_mean) {
      best_mean = mean_downstream;
      best_step = step;
      best.enc = enc.params;
      best.dec = dec.params;
      best.heads.clear();
      for (const auto& [task, head] : heads) best.heads.emplace(task, head.params);
    }
    return mean_downstream;
  };

  result.step0_mean_valid_loss = run_validation(0);

  std::array<Loader, 3> loaders = {Loader(quality.train.spectra.size(), cfg.seed ^ 0x71),
                                   Loader(chimera.train.spectra.size(), cfg.seed ^ 0x72),
                                   Loader(phospho.train.spectra.size(), cfg.seed ^ 0x73)};
  Loader dn_loader(dn.train.size(), cfg.seed ^ 0x74);

  std::vector<double> mz, inten;
  for (std::size_t step = 1; step <= cfg.max_steps; ++step) {
    nn::Graph<float> g;
    const auto be = nn::bind_params(g, enc.params);
    const auto bd = nn::bind_params(g, dec.params);
    std::map<Task, nn::BoundParams<float>> bh;
    for (const auto& [task, head] : heads) bh.emplace(task, nn::bind_params(g, head.params));

    nn::Var total;
    bool first = true;
    std::array<double, 4> part_losses = {0, 0, 0, 0};
    for (std::size_t t = 0; t < 3; ++t) {
      const auto idx = loaders[t].next(cfg.batch_size);
      const auto& ds = tasks[t]->train;
      std::vector<float> targets = smoothed_targets(ds.labels, idx, cfg.label_smoothing);
      std::vector<nn::Var> item_losses;
      for (std::size_t i = 0; i < idx.size(); ++i) {
        peaks_of(ds.spectra[idx[i]], mz, inten);
        nn::Var pooled = enc.build(g, be, mz, inten);
        nn::Var logit = heads.at(task_ids[t]).build(g, bh.at(task_ids[t]), pooled);
        item_losses.push_back(g.mean_all(g.bce_rows(logit, {targets[i]})));
      }
      nn::Var task_mean = mean_scalars(g, item_losses);
      part_losses[t] = g.value(task_mean).at(0, 0);
      nn::Var task_loss = g.mul_scalar(task_mean, static_cast<float>(weights[t]));
      total = first ? task_loss : g.add(total, task_loss);
      first = false;
    }
    {
      const auto idx = dn_loader.next(cfg.batch_size);
      std::vector<nn::Var> item_losses;
      for (std::size_t i : idx) {
        const auto& ex = dn.train[i];
        peaks_of(ex.spectrum, mz, inten);
        nn::Var memory;
        enc.build(g, be, mz, inten, nullptr, &memory);
        auto [loss, rows] =
            dec.build_loss(g, bd, memory, ex.spectrum.precursor_mz, ex.spectrum.precursor_charge, dn_tokens[i]);
        (void)rows;
        item_losses.push_back(loss);
      }
      nn::Var dn_mean = mean_scalars(g, item_losses);
      part_losses[3] = g.value(dn_mean).at(0, 0);
      total = g.add(total, g.mul_scalar(dn_mean, static_cast<float>(cfg.w_denovo)));
    }
    if (step == 1) {
      result.first_step_task_losses = part_losses;
      result.first_step_total = g.value(total).at(0, 0);
    }
    g.backward(total);
    const double rate = cfg.use_schedule ? lr_at(step, cfg) : cfg.lr;
    adam_step(enc.params, collect_grads(g, be), enc_state, rate, cfg.weight_decay);
    adam_step(dec.params, collect_grads(g, bd), dec_state, rate, cfg.weight_decay);
    for (auto& [task, head] : heads) {
      adam_step(head.params, collect_grads(g, bh.at(task)), head_states.at(task), rate, cfg.weight_decay);
    }

    if (step % cfg.valid_every == 0 || step == cfg.max_steps) run_validation(step);
  }

  enc.params = std::move(best.enc);
  dec.params = std::move(best.dec);
  for (auto& [task, head] : heads) head.params = std::move(best.heads.at(task));
  result.enc = std::move(enc);
  result.dec = std::move(dec);
  result.heads = std::move(heads);
  result.best_mean_valid_loss = best_mean;
  result.best_step = best_step;
  return result;
}

}  // namespace specfm::train
