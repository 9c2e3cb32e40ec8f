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

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "specfm/chem.hpp"
#include "specfm/denovo.hpp"
#include "specfm/encoder.hpp"
#include "specfm/msio.hpp"
#include "specfm/nn.hpp"
#include "specfm/preprocess.hpp"
#include "specfm/spectrum.hpp"

namespace specfm::train {

struct TrainConfig {
  double lr = 1e-3;  // peak rate when the warmup+cosine schedule is active
  double weight_decay = 1e-6;
  std::size_t batch_size = 32;
  double label_smoothing = 0.001;
  std::size_t warmup_steps = 1000;
  std::size_t cosine_half_period = 120000;
  std::size_t patience_epochs = 5;
  std::size_t max_steps = 50000;
  std::uint64_t seed = 0;
  std::size_t valid_every = 4000;  // step-based validation cadence
  bool use_schedule = false;       // single-task runs use a constant rate
  std::size_t head_hidden = 0;     // 0 = d_model (512 at paper scale)
  double w_quality = 1.0, w_chimera = 1.0, w_phospho = 1.0, w_denovo = 1.0;

  void validate() const;
};

// Smoothed binary cross entropy in the numerically stable logit form:
// y' = y(1-eps) + (1-y)eps; loss = max(x,0) - x*y' + log1p(exp(-|x|)).
double bce_smoothed(double logit, int y, double eps);

// Linear warmup to the peak rate, then cosine decay with the configured
// half-period, clamped at zero beyond warmup + half_period.
double lr_at(std::size_t step, const TrainConfig& cfg);

struct AdamState {
  std::vector<nn::Tensor<float>> m;
  std::vector<nn::Tensor<float>> v;
  std::int64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState init_like(const nn::ParamSet<float>& params);
};

// Coupled L2 weight decay (added to the gradient), then the bias-corrected
// Adam update. grads must parallel params.items. Throws NumericError on
// non-finite gradients.
void adam_step(nn::ParamSet<float>& params, const std::vector<nn::Tensor<float>>& grads, AdamState& state,
               double lr, double weight_decay);

// ---- dense classification head ----------------------------------------------

template <class T>
struct HeadModel {
  std::string prefix;  // parameter name prefix, e.g. "head.quality"
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;
  nn::ParamSet<T> params;

  static HeadModel init(const std::string& name, std::size_t input_dim, std::size_t hidden_dim,
                        std::uint64_t seed) {
    HeadModel m;
    m.prefix = "head." + name;
    m.input_dim = input_dim;
    m.hidden_dim = hidden_dim;
    Rng rng(seed, 0x4ead ^ std::hash<std::string>{}(name));
    m.params.add(m.prefix + ".w1", encoder::detail::xavier<T>(input_dim, hidden_dim, rng));
    m.params.add(m.prefix + ".b1", nn::Tensor<T>(1, hidden_dim));
    m.params.add(m.prefix + ".w2", encoder::detail::xavier<T>(hidden_dim, 1, rng));
    m.params.add(m.prefix + ".b2", nn::Tensor<T>(1, 1));
    return m;
  }

  static HeadModel from_params(const std::string& name, std::size_t input_dim, std::size_t hidden_dim,
                               const nn::ParamSet<T>& all) {
    HeadModel m = init(name, input_dim, hidden_dim, 0);
    for (auto& [pname, tensor] : m.params.items) {
      const nn::Tensor<T>* src = all.find(pname);
      if (!src) throw FormatError("checkpoint missing tensor '" + pname + "'");
      if (src->rows != tensor.rows || src->cols != tensor.cols) {
        throw FormatError("checkpoint tensor '" + pname + "' has unexpected shape");
      }
      tensor = *src;
    }
    return m;
  }

  // rows: m x input_dim -> logits m x 1
  nn::Var build(nn::Graph<T>& g, const nn::BoundParams<T>& bound, nn::Var rows) const {
    nn::Var h = g.relu(g.add_rowwise(g.matmul(rows, bound.get(prefix + ".w1")), bound.get(prefix + ".b1")));
    return g.add_rowwise(g.matmul(h, bound.get(prefix + ".w2")), bound.get(prefix + ".b2"));
  }
};

// ---- datasets ------------------------------------------------------------------

struct LabeledSpectra {
  std::vector<preprocess::ProcessedSpectrum> spectra;
  std::vector<int> labels;
};

struct TaskData {
  LabeledSpectra train;
  LabeledSpectra valid;
};

struct DenovoExample {
  preprocess::ProcessedSpectrum spectrum;
  chem::Peptide peptide;
};

struct DenovoData {
  std::vector<DenovoExample> train;
  std::vector<DenovoExample> valid;
};

// ---- inference helpers -----------------------------------------------------------

io::EmbeddingMatrix embed_spectra(const encoder::EncoderModel<float>& enc,
                                  const std::vector<preprocess::ProcessedSpectrum>& spectra);

// Sigmoid head outputs over embedding rows.
std::vector<double> head_scores(const HeadModel<float>& head, const io::EmbeddingMatrix& emb);

// ---- training loops ---------------------------------------------------------------

struct HeadTrainResult {
  HeadModel<float> head;
  double best_auroc = 0.0;
  std::size_t epochs_run = 0;
  std::vector<std::string> log;  // "step\ttask\tsplit\tloss\tauroc" per validation
};

// Epoch-based training with early stopping on validation AUROC; returns the
// best-AUROC snapshot. Throws DegenerateValidation when the validation set
// has a single class.
HeadTrainResult train_head(const io::EmbeddingMatrix& train_emb, const std::vector<int>& train_labels,
                           const io::EmbeddingMatrix& valid_emb, const std::vector<int>& valid_labels,
                           const TrainConfig& cfg, const std::string& task_label = "head");

struct E2eResult {
  encoder::EncoderModel<float> enc;
  HeadModel<float> head;
  double best_auroc = 0.0;
  std::size_t chosen_layers = 0;
  std::vector<std::string> log;
};

// Joint encoder+head optimization from scratch; optional layer-count sweep
// selecting by validation AUROC (ties to the smaller count).
// freeze_encoder skips encoder updates (random-encoder ablation).
E2eResult train_end_to_end(const LabeledSpectra& train, const LabeledSpectra& valid,
                           encoder::EncoderConfig enc_cfg, const TrainConfig& cfg,
                           const std::string& task_label = "e2e", std::vector<std::size_t> layer_sweep = {},
                           bool freeze_encoder = false);

struct PretrainResult {
  encoder::EncoderModel<float> enc;
  denovo::DecoderModel<float> dec;
  double best_valid_loss = 0.0;
  std::vector<std::string> log;
};

// Supervised sequence pre-training of encoder+decoder; keeps the snapshot
// with the lowest validation loss.
PretrainResult pretrain_denovo(const DenovoData& data, const encoder::EncoderConfig& enc_cfg,
                               const denovo::DecoderConfig& dec_cfg, const denovo::Vocabulary& vocab,
                               const TrainConfig& cfg);

struct MultitaskResult {
  encoder::EncoderModel<float> enc;
  denovo::DecoderModel<float> dec;
  std::map<Task, HeadModel<float>> heads;
  double step0_mean_valid_loss = 0.0;
  double best_mean_valid_loss = 0.0;
  std::size_t best_step = 0;
  // first optimizer step's batch losses (quality, chimera, phospho, denovo)
  // and the combined objective, for loss-additivity checks
  std::array<double, 4> first_step_task_losses = {0, 0, 0, 0};
  double first_step_total = 0.0;
  std::vector<std::string> log;
};

// Each step draws one batch per task and minimizes the weighted sum of the
// three head losses plus the sequencing loss; validation every
// cfg.valid_every steps (step 0 included); returns the checkpoint with the
// lowest mean downstream validation loss.
MultitaskResult finetune_multitask(const encoder::EncoderModel<float>& enc0,
                                   const denovo::DecoderModel<float>& dec0, const TaskData& quality,
                                   const TaskData& chimera, const TaskData& phospho, const DenovoData& dn,
                                   const TrainConfig& cfg);

}  // namespace specfm::train
