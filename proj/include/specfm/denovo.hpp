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
#include <utility>
#include <vector>

#include "specfm/chem.hpp"
#include "specfm/encoder.hpp"
#include "specfm/errors.hpp"
#include "specfm/nn.hpp"
#include "specfm/preprocess.hpp"

namespace specfm::denovo {

// Token inventory: canonical residues, modified variants carrying a mass
// delta, and the EOS marker. Ids are dense from 0; the padding id sits just
// past the last real token and never enters an embedding lookup.
class Vocabulary {
 public:
  struct Token {
    std::string text;
    char base = 0;       // residue letter; 0 for EOS
    double delta = 0.0;  // modification mass delta
  };

  // 20 canonical residues + phospho-S/T/Y + EOS.
  static Vocabulary builtin_default();
  // TSV "token\tmass_delta"; modified tokens written as e.g. "S[+79.96633]".
  static Vocabulary from_tsv(const std::string& text);
  static Vocabulary from_file(const std::string& path);
  std::string to_tsv() const;

  std::size_t size() const { return tokens_.size(); }  // includes EOS
  int eos_id() const { return eos_id_; }
  int pad_id() const { return static_cast<int>(tokens_.size()); }
  const std::vector<Token>& tokens() const { return tokens_; }

  // Throws VocabError when a residue/mod combination has no token.
  std::vector<int> tokenize(const chem::Peptide& p) const;
  chem::Peptide detokenize(const std::vector<int>& ids) const;

 private:
  void validate();
  std::vector<Token> tokens_;
  int eos_id_ = -1;
};

struct DecoderConfig {
  std::size_t d_model = 64;  // must match the encoder
  std::size_t n_layers = 2;
  std::size_t n_heads = 2;
  std::size_t ff_dim = 0;  // 0 = 4 * d_model
  std::size_t max_len = 30;
  std::size_t max_charge = 10;
  double lambda_min = 0.001;  // precursor m/z encoding wavelengths
  double lambda_max = 10000.0;

  std::size_t ff() const { return ff_dim == 0 ? 4 * d_model : ff_dim; }
  void validate() const;
};

// Standard sinusoidal position encoding (used for decoder token positions).
std::vector<double> encode_position(std::size_t pos, std::size_t d_model);

template <class T>
struct DecoderModel {
  DecoderConfig cfg;
  Vocabulary vocab;
  nn::ParamSet<T> params;

  static DecoderModel init(const DecoderConfig& cfg, const Vocabulary& vocab, std::uint64_t seed);
  static DecoderModel from_params(const DecoderConfig& cfg, const Vocabulary& vocab, const nn::ParamSet<T>& all);

  // Teacher-forced loss over `token_ids` (no EOS; it is appended here).
  // Returns (mean loss over len+1 positions, per-position losses).
  std::pair<nn::Var, nn::Var> build_loss(nn::Graph<T>& g, const nn::BoundParams<T>& bound, nn::Var memory,
                                         double precursor_mz, int precursor_charge,
                                         const std::vector<int>& token_ids) const;

  // Forward-only logits for a prefix; returns the final position's logits.
  std::vector<T> next_logits(const nn::Tensor<T>& memory, double precursor_mz, int precursor_charge,
                             const std::vector<int>& prefix_ids) const;

  int charge_index(int charge) const {
    int c = charge == 0 ? 2 : charge;  // unknown charge treated as 2
    if (c < 1) c = 1;
    if (c > static_cast<int>(cfg.max_charge)) c = static_cast<int>(cfg.max_charge);
    return c - 1;
  }
};

// Mean token-level categorical cross entropy, including the EOS position.
template <class T>
double sequencing_loss(const encoder::EncoderModel<T>& enc, const DecoderModel<T>& dec,
                       const preprocess::ProcessedSpectrum& spectrum, const chem::Peptide& peptide);

// Argmax decoding until EOS or max_len; deterministic.
template <class T>
chem::Peptide greedy_decode(const DecoderModel<T>& dec, const nn::Tensor<T>& memory, double precursor_mz,
                            int precursor_charge, std::size_t max_len);

// Positional match count / max(len_pred, len_truth).
double aa_accuracy(const chem::Peptide& predicted, const chem::Peptide& truth);

// ---- implementation -----------------------------------------------------------

namespace detail {

template <class T>
nn::Var decoder_block(nn::Graph<T>& g, const nn::BoundParams<T>& bound, const std::string& prefix, nn::Var x,
                      nn::Var memory, std::size_t n_heads) {
  using encoder::detail::linear;
  nn::Var q = linear(g, bound, prefix + ".self", x, "wq", "bq");
  nn::Var k = linear(g, bound, prefix + ".self", x, "wk", "bk");
  nn::Var v = linear(g, bound, prefix + ".self", x, "wv", "bv");
  nn::Var sa = g.attention(q, k, v, n_heads, /*causal=*/true);
  nn::Var sa_proj = g.add_rowwise(g.matmul(sa, bound.get(prefix + ".self.wo")), bound.get(prefix + ".self.bo"));
  x = g.layer_norm(g.add(x, sa_proj), bound.get(prefix + ".ln1.g"), bound.get(prefix + ".ln1.b"));

  nn::Var cq = linear(g, bound, prefix + ".cross", x, "wq", "bq");
  nn::Var ck = linear(g, bound, prefix + ".cross", memory, "wk", "bk");
  nn::Var cv = linear(g, bound, prefix + ".cross", memory, "wv", "bv");
  nn::Var ca = g.attention(cq, ck, cv, n_heads, /*causal=*/false);
  nn::Var ca_proj = g.add_rowwise(g.matmul(ca, bound.get(prefix + ".cross.wo")), bound.get(prefix + ".cross.bo"));
  x = g.layer_norm(g.add(x, ca_proj), bound.get(prefix + ".ln2.g"), bound.get(prefix + ".ln2.b"));

  nn::Var h = g.relu(linear(g, bound, prefix + ".ff", x, "w1", "b1"));
  nn::Var ff = g.add_rowwise(g.matmul(h, bound.get(prefix + ".ff.w2")), bound.get(prefix + ".ff.b2"));
  return g.layer_norm(g.add(x, ff), bound.get(prefix + ".ln3.g"), bound.get(prefix + ".ln3.b"));
}

// Decoder input rows: position 0 is the precursor embedding (m/z encoding +
// learned charge vector); positions 1..T are token embeddings plus
// sinusoidal position encodings.
template <class T>
nn::Var decoder_inputs(nn::Graph<T>& g, const nn::BoundParams<T>& bound, const DecoderConfig& cfg,
                       double precursor_mz, int charge_idx, const std::vector<int>& input_ids,
                       double lambda_min, double lambda_max) {
  nn::Tensor<T> prec_enc(1, cfg.d_model);
  const auto enc = encoder::encode_mz(precursor_mz, cfg.d_model, lambda_min, lambda_max);
  for (std::size_t j = 0; j < cfg.d_model; ++j) prec_enc.at(0, j) = static_cast<T>(enc[j]);
  nn::Var prec = g.add(g.leaf(std::move(prec_enc)), g.embed_rows(bound.get("dec.charge_emb"), {charge_idx}));
  if (input_ids.empty()) return prec;

  nn::Tensor<T> pos_rows(input_ids.size(), cfg.d_model);
  for (std::size_t i = 0; i < input_ids.size(); ++i) {
    const auto pe = encode_position(i + 1, cfg.d_model);
    for (std::size_t j = 0; j < cfg.d_model; ++j) pos_rows.at(i, j) = static_cast<T>(pe[j]);
  }
  nn::Var toks = g.add(g.embed_rows(bound.get("dec.tok_emb"), input_ids), g.leaf(std::move(pos_rows)));
  return g.vstack(prec, toks);
}

template <class T>
nn::Var decoder_logits(nn::Graph<T>& g, const nn::BoundParams<T>& bound, const DecoderConfig& cfg, nn::Var x,
                       nn::Var memory) {
  for (std::size_t l = 0; l < cfg.n_layers; ++l) {
    x = decoder_block(g, bound, "dec.l" + std::to_string(l), x, memory, cfg.n_heads);
  }
  return g.add_rowwise(g.matmul(x, bound.get("dec.out.w")), bound.get("dec.out.b"));
}

}  // namespace detail

template <class T>
DecoderModel<T> DecoderModel<T>::init(const DecoderConfig& cfg, const Vocabulary& vocab, std::uint64_t seed) {
  cfg.validate();
  DecoderModel<T> m;
  m.cfg = cfg;
  m.vocab = vocab;
  Rng rng(seed, 0xdec0de);
  const std::size_t d = cfg.d_model;
  m.params.add("dec.tok_emb", encoder::detail::xavier<T>(vocab.size(), d, rng));
  m.params.add("dec.charge_emb", encoder::detail::xavier<T>(cfg.max_charge, d, rng));
  for (std::size_t l = 0; l < cfg.n_layers; ++l) {
    const std::string prefix = "dec.l" + std::to_string(l);
    encoder::detail::add_attention_params(m.params, prefix + ".self", d, rng);
    encoder::detail::add_ln_params(m.params, prefix + ".ln1", d);
    encoder::detail::add_attention_params(m.params, prefix + ".cross", d, rng);
    encoder::detail::add_ln_params(m.params, prefix + ".ln2", d);
    encoder::detail::add_ff_params(m.params, prefix + ".ff", d, cfg.ff(), rng);
    encoder::detail::add_ln_params(m.params, prefix + ".ln3", d);
  }
  m.params.add("dec.out.w", encoder::detail::xavier<T>(d, vocab.size(), rng));
  m.params.add("dec.out.b", nn::Tensor<T>(1, vocab.size()));
  return m;
}

template <class T>
DecoderModel<T> DecoderModel<T>::from_params(const DecoderConfig& cfg, const Vocabulary& vocab,
                                             const nn::ParamSet<T>& all) {
  DecoderModel<T> m = init(cfg, vocab, 0);
  for (auto& [name, tensor] : m.params.items) {
    const nn::Tensor<T>* src = all.find(name);
    if (!src) throw FormatError("checkpoint missing tensor '" + name + "'");
    if (src->rows != tensor.rows || src->cols != tensor.cols) {
      throw FormatError("checkpoint tensor '" + name + "' has unexpected shape");
    }
    tensor = *src;
  }
  return m;
}

template <class T>
std::pair<nn::Var, nn::Var> DecoderModel<T>::build_loss(nn::Graph<T>& g, const nn::BoundParams<T>& bound,
                                                        nn::Var memory, double precursor_mz,
                                                        int precursor_charge,
                                                        const std::vector<int>& token_ids) const {
  if (token_ids.size() > cfg.max_len) throw VocabError("peptide longer than decoder max_len");
  for (int id : token_ids) {
    if (id < 0 || id >= static_cast<int>(vocab.size())) throw VocabError("token id out of range");
  }
  std::vector<int> targets = token_ids;
  targets.push_back(vocab.eos_id());

  nn::Var x = detail::decoder_inputs(g, bound, cfg, precursor_mz, charge_index(precursor_charge), token_ids,
                                     cfg.lambda_min, cfg.lambda_max);
  nn::Var logits = detail::decoder_logits(g, bound, cfg, x, memory);
  nn::Var rows = g.softmax_ce_rows(logits, targets);
  return {g.mean_all(rows), rows};
}

template <class T>
std::vector<T> DecoderModel<T>::next_logits(const nn::Tensor<T>& memory, double precursor_mz,
                                            int precursor_charge, const std::vector<int>& prefix_ids) const {
  nn::Graph<T> g;
  const nn::BoundParams<T> bound = nn::bind_params(g, params, /*trainable=*/false);
  nn::Var mem = g.leaf(memory);
  nn::Var x = detail::decoder_inputs(g, bound, cfg, precursor_mz, charge_index(precursor_charge), prefix_ids,
                                     cfg.lambda_min, cfg.lambda_max);
  nn::Var logits = detail::decoder_logits(g, bound, cfg, x, mem);
  const nn::Tensor<T>& lv = g.value(logits);
  const std::size_t last = lv.rows - 1;
  return std::vector<T>(lv.data.begin() + static_cast<std::ptrdiff_t>(last * lv.cols),
                        lv.data.begin() + static_cast<std::ptrdiff_t>((last + 1) * lv.cols));
}

template <class T>
double sequencing_loss(const encoder::EncoderModel<T>& enc, const DecoderModel<T>& dec,
                       const preprocess::ProcessedSpectrum& spectrum, const chem::Peptide& peptide) {
  std::vector<double> mz, inten;
  for (const auto& p : spectrum.peaks) {
    mz.push_back(p.mz);
    inten.push_back(p.intensity);
  }
  nn::Graph<T> g;
  const nn::BoundParams<T> be = nn::bind_params(g, enc.params, false);
  const nn::BoundParams<T> bd = nn::bind_params(g, dec.params, false);
  nn::Var memory;
  enc.build(g, be, mz, inten, nullptr, &memory);
  const auto [loss, rows] = dec.build_loss(g, bd, memory, spectrum.precursor_mz, spectrum.precursor_charge,
                                           dec.vocab.tokenize(peptide));
  return static_cast<double>(g.value(loss).at(0, 0));
}

template <class T>
chem::Peptide greedy_decode(const DecoderModel<T>& dec, const nn::Tensor<T>& memory, double precursor_mz,
                            int precursor_charge, std::size_t max_len) {
  std::vector<int> ids;
  while (ids.size() < max_len) {
    const auto logits = dec.next_logits(memory, precursor_mz, precursor_charge, ids);
    int best = 0;
    for (std::size_t j = 1; j < logits.size(); ++j) {
      if (logits[j] > logits[best]) best = static_cast<int>(j);
    }
    if (best == dec.vocab.eos_id()) break;
    ids.push_back(best);
  }
  return dec.vocab.detokenize(ids);
}

}  // namespace specfm::denovo
