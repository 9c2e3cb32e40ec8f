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

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "specfm/errors.hpp"
#include "specfm/nn.hpp"
#include "specfm/preprocess.hpp"
#include "specfm/rng.hpp"

namespace specfm::encoder {

struct EncoderConfig {
  std::size_t d_model = 64;   // paper-scale 512
  std::size_t n_layers = 2;   // paper-scale 9
  std::size_t n_heads = 2;    // paper-scale 8
  std::size_t ff_dim = 0;     // 0 = 4 * d_model
  double dropout = 0.0;
  double lambda_min = 0.001;  // Th
  double lambda_max = 10000.0;

  std::size_t ff() const { return ff_dim == 0 ? 4 * d_model : ff_dim; }
  void validate() const;
};

// Sinusoidal m/z encoding over geometrically spaced wavelengths:
// lambda_k = lambda_min * (lambda_max/lambda_min)^(k/(d/2-1)), out[k] =
// sin(2*pi*mz/lambda_k), out[d/2+k] = cos(...).
std::vector<double> encode_mz(double mz, std::size_t d_model, double lambda_min = 0.001,
                              double lambda_max = 10000.0);

// Padded batch of preprocessed spectra.
struct PeakBatch {
  std::size_t batch = 0;
  std::size_t max_len = 0;
  std::vector<double> mz;         // batch * max_len, padded 0
  std::vector<double> intensity;  // batch * max_len, padded 0
  std::vector<char> mask;         // 1 = valid peak

  // Valid (mz, intensity) pairs of one row, in stored order.
  void row_valid(std::size_t row, std::vector<double>& out_mz, std::vector<double>& out_intensity) const;
  void validate() const;  // finite values, >=1 valid peak per row
};

PeakBatch pack_batch(const std::vector<preprocess::ProcessedSpectrum>& spectra);

template <class T>
struct EncoderModel {
  EncoderConfig cfg;
  nn::ParamSet<T> params;

  static EncoderModel init(const EncoderConfig& cfg, std::uint64_t seed);
  // Adopts tensors named enc.* from a loaded checkpoint; throws FormatError
  // naming any missing tensor or shape mismatch.
  static EncoderModel from_params(const EncoderConfig& cfg, const nn::ParamSet<T>& all);

  // Appends the per-peak embedding + transformer stack for one spectrum to
  // the graph. Returns the pooled (1 x d) embedding; *out_memory receives
  // the per-peak outputs (L x d) when non-null. dropout_rng may be null when
  // cfg.dropout == 0.
  nn::Var build(nn::Graph<T>& g, const nn::BoundParams<T>& bound, const std::vector<double>& mz,
                const std::vector<double>& intensity, Rng* dropout_rng = nullptr,
                nn::Var* out_memory = nullptr) const;
};

// Per-peak embeddings only: encode_mz(mz) + intensity * w_int.
template <class T>
nn::Tensor<T> embed_peaks(const EncoderModel<T>& model, const std::vector<double>& mz,
                          const std::vector<double>& intensity);

// Pooled embeddings for every row of the batch (no gradients).
template <class T>
nn::Tensor<T> encode_pooled(const EncoderModel<T>& model, const PeakBatch& batch);

// Pooled embedding and peak memory for a single spectrum.
template <class T>
std::pair<nn::Tensor<T>, nn::Tensor<T>> encode_one(const EncoderModel<T>& model, const std::vector<double>& mz,
                                                   const std::vector<double>& intensity);

// ---- implementation -----------------------------------------------------------

namespace detail {

template <class T>
nn::Tensor<T> xavier(std::size_t rows, std::size_t cols, Rng& rng) {
  nn::Tensor<T> t(rows, cols);
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  for (auto& x : t.data) x = static_cast<T>(rng.uniform(-limit, limit));
  return t;
}

template <class T>
void add_attention_params(nn::ParamSet<T>& p, const std::string& prefix, std::size_t d, Rng& rng) {
  p.add(prefix + ".wq", xavier<T>(d, d, rng));
  p.add(prefix + ".wk", xavier<T>(d, d, rng));
  p.add(prefix + ".wv", xavier<T>(d, d, rng));
  p.add(prefix + ".wo", xavier<T>(d, d, rng));
  p.add(prefix + ".bq", nn::Tensor<T>(1, d));
  p.add(prefix + ".bk", nn::Tensor<T>(1, d));
  p.add(prefix + ".bv", nn::Tensor<T>(1, d));
  p.add(prefix + ".bo", nn::Tensor<T>(1, d));
}

template <class T>
void add_ln_params(nn::ParamSet<T>& p, const std::string& prefix, std::size_t d) {
  p.add(prefix + ".g", nn::Tensor<T>(1, d, T(1)));
  p.add(prefix + ".b", nn::Tensor<T>(1, d));
}

template <class T>
void add_ff_params(nn::ParamSet<T>& p, const std::string& prefix, std::size_t d, std::size_t ff, Rng& rng) {
  p.add(prefix + ".w1", xavier<T>(d, ff, rng));
  p.add(prefix + ".b1", nn::Tensor<T>(1, ff));
  p.add(prefix + ".w2", xavier<T>(ff, d, rng));
  p.add(prefix + ".b2", nn::Tensor<T>(1, d));
}

// Linear projection: x * W + b.
template <class T>
nn::Var linear(nn::Graph<T>& g, const nn::BoundParams<T>& bound, const std::string& prefix, nn::Var x,
               const char* w, const char* b) {
  return g.add_rowwise(g.matmul(x, bound.get(prefix + "." + w)), bound.get(prefix + "." + b));
}

// One post-norm self-attention + feed-forward block.
template <class T>
nn::Var encoder_block(nn::Graph<T>& g, const nn::BoundParams<T>& bound, const std::string& prefix, nn::Var x,
                      std::size_t n_heads, double dropout, Rng* rng) {
  nn::Var q = linear(g, bound, prefix + ".attn", x, "wq", "bq");
  nn::Var k = linear(g, bound, prefix + ".attn", x, "wk", "bk");
  nn::Var v = linear(g, bound, prefix + ".attn", x, "wv", "bv");
  nn::Var ctx = g.attention(q, k, v, n_heads, /*causal=*/false);
  nn::Var proj = g.add_rowwise(g.matmul(ctx, bound.get(prefix + ".attn.wo")), bound.get(prefix + ".attn.bo"));
  if (dropout > 0.0 && rng) proj = g.dropout(proj, dropout, *rng);
  x = g.layer_norm(g.add(x, proj), bound.get(prefix + ".ln1.g"), bound.get(prefix + ".ln1.b"));
  nn::Var h = g.relu(linear(g, bound, prefix + ".ff", x, "w1", "b1"));
  nn::Var ff = g.add_rowwise(g.matmul(h, bound.get(prefix + ".ff.w2")), bound.get(prefix + ".ff.b2"));
  if (dropout > 0.0 && rng) ff = g.dropout(ff, dropout, *rng);
  return g.layer_norm(g.add(x, ff), bound.get(prefix + ".ln2.g"), bound.get(prefix + ".ln2.b"));
}

// Leaf with the fixed sinusoidal m/z encodings of a peak list.
template <class T>
nn::Tensor<T> mz_encoding_rows(const EncoderConfig& cfg, const std::vector<double>& mz) {
  nn::Tensor<T> rows(mz.size(), cfg.d_model);
  for (std::size_t i = 0; i < mz.size(); ++i) {
    const auto enc = encode_mz(mz[i], cfg.d_model, cfg.lambda_min, cfg.lambda_max);
    for (std::size_t j = 0; j < cfg.d_model; ++j) rows.at(i, j) = static_cast<T>(enc[j]);
  }
  return rows;
}

}  // namespace detail

template <class T>
EncoderModel<T> EncoderModel<T>::init(const EncoderConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  EncoderModel<T> m;
  m.cfg = cfg;
  Rng rng(seed, 0xe4c0de);
  m.params.add("enc.w_int", detail::xavier<T>(1, cfg.d_model, rng));
  for (std::size_t l = 0; l < cfg.n_layers; ++l) {
    const std::string prefix = "enc.l" + std::to_string(l);
    detail::add_attention_params(m.params, prefix + ".attn", cfg.d_model, rng);
    detail::add_ln_params(m.params, prefix + ".ln1", cfg.d_model);
    detail::add_ff_params(m.params, prefix + ".ff", cfg.d_model, cfg.ff(), rng);
    detail::add_ln_params(m.params, prefix + ".ln2", cfg.d_model);
  }
  return m;
}

template <class T>
EncoderModel<T> EncoderModel<T>::from_params(const EncoderConfig& cfg, const nn::ParamSet<T>& all) {
  EncoderModel<T> m = init(cfg, 0);
  for (auto& [name, tensor] : m.params.items) {
    const nn::Tensor<T>* src = all.find(name);
    if (!src) throw FormatError("checkpoint missing tensor '" + name + "'");
    if (src->rows != tensor.rows || src->cols != tensor.cols) {
      throw FormatError("checkpoint tensor '" + name + "' has shape " + std::to_string(src->rows) + "x" +
                        std::to_string(src->cols) + ", expected " + std::to_string(tensor.rows) + "x" +
                        std::to_string(tensor.cols));
    }
    tensor = *src;
  }
  return m;
}

template <class T>
nn::Var EncoderModel<T>::build(nn::Graph<T>& g, const nn::BoundParams<T>& bound, const std::vector<double>& mz,
                               const std::vector<double>& intensity, Rng* dropout_rng,
                               nn::Var* out_memory) const {
  if (mz.empty()) throw EmptySpectrum("encoder: empty peak list");
  for (std::size_t i = 0; i < mz.size(); ++i) {
    if (!std::isfinite(mz[i]) || !std::isfinite(intensity[i])) {
      throw NumericError("encoder: non-finite peak input");
    }
  }
  nn::Var mz_enc = g.leaf(detail::mz_encoding_rows<T>(cfg, mz));
  nn::Tensor<T> inten_col(mz.size(), 1);
  for (std::size_t i = 0; i < intensity.size(); ++i) inten_col.at(i, 0) = static_cast<T>(intensity[i]);
  nn::Var x = g.add(mz_enc, g.matmul(g.leaf(std::move(inten_col)), bound.get("enc.w_int")));
  for (std::size_t l = 0; l < cfg.n_layers; ++l) {
    x = detail::encoder_block(g, bound, "enc.l" + std::to_string(l), x, cfg.n_heads, cfg.dropout, dropout_rng);
  }
  if (out_memory) *out_memory = x;
  return g.mean_rows(x);
}

template <class T>
nn::Tensor<T> embed_peaks(const EncoderModel<T>& model, const std::vector<double>& mz,
                          const std::vector<double>& intensity) {
  for (std::size_t i = 0; i < mz.size(); ++i) {
    if (!std::isfinite(mz[i]) || !std::isfinite(intensity[i])) {
      throw NumericError("embed_peaks: non-finite peak input");
    }
  }
  nn::Graph<T> g;
  nn::Var table = g.leaf(model.params.get("enc.w_int"));
  nn::Tensor<T> inten_col(mz.size(), 1);
  for (std::size_t i = 0; i < intensity.size(); ++i) inten_col.at(i, 0) = static_cast<T>(intensity[i]);
  nn::Var out =
      g.add(g.leaf(detail::mz_encoding_rows<T>(model.cfg, mz)), g.matmul(g.leaf(std::move(inten_col)), table));
  return g.value(out);
}

template <class T>
nn::Tensor<T> encode_pooled(const EncoderModel<T>& model, const PeakBatch& batch) {
  batch.validate();
  nn::Tensor<T> out(batch.batch, model.cfg.d_model);
  std::vector<double> mz, inten;
  for (std::size_t r = 0; r < batch.batch; ++r) {
    batch.row_valid(r, mz, inten);
    nn::Graph<T> g;
    const nn::BoundParams<T> bound = nn::bind_params(g, model.params, /*trainable=*/false);
    const nn::Var pooled = model.build(g, bound, mz, inten);
    const nn::Tensor<T>& row = g.value(pooled);
    for (std::size_t j = 0; j < model.cfg.d_model; ++j) out.at(r, j) = row.data[j];
  }
  return out;
}

template <class T>
std::pair<nn::Tensor<T>, nn::Tensor<T>> encode_one(const EncoderModel<T>& model, const std::vector<double>& mz,
                                                   const std::vector<double>& intensity) {
  nn::Graph<T> g;
  const nn::BoundParams<T> bound = nn::bind_params(g, model.params, /*trainable=*/false);
  nn::Var memory;
  const nn::Var pooled = model.build(g, bound, mz, intensity, nullptr, &memory);
  return {g.value(pooled), g.value(memory)};
}

}  // namespace specfm::encoder
