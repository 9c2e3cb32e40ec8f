// Finite-difference gradient verification shared by the unit and acceptance
// suites. Everything runs in double.
#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "specfm/denovo.hpp"
#include "specfm/encoder.hpp"
#include "specfm/nn.hpp"
#include "specfm/train.hpp"

namespace gradcheck {

struct Failure {
  std::string param;
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

struct Result {
  std::size_t checked = 0;
  std::vector<Failure> failures;
  double worst_rel = 0.0;
};

// Tiny model set: encoder + classification head + decoder share one loss so
// a single sweep covers every parameter group.
struct TinyModels {
  specfm::encoder::EncoderModel<double> enc;
  specfm::denovo::DecoderModel<double> dec;
  specfm::train::HeadModel<double> head;
  std::vector<double> mz;
  std::vector<double> intensity;
  std::vector<int> token_ids;
  double precursor_mz = 0.0;
  int precursor_charge = 2;
  double bce_target = 1.0;
};

inline TinyModels make_tiny_models(std::uint64_t seed) {
  using namespace specfm;
  encoder::EncoderConfig ec;
  ec.d_model = 8;
  ec.n_layers = 1;
  ec.n_heads = 1;
  denovo::DecoderConfig dc;
  dc.d_model = 8;
  dc.n_layers = 1;
  dc.n_heads = 1;
  const denovo::Vocabulary vocab = denovo::Vocabulary::builtin_default();

  TinyModels t{encoder::EncoderModel<double>::init(ec, seed),
               denovo::DecoderModel<double>::init(dc, vocab, seed),
               train::HeadModel<double>::init("grad", ec.d_model, ec.d_model, seed),
               {212.5, 388.2, 731.9},
               {0.3, 0.8, 0.52},
               {},
               501.31,
               2,
               1.0};
  chem::Peptide pep;
  pep.sequence = "AG";  // 2 tokens
  t.token_ids = t.dec.vocab.tokenize(pep);
  return t;
}

// Loss = sequencing CE + smoothed BCE of the head on the pooled embedding.
// When `grads` is non-null, runs backward and appends one gradient tensor per
// parameter in (enc, dec, head) item order.
inline double tiny_forward(const TinyModels& t, std::vector<specfm::nn::Tensor<double>>* grads = nullptr) {
  using namespace specfm;
  nn::Graph<double> g;
  const bool trainable = grads != nullptr;
  const auto be = nn::bind_params(g, t.enc.params, trainable);
  const auto bd = nn::bind_params(g, t.dec.params, trainable);
  const auto bh = nn::bind_params(g, t.head.params, trainable);

  nn::Var memory;
  nn::Var pooled = t.enc.build(g, be, t.mz, t.intensity, nullptr, &memory);
  auto [ce, rows] = t.dec.build_loss(g, bd, memory, t.precursor_mz, t.precursor_charge, t.token_ids);
  (void)rows;
  nn::Var logit = t.head.build(g, bh, pooled);
  nn::Var bce = g.mean_all(g.bce_rows(logit, {t.bce_target}));
  nn::Var total = g.add(ce, bce);
  const double value = g.value(total).at(0, 0);
  if (grads) {
    g.backward(total);
    for (const auto* bound : {&be, &bd, &bh}) {
      for (const auto& [name, var] : bound->vars) {
        (void)name;
        grads->push_back(g.grad(var));
      }
    }
  }
  return value;
}

// Central differences at step `h` against the analytic gradients.
inline Result run_gradcheck(TinyModels& t, double h = 1e-4, double rel_tol = 1e-4) {
  using namespace specfm;
  Result res;

  std::vector<nn::Tensor<double>> analytic;
  tiny_forward(t, &analytic);

  std::vector<nn::ParamSet<double>*> sets = {&t.enc.params, &t.dec.params, &t.head.params};
  std::size_t flat = 0;
  for (nn::ParamSet<double>* set : sets) {
    for (auto& [name, tensor] : set->items) {
      const nn::Tensor<double>& grad = analytic[flat++];
      for (std::size_t i = 0; i < tensor.data.size(); ++i) {
        const double saved = tensor.data[i];
        tensor.data[i] = saved + h;
        const double up = tiny_forward(t);
        tensor.data[i] = saved - h;
        const double down = tiny_forward(t);
        tensor.data[i] = saved;
        const double numeric = (up - down) / (2.0 * h);
        const double a = grad.data[i];
        const double scale = std::max({std::abs(a), std::abs(numeric), 1e-8});
        const double rel = std::abs(a - numeric) / scale;
        ++res.checked;
        const bool ok = std::abs(a - numeric) <= 1e-7 || rel < rel_tol;
        if (!ok) {
          res.failures.push_back({name, i, a, numeric});
          res.worst_rel = std::max(res.worst_rel, rel);
        }
      }
    }
  }
  return res;
}

}  // namespace gradcheck
