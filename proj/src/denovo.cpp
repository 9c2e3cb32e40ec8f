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
#include "specfm/denovo.hpp"

#include <charconv>
#include <cmath>
#include <sstream>

#include "specfm/msio.hpp"

namespace specfm::denovo {

namespace {
constexpr const char* kEosText = "<eos>";
}

void Vocabulary::validate() {
  if (tokens_.empty()) throw VocabError("vocabulary: empty");
  eos_id_ = -1;
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    const Token& t = tokens_[i];
    if (t.text == kEosText) {
      if (eos_id_ >= 0) throw VocabError("vocabulary: duplicate EOS token");
      eos_id_ = static_cast<int>(i);
      continue;
    }
    if (!chem::is_canonical_residue(t.base)) {
      throw VocabError("vocabulary: token '" + t.text + "' has no residue mass");
    }
  }
  if (eos_id_ < 0) throw VocabError("vocabulary: missing EOS token");
}

Vocabulary Vocabulary::builtin_default() {
  Vocabulary v;
  for (const auto& [code, mass] : chem::residue_masses()) {
    (void)mass;
    v.tokens_.push_back({std::string(1, code), code, 0.0});
  }
  for (char c : {'S', 'T', 'Y'}) {
    v.tokens_.push_back({std::string(1, c) + "[+79.96633]", c, chem::kPhosphoDelta});
  }
  v.tokens_.push_back({kEosText, 0, 0.0});
  v.validate();
  return v;
}

Vocabulary Vocabulary::from_tsv(const std::string& text) {
  Vocabulary v;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (lineno == 1 && line == "token\tmass_delta") continue;
    const std::size_t tab = line.find('\t');
    if (tab == std::string::npos) throw VocabError("vocabulary line " + std::to_string(lineno) + ": no tab");
    Token t;
    t.text = line.substr(0, tab);
    const std::string delta_text = line.substr(tab + 1);
    auto res = std::from_chars(delta_text.data(), delta_text.data() + delta_text.size(), t.delta);
    if (res.ec != std::errc() || res.ptr != delta_text.data() + delta_text.size()) {
      throw VocabError("vocabulary line " + std::to_string(lineno) + ": bad mass delta '" + delta_text + "'");
    }
    t.base = t.text.empty() || t.text == kEosText ? 0 : t.text[0];
    v.tokens_.push_back(std::move(t));
  }
  v.validate();
  return v;
}

Vocabulary Vocabulary::from_file(const std::string& path) { return from_tsv(io::read_file(path)); }

std::string Vocabulary::to_tsv() const {
  std::string out = "token\tmass_delta\n";
  for (const auto& t : tokens_) out += t.text + "\t" + io::format_double(t.delta) + "\n";
  return out;
}

std::vector<int> Vocabulary::tokenize(const chem::Peptide& p) const {
  chem::validate_peptide(p);
  std::vector<double> deltas(p.sequence.size(), 0.0);
  for (const auto& [pos, delta] : p.mods) deltas[pos] += delta;

  std::vector<int> ids;
  ids.reserve(p.sequence.size());
  for (std::size_t i = 0; i < p.sequence.size(); ++i) {
    int found = -1;
    for (std::size_t t = 0; t < tokens_.size(); ++t) {
      if (static_cast<int>(t) == eos_id_) continue;
      if (tokens_[t].base == p.sequence[i] && std::abs(tokens_[t].delta - deltas[i]) < 1e-3) {
        found = static_cast<int>(t);
        break;
      }
    }
    if (found < 0) {
      throw VocabError("no vocabulary token for residue '" + std::string(1, p.sequence[i]) + "' with delta " +
                       std::to_string(deltas[i]));
    }
    ids.push_back(found);
  }
  return ids;
}

chem::Peptide Vocabulary::detokenize(const std::vector<int>& ids) const {
  chem::Peptide p;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const int id = ids[i];
    if (id < 0 || id >= static_cast<int>(tokens_.size()) || id == eos_id_) {
      throw VocabError("detokenize: invalid token id " + std::to_string(id));
    }
    const Token& t = tokens_[static_cast<std::size_t>(id)];
    p.sequence.push_back(t.base);
    if (t.delta != 0.0) p.mods.emplace_back(i, t.delta);
  }
  return p;
}

void DecoderConfig::validate() const {
  if (d_model == 0 || d_model % 2 != 0) throw ConfigError("decoder: d_model must be even and positive");
  if (n_heads == 0 || d_model % n_heads != 0) throw ConfigError("decoder: d_model must be divisible by n_heads");
  if (n_layers < 1) throw ConfigError("decoder: n_layers must be >= 1");
  if (max_charge < 1) throw ConfigError("decoder: max_charge must be >= 1");
  if (!(lambda_min < lambda_max) || lambda_min <= 0.0) {
    throw ConfigError("decoder: need 0 < lambda_min < lambda_max");
  }
}

std::vector<double> encode_position(std::size_t pos, std::size_t d_model) {
  std::vector<double> out(d_model);
  for (std::size_t i = 0; i < d_model; i += 2) {
    const double freq = std::pow(10000.0, static_cast<double>(i) / static_cast<double>(d_model));
    out[i] = std::sin(static_cast<double>(pos) / freq);
    if (i + 1 < d_model) out[i + 1] = std::cos(static_cast<double>(pos) / freq);
  }
  return out;
}

double aa_accuracy(const chem::Peptide& predicted, const chem::Peptide& truth) {
  const std::size_t np = predicted.sequence.size();
  const std::size_t nt = truth.sequence.size();
  if (np == 0 && nt == 0) return 1.0;
  const std::size_t denom = std::max(np, nt);
  if (denom == 0) return 0.0;

  auto deltas_of = [](const chem::Peptide& p) {
    std::vector<double> d(p.sequence.size(), 0.0);
    for (const auto& [pos, delta] : p.mods) {
      if (pos < d.size()) d[pos] += delta;
    }
    return d;
  };
  const auto dp = deltas_of(predicted);
  const auto dt = deltas_of(truth);

  std::size_t matches = 0;
  for (std::size_t i = 0; i < std::min(np, nt); ++i) {
    if (predicted.sequence[i] == truth.sequence[i] && std::abs(dp[i] - dt[i]) < 1e-6) ++matches;
  }
  return static_cast<double>(matches) / static_cast<double>(denom);
}

}  // namespace specfm::denovo
