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
#include "specfm/runconfig.hpp"

#include <charconv>
#include <cstdint>
#include <functional>
#include <map>
#include <sstream>

#include "specfm/errors.hpp"
#include "specfm/msio.hpp"

namespace specfm::config {

namespace {

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    throw ConfigError("config key '" + key + "': bad numeric value '" + v + "'");
  }
  return out;
}

std::size_t to_size(const std::string& key, const std::string& v) {
  const double d = to_double(key, v);
  if (d < 0 || d != static_cast<double>(static_cast<std::size_t>(d))) {
    throw ConfigError("config key '" + key + "': expected a non-negative integer, got '" + v + "'");
  }
  return static_cast<std::size_t>(d);
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("config key '" + key + "': expected true/false, got '" + v + "'");
}

std::string trim(const std::string& s) {
  const std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
  using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;
  static const std::map<std::string, Setter> setters = {
      {"encoder.d_model", [](RunConfig& c, const std::string& k, const std::string& v) { c.encoder.d_model = to_size(k, v); }},
      {"encoder.n_layers", [](RunConfig& c, const std::string& k, const std::string& v) { c.encoder.n_layers = to_size(k, v); }},
      {"encoder.n_heads", [](RunConfig& c, const std::string& k, const std::string& v) { c.encoder.n_heads = to_size(k, v); }},
      {"encoder.ff_dim", [](RunConfig& c, const std::string& k, const std::string& v) { c.encoder.ff_dim = to_size(k, v); }},
      {"encoder.dropout", [](RunConfig& c, const std::string& k, const std::string& v) { c.encoder.dropout = to_double(k, v); }},
      {"encoder.lambda_min", [](RunConfig& c, const std::string& k, const std::string& v) { c.encoder.lambda_min = to_double(k, v); }},
      {"encoder.lambda_max", [](RunConfig& c, const std::string& k, const std::string& v) { c.encoder.lambda_max = to_double(k, v); }},
      {"decoder.n_layers", [](RunConfig& c, const std::string& k, const std::string& v) { c.decoder.n_layers = to_size(k, v); }},
      {"decoder.n_heads", [](RunConfig& c, const std::string& k, const std::string& v) { c.decoder.n_heads = to_size(k, v); }},
      {"decoder.ff_dim", [](RunConfig& c, const std::string& k, const std::string& v) { c.decoder.ff_dim = to_size(k, v); }},
      {"decoder.max_len", [](RunConfig& c, const std::string& k, const std::string& v) { c.decoder.max_len = to_size(k, v); }},
      {"decoder.max_charge", [](RunConfig& c, const std::string& k, const std::string& v) { c.decoder.max_charge = to_size(k, v); }},
      {"train.lr", [](RunConfig& c, const std::string& k, const std::string& v) { c.train.lr = to_double(k, v); }},
      {"train.weight_decay", [](RunConfig& c, const std::string& k, const std::string& v) { c.train.weight_decay = to_double(k, v); }},
      {"train.batch_size", [](RunConfig& c, const std::string& k, const std::string& v) { c.train.batch_size = to_size(k, v); }},
      {"train.label_smoothing", [](RunConfig& c, const std::string& k, const std::string& v) { c.train.label_smoothing = to_double(k, v); }},
      {"train.warmup_steps", [](RunConfig& c, const std::string& k, const std::string& v) { c.train.warmup_steps = to_size(k, v); }},
      {"train.cosine_half_period", [](RunConfig& c, const std::string& k, const std::string& v) { c.train.cosine_half_period = to_size(k, v); }},
      {"train.patience_epochs", [](RunConfig& c, const std::string& k, const std::string& v) { c.train.patience_epochs = to_size(k, v); }},
      {"train.max_steps", [](RunConfig& c, const std::string& k, const std::string& v) { c.train.max_steps = to_size(k, v); }},
      {"train.seed", [](RunConfig& c, const std::string& k, const std::string& v) { c.train.seed = to_size(k, v); }},
      {"train.valid_every", [](RunConfig& c, const std::string& k, const std::string& v) { c.train.valid_every = to_size(k, v); }},
      {"train.use_schedule", [](RunConfig& c, const std::string& k, const std::string& v) { c.train.use_schedule = to_bool(k, v); }},
      {"train.head_hidden", [](RunConfig& c, const std::string& k, const std::string& v) { c.train.head_hidden = to_size(k, v); }},
      {"train.w_quality", [](RunConfig& c, const std::string& k, const std::string& v) { c.train.w_quality = to_double(k, v); }},
      {"train.w_chimera", [](RunConfig& c, const std::string& k, const std::string& v) { c.train.w_chimera = to_double(k, v); }},
      {"train.w_phospho", [](RunConfig& c, const std::string& k, const std::string& v) { c.train.w_phospho = to_double(k, v); }},
      {"train.w_denovo", [](RunConfig& c, const std::string& k, const std::string& v) { c.train.w_denovo = to_double(k, v); }},
      {"gbdt.max_depth", [](RunConfig& c, const std::string& k, const std::string& v) { c.gbdt.max_depth = to_size(k, v); }},
      {"gbdt.eta", [](RunConfig& c, const std::string& k, const std::string& v) { c.gbdt.eta = to_double(k, v); }},
      {"gbdt.lambda_l2", [](RunConfig& c, const std::string& k, const std::string& v) { c.gbdt.lambda_l2 = to_double(k, v); }},
      {"gbdt.min_child_weight", [](RunConfig& c, const std::string& k, const std::string& v) { c.gbdt.min_child_weight = to_double(k, v); }},
      {"gbdt.max_rounds", [](RunConfig& c, const std::string& k, const std::string& v) { c.gbdt.max_rounds = to_size(k, v); }},
      {"gbdt.early_stopping_rounds", [](RunConfig& c, const std::string& k, const std::string& v) { c.gbdt.early_stopping_rounds = to_size(k, v); }},
      {"preprocess.encoder_mz_min", [](RunConfig& c, const std::string& k, const std::string& v) { c.preprocess.encoder_mz_min = to_double(k, v); }},
      {"preprocess.encoder_mz_max", [](RunConfig& c, const std::string& k, const std::string& v) { c.preprocess.encoder_mz_max = to_double(k, v); }},
      {"preprocess.max_peaks", [](RunConfig& c, const std::string& k, const std::string& v) { c.preprocess.max_peaks = to_size(k, v); }},
      {"preprocess.bin_lo", [](RunConfig& c, const std::string& k, const std::string& v) { c.preprocess.bin_lo = to_double(k, v); }},
      {"preprocess.bin_hi", [](RunConfig& c, const std::string& k, const std::string& v) { c.preprocess.bin_hi = to_double(k, v); }},
      {"preprocess.n_bins", [](RunConfig& c, const std::string& k, const std::string& v) { c.preprocess.n_bins = to_size(k, v); }},
      {"preprocess.oxonium_tolerance_ppm", [](RunConfig& c, const std::string& k, const std::string& v) { c.preprocess.oxonium_tolerance_ppm = to_double(k, v); }},
      {"preprocess.oxonium_tolerance_floor", [](RunConfig& c, const std::string& k, const std::string& v) { c.preprocess.oxonium_tolerance_floor = to_double(k, v); }},
      {"synth.seed", [](RunConfig& c, const std::string& k, const std::string& v) { c.synth.seed = to_size(k, v); }},
      {"synth.peptide_len_min", [](RunConfig& c, const std::string& k, const std::string& v) { c.synth.peptide_len_min = to_size(k, v); }},
      {"synth.peptide_len_max", [](RunConfig& c, const std::string& k, const std::string& v) { c.synth.peptide_len_max = to_size(k, v); }},
      {"synth.noise_min", [](RunConfig& c, const std::string& k, const std::string& v) { c.synth.noise_min = to_size(k, v); }},
      {"synth.noise_max", [](RunConfig& c, const std::string& k, const std::string& v) { c.synth.noise_max = to_size(k, v); }},
      {"synth.noise_mz_lo", [](RunConfig& c, const std::string& k, const std::string& v) { c.synth.noise_mz_lo = to_double(k, v); }},
      {"synth.noise_mz_hi", [](RunConfig& c, const std::string& k, const std::string& v) { c.synth.noise_mz_hi = to_double(k, v); }},
      {"synth.quality_keep_lo", [](RunConfig& c, const std::string& k, const std::string& v) { c.synth.quality_keep_lo = to_double(k, v); }},
      {"synth.quality_keep_hi", [](RunConfig& c, const std::string& k, const std::string& v) { c.synth.quality_keep_hi = to_double(k, v); }},
      {"synth.rate_quality", [](RunConfig& c, const std::string& k, const std::string& v) { c.synth.rate_quality = to_double(k, v); }},
      {"synth.rate_chimera", [](RunConfig& c, const std::string& k, const std::string& v) { c.synth.rate_chimera = to_double(k, v); }},
      {"synth.rate_phospho", [](RunConfig& c, const std::string& k, const std::string& v) { c.synth.rate_phospho = to_double(k, v); }},
      {"synth.rate_glyco", [](RunConfig& c, const std::string& k, const std::string& v) { c.synth.rate_glyco = to_double(k, v); }},
  };
  const auto it = setters.find(key);
  if (it == setters.end()) throw ConfigError("unknown config key '" + key + "'");
  it->second(*this, key, value);
}

void RunConfig::load_file(const std::string& path) {
  std::istringstream in(io::read_file(path));
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config file " + path + " line " + std::to_string(lineno) + ": expected key = value");
    }
    set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
}

void RunConfig::apply_overrides(const std::vector<std::string>& assignments) {
  for (const auto& a : assignments) {
    const std::size_t eq = a.find('=');
    if (eq == std::string::npos) throw ConfigError("override '" + a + "': expected key=value");
    set(trim(a.substr(0, eq)), trim(a.substr(eq + 1)));
  }
}

std::string RunConfig::dump() const {
  std::map<std::string, std::string> kv;
  const auto d = [](double v) { return io::format_double(v); };
  const auto z = [](std::size_t v) { return std::to_string(v); };
  kv["encoder.d_model"] = z(encoder.d_model);
  kv["encoder.n_layers"] = z(encoder.n_layers);
  kv["encoder.n_heads"] = z(encoder.n_heads);
  kv["encoder.ff_dim"] = z(encoder.ff_dim);
  kv["encoder.dropout"] = d(encoder.dropout);
  kv["encoder.lambda_min"] = d(encoder.lambda_min);
  kv["encoder.lambda_max"] = d(encoder.lambda_max);
  kv["decoder.n_layers"] = z(decoder.n_layers);
  kv["decoder.n_heads"] = z(decoder.n_heads);
  kv["decoder.ff_dim"] = z(decoder.ff_dim);
  kv["decoder.max_len"] = z(decoder.max_len);
  kv["decoder.max_charge"] = z(decoder.max_charge);
  kv["train.lr"] = d(train.lr);
  kv["train.weight_decay"] = d(train.weight_decay);
  kv["train.batch_size"] = z(train.batch_size);
  kv["train.label_smoothing"] = d(train.label_smoothing);
  kv["train.warmup_steps"] = z(train.warmup_steps);
  kv["train.cosine_half_period"] = z(train.cosine_half_period);
  kv["train.patience_epochs"] = z(train.patience_epochs);
  kv["train.max_steps"] = z(train.max_steps);
  kv["train.seed"] = z(train.seed);
  kv["train.valid_every"] = z(train.valid_every);
  kv["train.use_schedule"] = train.use_schedule ? "true" : "false";
  kv["train.head_hidden"] = z(train.head_hidden);
  kv["train.w_quality"] = d(train.w_quality);
  kv["train.w_chimera"] = d(train.w_chimera);
  kv["train.w_phospho"] = d(train.w_phospho);
  kv["train.w_denovo"] = d(train.w_denovo);
  kv["gbdt.max_depth"] = z(gbdt.max_depth);
  kv["gbdt.eta"] = d(gbdt.eta);
  kv["gbdt.lambda_l2"] = d(gbdt.lambda_l2);
  kv["gbdt.min_child_weight"] = d(gbdt.min_child_weight);
  kv["gbdt.max_rounds"] = z(gbdt.max_rounds);
  kv["gbdt.early_stopping_rounds"] = z(gbdt.early_stopping_rounds);
  kv["preprocess.encoder_mz_min"] = d(preprocess.encoder_mz_min);
  kv["preprocess.encoder_mz_max"] = d(preprocess.encoder_mz_max);
  kv["preprocess.max_peaks"] = z(preprocess.max_peaks);
  kv["preprocess.bin_lo"] = d(preprocess.bin_lo);
  kv["preprocess.bin_hi"] = d(preprocess.bin_hi);
  kv["preprocess.n_bins"] = z(preprocess.n_bins);
  kv["preprocess.oxonium_tolerance_ppm"] = d(preprocess.oxonium_tolerance_ppm);
  kv["preprocess.oxonium_tolerance_floor"] = d(preprocess.oxonium_tolerance_floor);
  kv["synth.seed"] = z(synth.seed);
  kv["synth.peptide_len_min"] = z(synth.peptide_len_min);
  kv["synth.peptide_len_max"] = z(synth.peptide_len_max);
  kv["synth.noise_min"] = z(synth.noise_min);
  kv["synth.noise_max"] = z(synth.noise_max);
  kv["synth.noise_mz_lo"] = d(synth.noise_mz_lo);
  kv["synth.noise_mz_hi"] = d(synth.noise_mz_hi);
  kv["synth.quality_keep_lo"] = d(synth.quality_keep_lo);
  kv["synth.quality_keep_hi"] = d(synth.quality_keep_hi);
  kv["synth.rate_quality"] = d(synth.rate_quality);
  kv["synth.rate_chimera"] = d(synth.rate_chimera);
  kv["synth.rate_phospho"] = d(synth.rate_phospho);
  kv["synth.rate_glyco"] = d(synth.rate_glyco);
  std::string out;
  for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
  return out;
}

void RunConfig::validate() const {
  encoder.validate();
  decoder.validate();
  train.validate();
  gbdt.validate();
  preprocess.validate();
  // synth requires a task/n; validated by the synth command itself
}

std::string file_digest(const std::string& path) {
  const std::string bytes = io::read_file(path);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

}  // namespace specfm::config
