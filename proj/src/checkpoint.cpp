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
#include "specfm/checkpoint.hpp"

#include <cstring>
#include <set>

#include <json.hpp>

#include "specfm/msio.hpp"

namespace specfm::model {

using json = nlohmann::json;

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  char b[4];
  std::memcpy(b, &v, 4);
  out.append(b, 4);
}

struct Reader {
  const std::string& bytes;
  std::size_t off = 0;

  void need(std::size_t n) const {
    if (off + n > bytes.size()) throw FormatError("checkpoint: truncated file");
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v;
    std::memcpy(&v, bytes.data() + off, 4);
    off += 4;
    return v;
  }
  std::string str(std::size_t n) {
    need(n);
    std::string s = bytes.substr(off, n);
    off += n;
    return s;
  }
};

json config_json(const ModelBundle& b) {
  json j;
  if (b.has_encoder) {
    j["encoder"] = {{"d_model", b.enc_cfg.d_model},     {"n_layers", b.enc_cfg.n_layers},
                    {"n_heads", b.enc_cfg.n_heads},     {"ff_dim", b.enc_cfg.ff_dim},
                    {"dropout", b.enc_cfg.dropout},     {"lambda_min", b.enc_cfg.lambda_min},
                    {"lambda_max", b.enc_cfg.lambda_max}};
  }
  if (b.has_decoder) {
    j["decoder"] = {{"d_model", b.dec_cfg.d_model},   {"n_layers", b.dec_cfg.n_layers},
                    {"n_heads", b.dec_cfg.n_heads},   {"ff_dim", b.dec_cfg.ff_dim},
                    {"max_len", b.dec_cfg.max_len},   {"max_charge", b.dec_cfg.max_charge},
                    {"lambda_min", b.dec_cfg.lambda_min}, {"lambda_max", b.dec_cfg.lambda_max}};
    json vocab = json::array();
    for (const auto& t : b.vocab.tokens()) vocab.push_back({t.text, t.delta});
    j["vocab"] = vocab;
  }
  if (!b.head_names.empty()) {
    j["heads"] = {{"names", b.head_names}, {"hidden", b.head_hidden}, {"input_dim", b.head_input_dim}};
  }
  return j;
}

void parse_config(const std::string& text, ModelBundle& b) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw FormatError(std::string("checkpoint: bad config block: ") + e.what());
  }
  if (j.contains("encoder")) {
    const auto& e = j["encoder"];
    b.has_encoder = true;
    b.enc_cfg.d_model = e.at("d_model").get<std::size_t>();
    b.enc_cfg.n_layers = e.at("n_layers").get<std::size_t>();
    b.enc_cfg.n_heads = e.at("n_heads").get<std::size_t>();
    b.enc_cfg.ff_dim = e.at("ff_dim").get<std::size_t>();
    b.enc_cfg.dropout = e.at("dropout").get<double>();
    b.enc_cfg.lambda_min = e.at("lambda_min").get<double>();
    b.enc_cfg.lambda_max = e.at("lambda_max").get<double>();
  }
  if (j.contains("decoder")) {
    const auto& d = j["decoder"];
    b.has_decoder = true;
    b.dec_cfg.d_model = d.at("d_model").get<std::size_t>();
    b.dec_cfg.n_layers = d.at("n_layers").get<std::size_t>();
    b.dec_cfg.n_heads = d.at("n_heads").get<std::size_t>();
    b.dec_cfg.ff_dim = d.at("ff_dim").get<std::size_t>();
    b.dec_cfg.max_len = d.at("max_len").get<std::size_t>();
    b.dec_cfg.max_charge = d.at("max_charge").get<std::size_t>();
    b.dec_cfg.lambda_min = d.at("lambda_min").get<double>();
    b.dec_cfg.lambda_max = d.at("lambda_max").get<double>();
    std::string tsv = "token\tmass_delta\n";
    for (const auto& t : j.at("vocab")) {
      tsv += t.at(0).get<std::string>() + "\t" + io::format_double(t.at(1).get<double>()) + "\n";
    }
    b.vocab = denovo::Vocabulary::from_tsv(tsv);
  }
  if (j.contains("heads")) {
    const auto& h = j["heads"];
    b.head_names = h.at("names").get<std::vector<std::string>>();
    b.head_hidden = h.at("hidden").get<std::size_t>();
    b.head_input_dim = h.at("input_dim").get<std::size_t>();
  }
}

void validate_bundle(const ModelBundle& b) {
  if (b.has_encoder) encoder_from(b);
  if (b.has_decoder) decoder_from(b);
  for (const auto& name : b.head_names) head_from(b, name);
}

}  // namespace

std::string save_checkpoint(const ModelBundle& bundle) {
  std::string out = "SCPT";
  put_u32(out, 1);
  const std::string cfg = config_json(bundle).dump();
  put_u32(out, static_cast<std::uint32_t>(cfg.size()));
  out += cfg;
  put_u32(out, static_cast<std::uint32_t>(bundle.params.items.size()));
  for (const auto& [name, t] : bundle.params.items) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    put_u32(out, 2);
    put_u32(out, static_cast<std::uint32_t>(t.rows));
    put_u32(out, static_cast<std::uint32_t>(t.cols));
    const std::size_t off = out.size();
    out.resize(off + t.data.size() * sizeof(float));
    if (!t.data.empty()) std::memcpy(out.data() + off, t.data.data(), t.data.size() * sizeof(float));
  }
  return out;
}

ModelBundle load_checkpoint(const std::string& bytes) {
  if (bytes.size() < 8 || bytes.compare(0, 4, "SCPT") != 0) throw FormatError("checkpoint: bad magic");
  Reader r{bytes, 4};
  const std::uint32_t version = r.u32();
  if (version != 1) throw FormatError("checkpoint: unsupported version " + std::to_string(version));
  ModelBundle b;
  const std::uint32_t cfg_len = r.u32();
  parse_config(r.str(cfg_len), b);
  const std::uint32_t n_tensors = r.u32();
  std::set<std::string> seen;
  for (std::uint32_t i = 0; i < n_tensors; ++i) {
    const std::uint32_t name_len = r.u32();
    const std::string name = r.str(name_len);
    if (!seen.insert(name).second) throw FormatError("checkpoint: duplicate tensor '" + name + "'");
    const std::uint32_t rank = r.u32();
    if (rank != 2) throw FormatError("checkpoint: tensor '" + name + "' has unsupported rank");
    const std::uint32_t rows = r.u32();
    const std::uint32_t cols = r.u32();
    nn::Tensor<float> t(rows, cols);
    r.need(t.data.size() * sizeof(float));
    if (!t.data.empty()) std::memcpy(t.data.data(), bytes.data() + r.off, t.data.size() * sizeof(float));
    r.off += t.data.size() * sizeof(float);
    b.params.add(name, std::move(t));
  }
  if (r.off != bytes.size()) throw FormatError("checkpoint: trailing bytes");
  validate_bundle(b);
  return b;
}

void save_checkpoint_file(const ModelBundle& bundle, const std::string& path) {
  io::write_file(path, save_checkpoint(bundle));
}

ModelBundle load_checkpoint_file(const std::string& path) { return load_checkpoint(io::read_file(path)); }

ModelBundle bundle_encoder(const encoder::EncoderModel<float>& enc) {
  ModelBundle b;
  b.has_encoder = true;
  b.enc_cfg = enc.cfg;
  b.params = enc.params;
  return b;
}

ModelBundle bundle_pretrained(const encoder::EncoderModel<float>& enc, const denovo::DecoderModel<float>& dec) {
  ModelBundle b = bundle_encoder(enc);
  b.has_decoder = true;
  b.dec_cfg = dec.cfg;
  b.vocab = dec.vocab;
  for (const auto& [name, t] : dec.params.items) b.params.add(name, t);
  return b;
}

ModelBundle bundle_multitask(const encoder::EncoderModel<float>& enc, const denovo::DecoderModel<float>& dec,
                             const std::map<Task, train::HeadModel<float>>& heads) {
  ModelBundle b = bundle_pretrained(enc, dec);
  for (const auto& [task, head] : heads) {
    b.head_names.push_back(task_name(task));
    b.head_hidden = head.hidden_dim;
    b.head_input_dim = head.input_dim;
    for (const auto& [name, t] : head.params.items) b.params.add(name, t);
  }
  return b;
}

ModelBundle bundle_head(const train::HeadModel<float>& head, const std::string& name) {
  ModelBundle b;
  b.head_names.push_back(name);
  b.head_hidden = head.hidden_dim;
  b.head_input_dim = head.input_dim;
  b.params = head.params;
  return b;
}

encoder::EncoderModel<float> encoder_from(const ModelBundle& bundle) {
  if (!bundle.has_encoder) throw FormatError("checkpoint has no encoder component");
  return encoder::EncoderModel<float>::from_params(bundle.enc_cfg, bundle.params);
}

denovo::DecoderModel<float> decoder_from(const ModelBundle& bundle) {
  if (!bundle.has_decoder) throw FormatError("checkpoint has no decoder component");
  return denovo::DecoderModel<float>::from_params(bundle.dec_cfg, bundle.vocab, bundle.params);
}

train::HeadModel<float> head_from(const ModelBundle& bundle, const std::string& name) {
  bool known = false;
  for (const auto& n : bundle.head_names) known = known || n == name;
  if (!known) throw FormatError("checkpoint has no head '" + name + "'");
  return train::HeadModel<float>::from_params(name, bundle.head_input_dim, bundle.head_hidden, bundle.params);
}

}  // namespace specfm::model
