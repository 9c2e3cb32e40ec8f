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

// specfm: synthesize spectra, embed them with a transformer peak encoder,
// train heads/baselines, fine-tune multi-task, and evaluate.

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "specfm/baselines.hpp"
#include "specfm/checkpoint.hpp"
#include "specfm/denovo.hpp"
#include "specfm/encoder.hpp"
#include "specfm/errors.hpp"
#include "specfm/gbdt.hpp"
#include "specfm/metrics.hpp"
#include "specfm/msio.hpp"
#include "specfm/preprocess.hpp"
#include "specfm/runconfig.hpp"
#include "specfm/spectrum.hpp"
#include "specfm/synthgen.hpp"
#include "specfm/train.hpp"

using namespace specfm;

namespace {

// ---- shared plumbing ---------------------------------------------------------

struct CommonOpts {
  std::string config_file;
  std::vector<std::string> sets;
  std::uint64_t seed = 0;
  bool seed_given = false;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--config", opts.config_file, "key = value config file");
  cmd->add_option("--set", opts.sets, "config override, key=value (repeatable)");
  cmd->add_option("--seed", opts.seed, "random seed")->each([&opts](const std::string&) {
    opts.seed_given = true;
  });
}

config::RunConfig resolve_config(const CommonOpts& opts) {
  config::RunConfig rc;
  if (!opts.config_file.empty()) rc.load_file(opts.config_file);
  rc.apply_overrides(opts.sets);
  if (opts.seed_given) {
    rc.train.seed = opts.seed;
    rc.synth.seed = opts.seed;
  }
  return rc;
}

bool ends_with_ci(const std::string& s, const std::string& suffix) {
  if (s.size() < suffix.size()) return false;
  std::string tail = s.substr(s.size() - suffix.size());
  std::transform(tail.begin(), tail.end(), tail.begin(), [](unsigned char c) { return std::tolower(c); });
  return tail == suffix;
}

std::vector<Spectrum> load_spectra(const std::string& path) {
  if (ends_with_ci(path, ".mzml")) return io::parse_mzml_file(path);
  if (ends_with_ci(path, ".mgf")) return io::parse_mgf_file(path);
  throw ConfigError("cannot tell the format of '" + path + "' (expected .mgf or .mzml)");
}

void write_manifest(const std::string& primary_out, const std::string& command, const config::RunConfig& rc,
                    const std::vector<std::string>& inputs,
                    const std::vector<std::string>& extras = {}) {
  std::string out = "command = " + command + "\n";
  for (const auto& line : extras) out += line + "\n";
  out += rc.dump();
  for (const auto& path : inputs) {
    out += "input." + path + " = " + config::file_digest(path) + "\n";
  }
  io::write_file(primary_out + ".manifest", out);
}

// preprocess a labeled set; spectra that lose every peak are dropped
train::LabeledSpectra preprocess_labeled(const std::vector<std::pair<Spectrum, int>>& joined,
                                         const preprocess::PreprocessConfig& pcfg,
                                         std::vector<std::pair<std::string, std::string>>* ids = nullptr) {
  train::LabeledSpectra out;
  std::size_t skipped = 0;
  for (const auto& [spectrum, label] : joined) {
    try {
      out.spectra.push_back(preprocess::preprocess_spectrum(spectrum, pcfg));
    } catch (const EmptySpectrum&) {
      ++skipped;
      continue;
    }
    out.labels.push_back(label);
    if (ids) ids->emplace_back(spectrum.run_id, spectrum.scan_id);
  }
  if (skipped > 0) std::cerr << "note: skipped " << skipped << " spectra with no peaks in range\n";
  return out;
}

train::LabeledSpectra load_task_data(const std::string& spectra_path, const std::string& labels_path, Task task,
                                     const preprocess::PreprocessConfig& pcfg,
                                     std::vector<std::pair<std::string, std::string>>* ids = nullptr) {
  const auto spectra = load_spectra(spectra_path);
  const auto labels = io::read_labels_file(labels_path);
  return preprocess_labeled(io::join_labels(spectra, labels, task), pcfg, ids);
}

std::vector<train::DenovoExample> load_denovo(const std::string& spectra_path, const std::string& prov_path,
                                              const preprocess::PreprocessConfig& pcfg) {
  const auto spectra = load_spectra(spectra_path);
  const auto records = synth::parse_provenance_jsonl(io::read_file(prov_path), spectra);
  std::vector<train::DenovoExample> out;
  std::size_t skipped = 0;
  for (const auto& r : records) {
    if (r.provenance.peptides.empty()) throw ParseError("provenance record without a peptide");
    try {
      out.push_back({preprocess::preprocess_spectrum(r.spectrum, pcfg), r.provenance.peptides[0]});
    } catch (const EmptySpectrum&) {
      ++skipped;
    }
  }
  if (skipped > 0) std::cerr << "note: skipped " << skipped << " empty spectra\n";
  return out;
}

std::string scores_tsv(const std::vector<std::pair<std::string, std::string>>& ids,
                       const std::vector<double>& scores) {
  std::string out = "run_id\tscan_id\tscore\n";
  for (std::size_t i = 0; i < ids.size(); ++i) {
    out += ids[i].first + "\t" + ids[i].second + "\t" + io::format_double(scores[i]) + "\n";
  }
  return out;
}

struct ScoreRow {
  std::string run_id, scan_id;
  double score = 0.0;
};

std::vector<ScoreRow> read_scores(const std::string& path) {
  std::istringstream in(io::read_file(path));
  std::string line;
  if (!std::getline(in, line)) throw ParseError("scores file '" + path + "' is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "run_id\tscan_id\tscore") throw ParseError("scores file: bad header '" + line + "'");
  std::vector<ScoreRow> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto t1 = line.find('\t');
    const auto t2 = line.find('\t', t1 + 1);
    if (t1 == std::string::npos || t2 == std::string::npos) {
      throw ParseError("scores file line " + std::to_string(lineno) + ": expected 3 fields");
    }
    ScoreRow row;
    row.run_id = line.substr(0, t1);
    row.scan_id = line.substr(t1 + 1, t2 - t1 - 1);
    try {
      row.score = std::stod(line.substr(t2 + 1));
    } catch (const std::exception&) {
      throw ParseError("scores file line " + std::to_string(lineno) + ": bad score");
    }
    out.push_back(std::move(row));
  }
  return out;
}

void write_log(const std::string& path, const std::vector<std::string>& lines) {
  if (path.empty()) return;
  std::string out = "step\ttask\tsplit\tloss\tauroc\n";
  for (const auto& l : lines) out += l + "\n";
  io::write_file(path, out);
}

io::EmbeddingMatrix subset_rows(const io::EmbeddingMatrix& m, const std::vector<std::size_t>& rows) {
  io::EmbeddingMatrix out;
  out.n_rows = rows.size();
  out.dim = m.dim;
  out.data.reserve(rows.size() * m.dim);
  for (const std::size_t r : rows) {
    out.data.insert(out.data.end(), m.data.begin() + static_cast<std::ptrdiff_t>(r * m.dim),
                    m.data.begin() + static_cast<std::ptrdiff_t>((r + 1) * m.dim));
    if (r < m.index.size()) out.index.push_back(m.index[r]);
  }
  return out;
}

// labels for embedding rows via the sidecar index
std::pair<io::EmbeddingMatrix, std::vector<int>> join_embedding_labels(const io::EmbeddingMatrix& emb,
                                                                       const std::string& labels_path,
                                                                       Task task) {
  const auto records = io::read_labels_file(labels_path);
  std::map<std::pair<std::string, std::string>, int> by_key;
  for (const auto& r : records) {
    if (r.task == task) by_key[{r.run_id, r.scan_id}] = r.label;
  }
  std::vector<std::size_t> keep;
  std::vector<int> labels;
  for (std::size_t i = 0; i < emb.index.size(); ++i) {
    const auto it = by_key.find(emb.index[i]);
    if (it != by_key.end()) {
      keep.push_back(i);
      labels.push_back(it->second);
    }
  }
  return {subset_rows(emb, keep), std::move(labels)};
}

// ---- subcommands --------------------------------------------------------------

int run_synth(const CommonOpts& common, const std::string& task_name_str, std::size_t n,
              const std::string& out_path, const std::string& labels_path, const std::string& prov_path) {
  config::RunConfig rc = resolve_config(common);
  rc.synth.task = synth::synth_task_from_name(task_name_str);
  rc.synth.n = n;

  const auto records = synth::gen_dataset(rc.synth);
  io::write_mgf_file(synth::to_spectra(records), out_path);
  if (!labels_path.empty()) {
    if (rc.synth.task == synth::SynthTask::denovo) {
      throw ConfigError("the denovo task has no binary labels; drop --labels");
    }
    io::write_labels_file(synth::to_labels(records, rc.synth.task), labels_path);
  }
  if (!prov_path.empty()) io::write_file(prov_path, synth::to_provenance_jsonl(records));
  write_manifest(out_path, "synth", rc, {},
                 {std::string("arg.task = ") + synth::synth_task_name(rc.synth.task),
                  "arg.n = " + std::to_string(rc.synth.n)});
  std::cout << "wrote " << records.size() << " spectra to " << out_path << "\n";
  return 0;
}

int run_embed(const CommonOpts& common, const std::string& checkpoint_path,
              const std::vector<std::string>& inputs, const std::string& out_path, std::size_t threads) {
  const config::RunConfig rc = resolve_config(common);
  const auto bundle = model::load_checkpoint_file(checkpoint_path);
  const auto enc = model::encoder_from(bundle);

  struct FileResult {
    std::vector<preprocess::ProcessedSpectrum> spectra;
    std::vector<std::pair<std::string, std::string>> ids;
    std::size_t skipped = 0;
  };
  std::vector<FileResult> results(inputs.size());

  // files parse and preprocess in parallel; outputs are merged in input-list
  // order, so the result is independent of scheduling
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= inputs.size()) return;
      const auto spectra = load_spectra(inputs[i]);
      for (const auto& s : spectra) {
        try {
          results[i].spectra.push_back(preprocess::preprocess_spectrum(s, rc.preprocess));
        } catch (const EmptySpectrum&) {
          ++results[i].skipped;
          continue;
        }
        results[i].ids.emplace_back(s.run_id, s.scan_id);
      }
    }
  };
  if (threads == 0) threads = std::max<std::size_t>(1, std::thread::hardware_concurrency());
  threads = std::min(threads, inputs.size());
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  io::EmbeddingMatrix out;
  out.dim = enc.cfg.d_model;
  std::size_t skipped = 0;
  for (const auto& r : results) {
    const auto emb = train::embed_spectra(enc, r.spectra);
    out.data.insert(out.data.end(), emb.data.begin(), emb.data.end());
    out.index.insert(out.index.end(), r.ids.begin(), r.ids.end());
    out.n_rows += emb.n_rows;
    skipped += r.skipped;
  }
  if (skipped > 0) std::cerr << "note: skipped " << skipped << " spectra with no peaks in range\n";
  io::write_embeddings_file(out, out_path);
  write_manifest(out_path, "embed", rc, inputs);
  std::cout << "embedded " << out.n_rows << " spectra (dim " << out.dim << ") to " << out_path << "\n";
  return 0;
}

int run_pretrain(const CommonOpts& common, const std::string& train_mgf, const std::string& train_prov,
                 const std::string& valid_mgf, const std::string& valid_prov, const std::string& vocab_path,
                 const std::string& out_path, const std::string& log_path) {
  config::RunConfig rc;
  rc.train.lr = 1e-4;
  rc.train.max_steps = 3000;
  rc.train.valid_every = 500;
  if (!common.config_file.empty()) rc.load_file(common.config_file);
  rc.apply_overrides(common.sets);
  if (common.seed_given) rc.train.seed = common.seed;
  rc.decoder.d_model = rc.encoder.d_model;
  rc.validate();

  const auto vocab =
      vocab_path.empty() ? denovo::Vocabulary::builtin_default() : denovo::Vocabulary::from_file(vocab_path);
  train::DenovoData data;
  data.train = load_denovo(train_mgf, train_prov, rc.preprocess);
  if (!valid_mgf.empty()) data.valid = load_denovo(valid_mgf, valid_prov, rc.preprocess);

  const auto result = train::pretrain_denovo(data, rc.encoder, rc.decoder, vocab, rc.train);
  model::save_checkpoint_file(model::bundle_pretrained(result.enc, result.dec), out_path);
  write_log(log_path, result.log);
  std::vector<std::string> inputs = {train_mgf, train_prov};
  if (!valid_mgf.empty()) {
    inputs.push_back(valid_mgf);
    inputs.push_back(valid_prov);
  }
  write_manifest(out_path, "pretrain-denovo", rc, inputs);
  std::cout << "pretrained on " << data.train.size() << " spectra; best validation loss "
            << io::format_double(result.best_valid_loss) << "; checkpoint " << out_path << "\n";
  return 0;
}

int run_train_head(const CommonOpts& common, const std::string& task_str, const std::string& emb_path,
                   const std::string& labels_path, const std::string& valid_emb_path,
                   const std::string& valid_labels_path, const std::string& out_path,
                   const std::string& log_path, const std::string& test_emb_path,
                   const std::string& test_scores_path) {
  config::RunConfig rc;
  rc.train.lr = 1e-3;
  if (!common.config_file.empty()) rc.load_file(common.config_file);
  rc.apply_overrides(common.sets);
  if (common.seed_given) rc.train.seed = common.seed;

  const Task task = task_from_name(task_str);
  const auto emb = io::read_embeddings_file(emb_path);
  const auto [train_emb, train_labels] = join_embedding_labels(emb, labels_path, task);
  const auto valid_full = io::read_embeddings_file(valid_emb_path);
  const auto [valid_emb, valid_labels] = join_embedding_labels(valid_full, valid_labels_path, task);

  const auto result = train::train_head(train_emb, train_labels, valid_emb, valid_labels, rc.train, task_str);
  model::save_checkpoint_file(model::bundle_head(result.head, task_str), out_path);
  write_log(log_path, result.log);
  if (!test_emb_path.empty()) {
    const auto test_emb = io::read_embeddings_file(test_emb_path);
    const auto scores = train::head_scores(result.head, test_emb);
    io::write_file(test_scores_path.empty() ? test_emb_path + ".scores.tsv" : test_scores_path,
                   scores_tsv(test_emb.index, scores));
  }
  write_manifest(out_path, "train-head", rc, {emb_path, labels_path, valid_emb_path, valid_labels_path});
  std::cout << "trained head for " << task_str << "; best validation auroc "
            << io::format_double(result.best_auroc) << "; " << result.epochs_run << " epochs\n";
  return 0;
}

int run_train_e2e(const CommonOpts& common, const std::string& task_str, const std::string& train_mgf,
                  const std::string& labels_path, const std::string& valid_mgf,
                  const std::string& valid_labels_path, const std::string& layer_sweep_str, bool freeze_encoder,
                  const std::string& out_path, const std::string& log_path, const std::string& test_mgf,
                  const std::string& test_scores_path) {
  config::RunConfig rc;
  rc.train.lr = 1e-4;
  if (!common.config_file.empty()) rc.load_file(common.config_file);
  rc.apply_overrides(common.sets);
  if (common.seed_given) rc.train.seed = common.seed;
  rc.validate();

  const Task task = task_from_name(task_str);
  const auto train_set = load_task_data(train_mgf, labels_path, task, rc.preprocess);
  const auto valid_set = load_task_data(valid_mgf, valid_labels_path, task, rc.preprocess);

  std::vector<std::size_t> sweep;
  if (!layer_sweep_str.empty()) {
    std::istringstream ss(layer_sweep_str);
    std::string tok;
    while (std::getline(ss, tok, ',')) sweep.push_back(std::stoul(tok));
  }

  const auto result =
      train::train_end_to_end(train_set, valid_set, rc.encoder, rc.train, task_str, sweep, freeze_encoder);
  auto bundle = model::bundle_encoder(result.enc);
  bundle.head_names.push_back(task_str);
  bundle.head_hidden = result.head.hidden_dim;
  bundle.head_input_dim = result.head.input_dim;
  for (const auto& [name, t] : result.head.params.items) bundle.params.add(name, t);
  model::save_checkpoint_file(bundle, out_path);
  write_log(log_path, result.log);
  if (!test_mgf.empty()) {
    std::vector<std::pair<std::string, std::string>> ids;
    const auto spectra = load_spectra(test_mgf);
    std::vector<preprocess::ProcessedSpectrum> processed;
    for (const auto& s : spectra) {
      try {
        processed.push_back(preprocess::preprocess_spectrum(s, rc.preprocess));
      } catch (const EmptySpectrum&) {
        continue;
      }
      ids.emplace_back(s.run_id, s.scan_id);
    }
    const auto emb = train::embed_spectra(result.enc, processed);
    const auto scores = train::head_scores(result.head, emb);
    io::write_file(test_scores_path.empty() ? test_mgf + ".scores.tsv" : test_scores_path,
                   scores_tsv(ids, scores));
  }
  write_manifest(out_path, "train-e2e", rc, {train_mgf, labels_path, valid_mgf, valid_labels_path});
  std::cout << "end-to-end " << task_str << ": best validation auroc " << io::format_double(result.best_auroc)
            << " with " << result.chosen_layers << " layers\n";
  return 0;
}

int run_train_baseline(const CommonOpts& common, const std::string& kind, const std::string& task_str,
                       const std::string& train_mgf, const std::string& labels_path,
                       const std::string& valid_mgf, const std::string& valid_labels_path,
                       const std::string& test_mgf, const std::string& scores_path,
                       const std::string& model_path, const std::string& table_path) {
  config::RunConfig rc = resolve_config(common);
  const Task task = task_from_name(task_str);

  const auto table =
      table_path.empty() ? preprocess::OxoniumTable::builtin() : preprocess::OxoniumTable::from_file(table_path);

  baselines::BaselineData test;
  std::vector<std::pair<std::string, std::string>> test_ids;
  for (const auto& s : load_spectra(test_mgf)) {
    test.spectra.push_back(s);
    test_ids.emplace_back(s.run_id, s.scan_id);
  }

  std::vector<double> scores;
  gbdt::GbdtModel fitted;
  bool have_model = false;
  if (kind == "oxonium-ratio") {
    scores =
        baselines::oxonium_baseline({}, {}, test, table, rc.preprocess, rc.gbdt, baselines::OxoniumMode::ratio);
  } else {
    if (train_mgf.empty() || labels_path.empty() || valid_mgf.empty() || valid_labels_path.empty()) {
      throw ConfigError("baseline kind '" + kind + "' needs --train/--labels/--valid/--valid-labels");
    }
    baselines::BaselineData train_set, valid_set;
    {
      const auto spectra = load_spectra(train_mgf);
      const auto labels = io::read_labels_file(labels_path);
      for (auto& [s, y] : io::join_labels(spectra, labels, task)) {
        train_set.spectra.push_back(std::move(s));
        train_set.labels.push_back(y);
      }
    }
    {
      const auto spectra = load_spectra(valid_mgf);
      const auto labels = io::read_labels_file(valid_labels_path);
      for (auto& [s, y] : io::join_labels(spectra, labels, task)) {
        valid_set.spectra.push_back(std::move(s));
        valid_set.labels.push_back(y);
      }
    }
    if (kind == "binned") {
      scores = baselines::binned_baseline(train_set, valid_set, test, rc.preprocess, rc.gbdt, &fitted);
    } else if (kind == "oxonium-gbdt") {
      scores = baselines::oxonium_baseline(train_set, valid_set, test, table, rc.preprocess, rc.gbdt,
                                           baselines::OxoniumMode::gbdt54, &fitted);
    } else {
      throw ConfigError("unknown baseline kind '" + kind + "'");
    }
    have_model = true;
  }

  io::write_file(scores_path, scores_tsv(test_ids, scores));
  if (!model_path.empty()) {
    if (!have_model) throw ConfigError("--model is only written for fitted baselines");
    io::write_file(model_path, gbdt::serialize_gbdt(fitted));
  }
  std::vector<std::string> inputs = {test_mgf};
  if (kind != "oxonium-ratio") {
    inputs.insert(inputs.end(), {train_mgf, labels_path, valid_mgf, valid_labels_path});
  }
  write_manifest(scores_path, "train-baseline", rc, inputs);
  std::cout << "baseline " << kind << " scored " << scores.size() << " spectra to " << scores_path << "\n";
  return 0;
}

int run_finetune(const CommonOpts& common, const std::string& checkpoint_path,
                 const std::map<std::string, std::string>& paths, const std::string& out_path,
                 const std::string& log_path) {
  config::RunConfig rc;
  rc.train.lr = 1e-5;
  rc.train.use_schedule = true;
  rc.train.max_steps = 3000;
  rc.train.valid_every = 250;
  if (!common.config_file.empty()) rc.load_file(common.config_file);
  rc.apply_overrides(common.sets);
  if (common.seed_given) rc.train.seed = common.seed;

  const auto bundle = model::load_checkpoint_file(checkpoint_path);
  const auto enc = model::encoder_from(bundle);
  const auto dec = model::decoder_from(bundle);

  auto split_task = [&](const std::string& prefix, Task task) {
    train::TaskData data;
    data.train = load_task_data(paths.at(prefix), paths.at(prefix + "-labels"), task, rc.preprocess);
    data.valid =
        load_task_data(paths.at(prefix + "-valid"), paths.at(prefix + "-valid-labels"), task, rc.preprocess);
    return data;
  };
  const auto quality = split_task("quality", Task::quality);
  const auto chimera = split_task("chimera", Task::chimera);
  const auto phospho = split_task("phospho", Task::phospho);
  train::DenovoData dn;
  dn.train = load_denovo(paths.at("denovo"), paths.at("denovo-prov"), rc.preprocess);
  dn.valid = load_denovo(paths.at("denovo-valid"), paths.at("denovo-valid-prov"), rc.preprocess);

  const auto result = train::finetune_multitask(enc, dec, quality, chimera, phospho, dn, rc.train);
  model::save_checkpoint_file(model::bundle_multitask(result.enc, result.dec, result.heads), out_path);
  write_log(log_path, result.log);
  std::vector<std::string> inputs = {checkpoint_path};
  for (const auto& [k, v] : paths) {
    (void)k;
    inputs.push_back(v);
  }
  write_manifest(out_path, "finetune-multitask", rc, inputs);
  std::cout << "multi-task fine-tuning selected step " << result.best_step << " (mean downstream loss "
            << io::format_double(result.best_mean_valid_loss) << ", step-0 "
            << io::format_double(result.step0_mean_valid_loss) << "); checkpoint " << out_path << "\n";
  return 0;
}

int run_eval(const std::string& scores_path, const std::string& labels_path, const std::string& task_str,
             const std::string& json_path, const std::string& roc_path, const std::string& pr_path,
             double threshold) {
  const Task task = task_from_name(task_str);
  const auto rows = read_scores(scores_path);
  const auto labels = io::read_labels_file(labels_path);
  std::map<std::pair<std::string, std::string>, int> by_key;
  for (const auto& r : labels) {
    if (r.task == task) by_key[{r.run_id, r.scan_id}] = r.label;
  }
  metrics::ScoredLabels scored;
  for (const auto& row : rows) {
    const auto it = by_key.find({row.run_id, row.scan_id});
    if (it == by_key.end()) continue;
    scored.scores.push_back(row.score);
    scored.labels.push_back(it->second);
  }
  const std::string json = metrics::metrics_json(task_str, scored, threshold);
  if (json_path.empty()) {
    std::cout << json;
  } else {
    io::write_file(json_path, json);
  }
  if (!roc_path.empty()) io::write_file(roc_path, metrics::roc_csv(metrics::roc_points(scored)));
  if (!pr_path.empty()) io::write_file(pr_path, metrics::pr_csv(metrics::pr_points(scored)));
  return 0;
}

int run_pca(const std::string& emb_path, const std::string& labels_path, const std::string& task_str,
            std::size_t k, const std::string& out_path) {
  const Task task = task_from_name(task_str);
  const auto emb = io::read_embeddings_file(emb_path);
  const auto [sub, labels] = join_embedding_labels(emb, labels_path, task);
  if (sub.n_rows < 2) throw DegenerateInput("pca: fewer than 2 labeled embeddings");

  std::vector<double> data(sub.data.begin(), sub.data.end());
  const auto result = metrics::pca(data, sub.n_rows, sub.dim, k);
  std::vector<std::string> scan_ids;
  for (const auto& [run, scan] : sub.index) {
    (void)run;
    scan_ids.push_back(scan);
  }
  io::write_file(out_path, metrics::pca_csv(result, scan_ids, labels));
  std::cout << "pca wrote " << sub.n_rows << " projections to " << out_path << "\n";
  return 0;
}

int run_learning_curve(const CommonOpts& common, const std::string& task_str, const std::string& train_mgf,
                       const std::string& labels_path, const std::string& test_mgf,
                       const std::string& test_labels_path, const std::string& checkpoint_path,
                       std::size_t subsets, const std::string& out_path) {
  config::RunConfig rc;
  rc.train.lr = 1e-4;
  rc.train.max_steps = 2000;
  if (!common.config_file.empty()) rc.load_file(common.config_file);
  rc.apply_overrides(common.sets);
  if (common.seed_given) rc.train.seed = common.seed;

  const Task task = task_from_name(task_str);
  const auto train_set = load_task_data(train_mgf, labels_path, task, rc.preprocess);
  const auto test_set = load_task_data(test_mgf, test_labels_path, task, rc.preprocess);

  // raw spectra for the binned baseline
  baselines::BaselineData train_raw, test_raw;
  {
    const auto spectra = load_spectra(train_mgf);
    const auto labels = io::read_labels_file(labels_path);
    for (auto& [s, y] : io::join_labels(spectra, labels, task)) {
      train_raw.spectra.push_back(std::move(s));
      train_raw.labels.push_back(y);
    }
    const auto tspectra = load_spectra(test_mgf);
    const auto tlabels = io::read_labels_file(test_labels_path);
    for (auto& [s, y] : io::join_labels(tspectra, tlabels, task)) {
      test_raw.spectra.push_back(std::move(s));
      test_raw.labels.push_back(y);
    }
  }

  const auto bundle = model::load_checkpoint_file(checkpoint_path);
  const auto enc = model::encoder_from(bundle);
  const io::EmbeddingMatrix train_emb = train::embed_spectra(enc, train_set.spectra);
  const io::EmbeddingMatrix test_emb = train::embed_spectra(enc, test_set.spectra);

  // each subset reserves its tail 20% as the early-stopping validation split
  auto split80 = [](const std::vector<std::size_t>& subset) {
    const std::size_t cut = std::max<std::size_t>(1, subset.size() * 4 / 5);
    return std::make_pair(
        std::vector<std::size_t>(subset.begin(), subset.begin() + static_cast<std::ptrdiff_t>(cut)),
        std::vector<std::size_t>(subset.begin() + static_cast<std::ptrdiff_t>(cut), subset.end()));
  };
  auto labels_at = [&](const std::vector<std::size_t>& idx) {
    std::vector<int> out;
    for (std::size_t i : idx) out.push_back(train_set.labels[i]);
    return out;
  };

  std::vector<metrics::CurveMethod> methods;
  methods.push_back({"frozen", [&](const std::vector<std::size_t>& subset) {
                       const auto [tr, va] = split80(subset);
                       const auto result =
                           train::train_head(subset_rows(train_emb, tr), labels_at(tr),
                                             subset_rows(train_emb, va), labels_at(va), rc.train, task_str);
                       return train::head_scores(result.head, test_emb);
                     }});
  methods.push_back({"e2e", [&](const std::vector<std::size_t>& subset) {
                       const auto [tr, va] = split80(subset);
                       train::LabeledSpectra sub_train, sub_valid;
                       for (std::size_t i : tr) {
                         sub_train.spectra.push_back(train_set.spectra[i]);
                         sub_train.labels.push_back(train_set.labels[i]);
                       }
                       for (std::size_t i : va) {
                         sub_valid.spectra.push_back(train_set.spectra[i]);
                         sub_valid.labels.push_back(train_set.labels[i]);
                       }
                       const auto result =
                           train::train_end_to_end(sub_train, sub_valid, rc.encoder, rc.train, task_str);
                       const auto emb = train::embed_spectra(result.enc, test_set.spectra);
                       return train::head_scores(result.head, emb);
                     }});
  methods.push_back({"binned", [&](const std::vector<std::size_t>& subset) {
                       const auto [tr, va] = split80(subset);
                       baselines::BaselineData sub_train, sub_valid;
                       for (std::size_t i : tr) {
                         sub_train.spectra.push_back(train_raw.spectra[i]);
                         sub_train.labels.push_back(train_raw.labels[i]);
                       }
                       for (std::size_t i : va) {
                         sub_valid.spectra.push_back(train_raw.spectra[i]);
                         sub_valid.labels.push_back(train_raw.labels[i]);
                       }
                       return baselines::binned_baseline(sub_train, sub_valid, test_raw, rc.preprocess,
                                                         rc.gbdt);
                     }});

  const auto curve = metrics::learning_curve(train_set.labels, test_set.labels, subsets, rc.train.seed, methods);
  io::write_file(out_path, curve.to_tsv());
  write_manifest(out_path, "learning-curve", rc,
                 {train_mgf, labels_path, test_mgf, test_labels_path, checkpoint_path});
  std::cout << curve.to_tsv();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"specfm: tandem mass spectrum foundation-model toolkit"};
  app.name("specfm");
  app.require_subcommand(1);

  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic labeled spectrum dataset");
  CommonOpts synth_common;
  std::string synth_task, synth_out, synth_labels, synth_prov;
  std::size_t synth_n = 0;
  synth_cmd->add_option("--task", synth_task, "quality|chimera|phospho|glyco|denovo")->required();
  synth_cmd->add_option("--n", synth_n, "number of spectra")->required();
  synth_cmd->add_option("--out", synth_out, "output MGF path")->required();
  synth_cmd->add_option("--labels", synth_labels, "output label TSV path");
  synth_cmd->add_option("--provenance", synth_prov, "output provenance JSONL path");
  add_common(synth_cmd, synth_common);

  auto* embed_cmd = app.add_subcommand("embed", "embed spectra with a trained encoder checkpoint");
  CommonOpts embed_common;
  std::string embed_checkpoint, embed_out;
  std::vector<std::string> embed_in;
  std::size_t embed_threads = 0;
  embed_cmd->add_option("--checkpoint", embed_checkpoint, "encoder checkpoint (.scpt)")->required();
  embed_cmd->add_option("--in", embed_in, "input spectrum files (.mgf/.mzml), repeatable")->required();
  embed_cmd->add_option("--out", embed_out, "output embedding file (.semb)")->required();
  embed_cmd->add_option("--threads", embed_threads, "parallel files (0 = hardware)");
  add_common(embed_cmd, embed_common);

  auto* pre_cmd = app.add_subcommand("pretrain-denovo", "pre-train encoder+decoder on sequence prediction");
  CommonOpts pre_common;
  std::string pre_train, pre_train_prov, pre_valid, pre_valid_prov, pre_vocab, pre_out, pre_log;
  pre_cmd->add_option("--train", pre_train, "training MGF")->required();
  pre_cmd->add_option("--train-prov", pre_train_prov, "training provenance JSONL")->required();
  pre_cmd->add_option("--valid", pre_valid, "validation MGF");
  pre_cmd->add_option("--valid-prov", pre_valid_prov, "validation provenance JSONL");
  pre_cmd->add_option("--vocab", pre_vocab, "vocabulary TSV (default: built-in)");
  pre_cmd->add_option("--out", pre_out, "output checkpoint (.scpt)")->required();
  pre_cmd->add_option("--log", pre_log, "training log TSV");
  add_common(pre_cmd, pre_common);

  auto* head_cmd = app.add_subcommand("train-head", "train a dense head on frozen embeddings");
  CommonOpts head_common;
  std::string head_task, head_emb, head_labels, head_vemb, head_vlabels, head_out, head_log, head_test_emb,
      head_test_scores;
  head_cmd->add_option("--task", head_task, "quality|chimera|phospho|glyco")->required();
  head_cmd->add_option("--emb", head_emb, "training embeddings (.semb)")->required();
  head_cmd->add_option("--labels", head_labels, "training label TSV")->required();
  head_cmd->add_option("--valid-emb", head_vemb, "validation embeddings (.semb)")->required();
  head_cmd->add_option("--valid-labels", head_vlabels, "validation label TSV")->required();
  head_cmd->add_option("--out", head_out, "output head checkpoint (.scpt)")->required();
  head_cmd->add_option("--log", head_log, "training log TSV");
  head_cmd->add_option("--test-emb", head_test_emb, "embeddings to score with the trained head");
  head_cmd->add_option("--test-scores", head_test_scores, "output scores TSV for --test-emb");
  add_common(head_cmd, head_common);

  auto* e2e_cmd = app.add_subcommand("train-e2e", "train encoder+head end-to-end from scratch");
  CommonOpts e2e_common;
  std::string e2e_task, e2e_train, e2e_labels, e2e_valid, e2e_vlabels, e2e_sweep, e2e_out, e2e_log, e2e_test,
      e2e_test_scores;
  bool e2e_freeze = false;
  e2e_cmd->add_option("--task", e2e_task, "quality|chimera|phospho|glyco")->required();
  e2e_cmd->add_option("--train", e2e_train, "training spectra (.mgf/.mzml)")->required();
  e2e_cmd->add_option("--labels", e2e_labels, "training label TSV")->required();
  e2e_cmd->add_option("--valid", e2e_valid, "validation spectra")->required();
  e2e_cmd->add_option("--valid-labels", e2e_vlabels, "validation label TSV")->required();
  e2e_cmd->add_option("--layer-sweep", e2e_sweep, "comma-separated layer counts, e.g. 1,2");
  e2e_cmd->add_flag("--freeze-encoder", e2e_freeze, "skip encoder updates (random-encoder ablation)");
  e2e_cmd->add_option("--out", e2e_out, "output checkpoint (.scpt)")->required();
  e2e_cmd->add_option("--log", e2e_log, "training log TSV");
  e2e_cmd->add_option("--test", e2e_test, "spectra to score with the trained model");
  e2e_cmd->add_option("--test-scores", e2e_test_scores, "output scores TSV for --test");
  add_common(e2e_cmd, e2e_common);

  auto* base_cmd = app.add_subcommand("train-baseline", "binned or oxonium baselines");
  CommonOpts base_common;
  std::string base_kind, base_task, base_train, base_labels, base_valid, base_vlabels, base_test, base_scores,
      base_model, base_table;
  base_cmd->add_option("--kind", base_kind, "binned|oxonium-ratio|oxonium-gbdt")->required();
  base_cmd->add_option("--task", base_task, "quality|chimera|phospho|glyco")->required();
  base_cmd->add_option("--train", base_train, "training spectra (unused by oxonium-ratio)");
  base_cmd->add_option("--labels", base_labels, "training label TSV");
  base_cmd->add_option("--valid", base_valid, "validation spectra (early stopping)");
  base_cmd->add_option("--valid-labels", base_vlabels, "validation label TSV");
  base_cmd->add_option("--test", base_test, "spectra to score")->required();
  base_cmd->add_option("--scores", base_scores, "output scores TSV")->required();
  base_cmd->add_option("--model", base_model, "output fitted model (.sgbt)");
  base_cmd->add_option("--oxonium-table", base_table, "oxonium ion table TSV (default: built-in)");
  add_common(base_cmd, base_common);

  auto* ft_cmd = app.add_subcommand("finetune-multitask", "fine-tune the encoder on three tasks + sequencing");
  CommonOpts ft_common;
  std::string ft_checkpoint, ft_out, ft_log;
  std::map<std::string, std::string> ft_paths;
  ft_cmd->add_option("--checkpoint", ft_checkpoint, "pretrained encoder+decoder checkpoint")->required();
  for (const std::string p : {"quality", "chimera", "phospho"}) {
    ft_cmd->add_option("--" + p, ft_paths[p], p + " training spectra")->required();
    ft_cmd->add_option("--" + p + "-labels", ft_paths[p + "-labels"], p + " training labels")->required();
    ft_cmd->add_option("--" + p + "-valid", ft_paths[p + "-valid"], p + " validation spectra")->required();
    ft_cmd->add_option("--" + p + "-valid-labels", ft_paths[p + "-valid-labels"], p + " validation labels")
        ->required();
  }
  ft_cmd->add_option("--denovo", ft_paths["denovo"], "de novo training spectra")->required();
  ft_cmd->add_option("--denovo-prov", ft_paths["denovo-prov"], "de novo training provenance")->required();
  ft_cmd->add_option("--denovo-valid", ft_paths["denovo-valid"], "de novo validation spectra")->required();
  ft_cmd->add_option("--denovo-valid-prov", ft_paths["denovo-valid-prov"], "de novo validation provenance")
      ->required();
  ft_cmd->add_option("--out", ft_out, "output checkpoint (.scpt)")->required();
  ft_cmd->add_option("--log", ft_log, "training log TSV");
  add_common(ft_cmd, ft_common);

  auto* eval_cmd = app.add_subcommand("eval", "compute AUROC/AUPR/F1 and ROC/PR curves from scores");
  std::string eval_scores, eval_labels, eval_task, eval_json, eval_roc, eval_pr;
  double eval_threshold = 0.5;
  eval_cmd->add_option("--scores", eval_scores, "scores TSV (run_id, scan_id, score)")->required();
  eval_cmd->add_option("--labels", eval_labels, "label TSV")->required();
  eval_cmd->add_option("--task", eval_task, "quality|chimera|phospho|glyco")->required();
  eval_cmd->add_option("--json", eval_json, "output metrics JSON (default: stdout)");
  eval_cmd->add_option("--roc", eval_roc, "output ROC CSV");
  eval_cmd->add_option("--pr", eval_pr, "output PR CSV");
  eval_cmd->add_option("--threshold", eval_threshold, "F1 decision threshold (default 0.5)");

  auto* pca_cmd = app.add_subcommand("pca", "project labeled embeddings onto principal components");
  std::string pca_emb, pca_labels, pca_task, pca_out;
  std::size_t pca_k = 2;
  pca_cmd->add_option("--emb", pca_emb, "embeddings (.semb)")->required();
  pca_cmd->add_option("--labels", pca_labels, "label TSV")->required();
  pca_cmd->add_option("--task", pca_task, "quality|chimera|phospho|glyco")->required();
  pca_cmd->add_option("--k", pca_k, "number of components (default 2)");
  pca_cmd->add_option("--out", pca_out, "output CSV")->required();

  auto* curve_cmd = app.add_subcommand("learning-curve", "AUROC of each method over nested training subsets");
  CommonOpts curve_common;
  std::string curve_task, curve_train, curve_labels, curve_test, curve_test_labels, curve_checkpoint, curve_out;
  std::size_t curve_subsets = 10;
  curve_cmd->add_option("--task", curve_task, "quality|chimera|phospho|glyco")->required();
  curve_cmd->add_option("--train", curve_train, "training spectra pool")->required();
  curve_cmd->add_option("--labels", curve_labels, "training label TSV")->required();
  curve_cmd->add_option("--test", curve_test, "evaluation spectra")->required();
  curve_cmd->add_option("--test-labels", curve_test_labels, "evaluation label TSV")->required();
  curve_cmd->add_option("--checkpoint", curve_checkpoint, "pretrained encoder for the frozen method")
      ->required();
  curve_cmd->add_option("--subsets", curve_subsets, "number of nested subsets (default 10)");
  curve_cmd->add_option("--out", curve_out, "output TSV")->required();
  add_common(curve_cmd, curve_common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (*synth_cmd) return run_synth(synth_common, synth_task, synth_n, synth_out, synth_labels, synth_prov);
    if (*embed_cmd) return run_embed(embed_common, embed_checkpoint, embed_in, embed_out, embed_threads);
    if (*pre_cmd) {
      return run_pretrain(pre_common, pre_train, pre_train_prov, pre_valid, pre_valid_prov, pre_vocab, pre_out,
                          pre_log);
    }
    if (*head_cmd) {
      return run_train_head(head_common, head_task, head_emb, head_labels, head_vemb, head_vlabels, head_out,
                            head_log, head_test_emb, head_test_scores);
    }
    if (*e2e_cmd) {
      return run_train_e2e(e2e_common, e2e_task, e2e_train, e2e_labels, e2e_valid, e2e_vlabels, e2e_sweep,
                           e2e_freeze, e2e_out, e2e_log, e2e_test, e2e_test_scores);
    }
    if (*base_cmd) {
      return run_train_baseline(base_common, base_kind, base_task, base_train, base_labels, base_valid,
                                base_vlabels, base_test, base_scores, base_model, base_table);
    }
    if (*ft_cmd) return run_finetune(ft_common, ft_checkpoint, ft_paths, ft_out, ft_log);
    if (*eval_cmd) {
      return run_eval(eval_scores, eval_labels, eval_task, eval_json, eval_roc, eval_pr, eval_threshold);
    }
    if (*pca_cmd) return run_pca(pca_emb, pca_labels, pca_task, pca_k, pca_out);
    if (*curve_cmd) {
      return run_learning_curve(curve_common, curve_task, curve_train, curve_labels, curve_test,
                                curve_test_labels, curve_checkpoint, curve_subsets, curve_out);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
