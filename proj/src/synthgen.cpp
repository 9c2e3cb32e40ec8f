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
#include "specfm/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>
#include <utility>

#include <json.hpp>

#include "specfm/errors.hpp"
#include "specfm/rng.hpp"

namespace specfm::synth {

using json = nlohmann::json;

const char* synth_task_name(SynthTask t) {
  switch (t) {
    case SynthTask::quality: return "quality";
    case SynthTask::chimera: return "chimera";
    case SynthTask::phospho: return "phospho";
    case SynthTask::glyco: return "glyco";
    case SynthTask::denovo: return "denovo";
  }
  return "?";
}

SynthTask synth_task_from_name(const std::string& name) {
  if (name == "quality") return SynthTask::quality;
  if (name == "chimera") return SynthTask::chimera;
  if (name == "phospho") return SynthTask::phospho;
  if (name == "glyco") return SynthTask::glyco;
  if (name == "denovo") return SynthTask::denovo;
  throw ConfigError("unknown synth task '" + name + "'");
}

double SynthConfig::positive_rate() const {
  switch (task) {
    case SynthTask::quality: return rate_quality;
    case SynthTask::chimera: return rate_chimera;
    case SynthTask::phospho: return rate_phospho;
    case SynthTask::glyco: return rate_glyco;
    case SynthTask::denovo: return 0.0;
  }
  return 0.0;
}

void SynthConfig::validate() const {
  if (peptide_len_min < 1 || peptide_len_min > peptide_len_max) {
    throw ConfigError("synth: bad peptide length range");
  }
  if (noise_min > noise_max) throw ConfigError("synth: bad noise peak range");
  if (!(noise_mz_lo < noise_mz_hi)) throw ConfigError("synth: bad noise m/z range");
  if (!(quality_keep_lo > quality_keep_hi)) {
    throw ConfigError("synth: quality keep ranges overlap");
  }
  for (double r : {rate_quality, rate_chimera, rate_phospho, rate_glyco}) {
    if (!(r > 0.0 && r < 1.0)) throw ConfigError("synth: positive rates must be in (0, 1)");
  }
}

namespace {

constexpr char kResidues[] = "ACDEFGHIKLMNPQRSTVWY";
constexpr std::size_t kNumResidues = 20;
constexpr std::size_t kMaxResample = 1000;

bool has_sty(const std::string& seq) {
  return seq.find_first_of("STY") != std::string::npos;
}

std::string draw_sequence(Rng& rng, const SynthConfig& cfg) {
  const std::size_t len =
      static_cast<std::size_t>(rng.uniform_range(static_cast<std::int64_t>(cfg.peptide_len_min),
                                                 static_cast<std::int64_t>(cfg.peptide_len_max)));
  std::string seq;
  seq.reserve(len);
  for (std::size_t i = 0; i < len; ++i) seq.push_back(kResidues[rng.uniform_int(kNumResidues)]);
  return seq;
}

// intensity in (0, 1]
double noise_intensity(Rng& rng) { return 1.0 - rng.uniform(); }

const char* series_name(chem::IonSeries s) { return s == chem::IonSeries::b ? "b" : "y"; }

void plant_fragments(Rng& rng, const chem::Peptide& p, const std::string& tag, double intensity_scale,
                     double keep_fraction, std::vector<PlantedPeak>& planted, std::size_t* kept,
                     std::size_t* total) {
  const auto frags = chem::fragment_mzs(p, 1);
  std::vector<std::size_t> order(frags.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t keep_count = frags.size();
  if (keep_fraction < 1.0) {
    keep_count = static_cast<std::size_t>(
        std::llround(keep_fraction * static_cast<double>(frags.size())));
    keep_count = std::min(keep_count, frags.size());
    rng.shuffle(order);
    std::sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep_count));
  }
  for (std::size_t i = 0; i < keep_count; ++i) {
    const auto& f = frags[order[i]];
    planted.push_back({tag + ":" + series_name(f.series) + std::to_string(f.index), f.mz,
                       rng.uniform(0.1, 1.0) * intensity_scale});
  }
  if (kept) *kept = keep_count;
  if (total) *total = frags.size();
}

SynthRecord gen_record(const SynthConfig& cfg, std::size_t index) {
  Rng rng(cfg.seed, index);
  SynthRecord r;
  Provenance& prov = r.provenance;

  const bool positive = cfg.task == SynthTask::denovo ? false : rng.bernoulli(cfg.positive_rate());
  r.label = cfg.task == SynthTask::denovo ? -1 : (positive ? 1 : 0);

  chem::Peptide peptide;
  peptide.sequence = draw_sequence(rng, cfg);
  if (cfg.task == SynthTask::phospho && positive) {
    std::size_t tries = 0;
    while (!has_sty(peptide.sequence)) {
      if (++tries > kMaxResample) {
        throw ConfigError("synth: could not draw a peptide containing S/T/Y");
      }
      peptide.sequence = draw_sequence(rng, cfg);
    }
    std::vector<std::size_t> sites;
    for (std::size_t i = 0; i < peptide.sequence.size(); ++i) {
      const char c = peptide.sequence[i];
      if (c == 'S' || c == 'T' || c == 'Y') sites.push_back(i);
    }
    peptide.mods.emplace_back(sites[rng.uniform_int(sites.size())], chem::kPhosphoDelta);
  }
  prov.peptides.push_back(peptide);

  const int charge = rng.bernoulli(0.5) ? 2 : 3;
  r.spectrum.precursor_charge = charge;
  r.spectrum.precursor_mz = chem::precursor_mz(chem::peptide_mass(peptide), charge);

  double keep_fraction = 1.0;
  if (cfg.task == SynthTask::quality) {
    keep_fraction = positive ? rng.uniform(cfg.quality_keep_lo, 1.0) : rng.uniform(0.0, cfg.quality_keep_hi);
  }
  prov.kept_fraction = keep_fraction;
  plant_fragments(rng, peptide, "frag", 1.0, keep_fraction, prov.planted, &prov.kept_fragments,
                  &prov.total_fragments);

  std::size_t noise_count = 0;
  if (cfg.task != SynthTask::denovo) {
    const std::size_t quarter = (cfg.noise_max - cfg.noise_min) / 4;
    std::size_t lo = cfg.noise_min, hi = cfg.noise_max;
    if (cfg.task == SynthTask::quality) {
      // positives get the quiet quarter of the range, negatives the noisy one
      if (positive) hi = cfg.noise_min + quarter;
      else lo = cfg.noise_max - quarter;
    }
    noise_count = static_cast<std::size_t>(
        rng.uniform_range(static_cast<std::int64_t>(lo), static_cast<std::int64_t>(hi)));
  }

  if (cfg.task == SynthTask::chimera && positive) {
    chem::Peptide second;
    second.sequence = draw_sequence(rng, cfg);
    prov.peptides.push_back(second);
    const double alpha = rng.uniform(0.3, 1.0);
    plant_fragments(rng, second, "frag2", alpha, 1.0, prov.planted, nullptr, nullptr);
  }

  if (cfg.task == SynthTask::phospho && positive && rng.bernoulli(0.5)) {
    prov.neutral_loss = true;
    prov.planted.push_back({"neutral_loss",
                            r.spectrum.precursor_mz - chem::kPhosphoNeutralLoss / static_cast<double>(charge),
                            rng.uniform(0.1, 1.0)});
  }

  if (cfg.task == SynthTask::glyco) {
    const double i138 = rng.uniform(0.1, 0.8);
    prov.planted.push_back({"oxonium:HexNAc", kOxHexNAc, rng.uniform(0.1, 1.0)});
    prov.planted.push_back({"oxonium:138", kOx138, i138});
    prov.planted.push_back({"oxonium:HexHexNAc", kOxHexHexNAc, rng.uniform(0.1, 1.0)});
    if (positive) {
      prov.planted.push_back({"oxonium:144", kOx144, i138 * rng.uniform(0.8, 1.2)});
    }
  }

  for (const PlantedPeak& p : prov.planted) r.spectrum.peaks.push_back({p.mz, p.intensity});
  for (std::size_t i = 0; i < noise_count; ++i) {
    r.spectrum.peaks.push_back({rng.uniform(cfg.noise_mz_lo, cfg.noise_mz_hi), noise_intensity(rng)});
  }
  std::sort(r.spectrum.peaks.begin(), r.spectrum.peaks.end(), [](const Peak& a, const Peak& b) {
    return a.mz != b.mz ? a.mz < b.mz : a.intensity < b.intensity;
  });
  return r;
}

}  // namespace

std::vector<SynthRecord> gen_dataset(const SynthConfig& cfg) {
  cfg.validate();
  std::vector<SynthRecord> out;
  out.reserve(cfg.n);
  const std::string run_id = std::string(synth_task_name(cfg.task)) + "-" + std::to_string(cfg.seed);
  for (std::size_t i = 0; i < cfg.n; ++i) {
    SynthRecord r = gen_record(cfg, i);
    r.spectrum.run_id = run_id;
    r.spectrum.scan_id = std::to_string(i);
    out.push_back(std::move(r));
  }
  return out;
}

bool verify_record(const SynthRecord& r, SynthTask task) {
  const Provenance& prov = r.provenance;
  // every planted peak must exist in the spectrum
  for (const PlantedPeak& p : prov.planted) {
    bool found = false;
    for (const Peak& peak : r.spectrum.peaks) {
      if (std::abs(peak.mz - p.mz) < 1e-9 && std::abs(peak.intensity - p.intensity) < 1e-9) {
        found = true;
        break;
      }
    }
    if (!found) return false;
  }

  int derived = 0;
  switch (task) {
    case SynthTask::quality:
      if (prov.kept_fraction >= 0.7) derived = 1;
      else if (prov.kept_fraction <= 0.3) derived = 0;
      else return false;
      break;
    case SynthTask::chimera:
      derived = prov.peptides.size() >= 2 ? 1 : 0;
      break;
    case SynthTask::phospho: {
      derived = 0;
      if (!prov.peptides.empty()) {
        for (const auto& [pos, delta] : prov.peptides.front().mods) {
          (void)pos;
          if (std::abs(delta - chem::kPhosphoDelta) < 1e-6) derived = 1;
        }
      }
      break;
    }
    case SynthTask::glyco: {
      derived = 0;
      for (const PlantedPeak& p : prov.planted) {
        if (std::abs(p.mz - kOx144) < 1e-9) derived = 1;
      }
      break;
    }
    case SynthTask::denovo:
      return r.label == -1 && prov.peptides.size() == 1;
  }
  return derived == r.label;
}

std::vector<Spectrum> to_spectra(const std::vector<SynthRecord>& records) {
  std::vector<Spectrum> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.spectrum);
  return out;
}

std::vector<LabelRecord> to_labels(const std::vector<SynthRecord>& records, SynthTask task) {
  if (task == SynthTask::denovo) return {};
  std::vector<LabelRecord> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    out.push_back({r.spectrum.run_id, r.spectrum.scan_id, task_from_name(synth_task_name(task)), r.label});
  }
  return out;
}

std::string to_provenance_jsonl(const std::vector<SynthRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    json j;
    j["run_id"] = r.spectrum.run_id;
    j["scan_id"] = r.spectrum.scan_id;
    j["label"] = r.label;
    json peptides = json::array();
    for (const auto& p : r.provenance.peptides) {
      json jp;
      jp["seq"] = p.sequence;
      json mods = json::array();
      for (const auto& [pos, delta] : p.mods) mods.push_back({pos, delta});
      jp["mods"] = mods;
      peptides.push_back(jp);
    }
    j["peptides"] = peptides;
    json planted = json::array();
    for (const auto& p : r.provenance.planted) planted.push_back({p.name, p.mz, p.intensity});
    j["planted"] = planted;
    j["kept_fraction"] = r.provenance.kept_fraction;
    j["kept_fragments"] = r.provenance.kept_fragments;
    j["total_fragments"] = r.provenance.total_fragments;
    j["neutral_loss"] = r.provenance.neutral_loss;
    out += j.dump() + "\n";
  }
  return out;
}

std::vector<SynthRecord> parse_provenance_jsonl(const std::string& text, const std::vector<Spectrum>& spectra) {
  std::map<std::pair<std::string, std::string>, const Spectrum*> by_key;
  for (const auto& s : spectra) by_key[{s.run_id, s.scan_id}] = &s;

  std::vector<SynthRecord> out;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw ParseError("provenance line " + std::to_string(lineno) + ": " + e.what());
    }
    SynthRecord r;
    r.label = j.at("label").get<int>();
    const auto key = std::make_pair(j.at("run_id").get<std::string>(), j.at("scan_id").get<std::string>());
    const auto it = by_key.find(key);
    if (it == by_key.end()) {
      throw ParseError("provenance line " + std::to_string(lineno) + ": no spectrum (" + key.first + ", " +
                       key.second + ")");
    }
    r.spectrum = *it->second;
    for (const auto& jp : j.at("peptides")) {
      chem::Peptide p;
      p.sequence = jp.at("seq").get<std::string>();
      for (const auto& jm : jp.at("mods")) {
        p.mods.emplace_back(jm.at(0).get<std::size_t>(), jm.at(1).get<double>());
      }
      r.provenance.peptides.push_back(std::move(p));
    }
    for (const auto& jp : j.at("planted")) {
      r.provenance.planted.push_back(
          {jp.at(0).get<std::string>(), jp.at(1).get<double>(), jp.at(2).get<double>()});
    }
    r.provenance.kept_fraction = j.at("kept_fraction").get<double>();
    r.provenance.kept_fragments = j.at("kept_fragments").get<std::size_t>();
    r.provenance.total_fragments = j.at("total_fragments").get<std::size_t>();
    r.provenance.neutral_loss = j.at("neutral_loss").get<bool>();
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace specfm::synth
