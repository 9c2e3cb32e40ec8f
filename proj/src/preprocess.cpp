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
#include "specfm/preprocess.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <sstream>

#include "specfm/errors.hpp"
#include "specfm/msio.hpp"

namespace specfm::preprocess {

void PreprocessConfig::validate() const {
  if (!(encoder_mz_min < encoder_mz_max)) throw ConfigError("preprocess: encoder_mz_min must be < encoder_mz_max");
  if (!(bin_lo < bin_hi)) throw ConfigError("preprocess: bin_lo must be < bin_hi");
  if (n_bins < 1) throw ConfigError("preprocess: n_bins must be >= 1");
  if (max_peaks < 1) throw ConfigError("preprocess: max_peaks must be >= 1");
  if (oxonium_tolerance_ppm < 0 || oxonium_tolerance_floor < 0) {
    throw ConfigError("preprocess: oxonium tolerances must be non-negative");
  }
}

ProcessedSpectrum preprocess_spectrum(const Spectrum& s, const PreprocessConfig& cfg) {
  cfg.validate();
  std::vector<Peak> kept;
  kept.reserve(s.peaks.size());
  for (const Peak& p : s.peaks) {
    if (p.mz >= cfg.encoder_mz_min && p.mz <= cfg.encoder_mz_max) kept.push_back(p);
  }
  if (kept.empty()) throw EmptySpectrum("no peaks in [" + std::to_string(cfg.encoder_mz_min) + ", " +
                                        std::to_string(cfg.encoder_mz_max) + "]");
  if (kept.size() > cfg.max_peaks) {
    // stable on ties: equal intensities stay in ascending m/z order
    std::stable_sort(kept.begin(), kept.end(),
                     [](const Peak& a, const Peak& b) { return a.intensity > b.intensity; });
    kept.resize(cfg.max_peaks);
  }
  std::stable_sort(kept.begin(), kept.end(), [](const Peak& a, const Peak& b) { return a.mz < b.mz; });

  double sum_sq = 0.0;
  for (Peak& p : kept) {
    p.intensity = std::sqrt(p.intensity);
    sum_sq += p.intensity * p.intensity;
  }
  const double norm = std::sqrt(sum_sq);
  if (norm > 0.0) {
    for (Peak& p : kept) p.intensity /= norm;
  }
  return {std::move(kept), s.precursor_mz, s.precursor_charge};
}

std::vector<double> bin_spectrum(const Spectrum& s, const PreprocessConfig& cfg) {
  cfg.validate();
  std::vector<double> bins(cfg.n_bins, 0.0);
  const double width = (cfg.bin_hi - cfg.bin_lo) / static_cast<double>(cfg.n_bins);
  for (const Peak& p : s.peaks) {
    if (p.mz < cfg.bin_lo || p.mz >= cfg.bin_hi) continue;
    auto idx = static_cast<std::size_t>((p.mz - cfg.bin_lo) / width);
    if (idx >= cfg.n_bins) idx = cfg.n_bins - 1;  // guard the floating-point edge at bin_hi
    bins[idx] += p.intensity;
  }
  return bins;
}

// ---- oxonium table ---------------------------------------------------------

namespace {

// Monosaccharide residue masses and the proton; combination ion m/z values
// below are (sum of residues + proton), rounded to 4 decimals.
constexpr struct {
  const char* name;
  double mz;
} kDefaultIons[] = {
    {"Hex-frag-85", 85.0284},
    {"Hex-frag-97", 97.0284},
    {"Hex-frag-109", 109.0284},
    {"Hex-frag-115", 115.0390},
    {"HexNAc-frag-126", 126.0550},
    {"Hex-2H2O", 127.0390},
    {"dHex-H2O", 129.0546},
    {"HexNAc-frag-138", 138.0550},
    {"HexNAc-frag-144", 144.0655},
    {"Hex-H2O", 145.0495},
    {"dHex", 147.0652},
    {"Hex", 163.0601},
    {"HexNAc-2H2O", 168.0655},
    {"HexNAc-H2O", 186.0761},
    {"HexNAc", 204.0867},
    {"Hex-Phospho", 243.0264},
    {"NeuAc-2H2O", 256.0816},
    {"NeuAc-H2O", 274.0921},
    {"HexNAc-Phospho", 284.0530},
    {"NeuGc-H2O", 290.0870},
    {"NeuAc", 292.1027},
    {"NeuGc", 308.0976},
    {"Hex2", 325.1129},
    {"HexNAc-dHex", 350.1446},
    {"Hex-HexNAc", 366.1395},
    {"HexNAc2", 407.1661},
    {"Hex-HexNAc-Phospho", 446.1058},
    {"NeuAc-Hex", 454.1555},
    {"NeuGc-Hex", 470.1504},
    {"Hex3", 487.1657},
    {"NeuAc-HexNAc", 495.1821},
    {"NeuGc-HexNAc", 511.1770},
    {"Hex-HexNAc-dHex", 512.1974},
    {"Hex2-HexNAc", 528.1923},
    {"HexNAc2-dHex", 553.2240},
    {"Hex-HexNAc2", 569.2190},
    {"NeuAc2", 583.1981},
    {"NeuAc-Hex2", 616.2083},
    {"Hex4", 649.2186},
    {"NeuAc-Hex-HexNAc", 657.2349},
    {"NeuGc-Hex-HexNAc", 673.2298},
    {"Hex2-HexNAc-dHex", 674.2502},
    {"Hex3-HexNAc", 690.2451},
    {"Hex2-HexNAc2", 731.2717},
    {"NeuAc-Hex-HexNAc-dHex", 803.2928},
    {"Hex5", 811.2714},
    {"NeuAc-Hex2-HexNAc", 819.2877},
    {"Hex4-HexNAc", 852.2979},
    {"NeuAc-Hex-HexNAc2", 860.3143},
    {"Hex2-HexNAc2-dHex", 877.3296},
    {"Hex3-HexNAc2", 893.3245},
    {"NeuAc2-Hex-HexNAc", 948.3303},
    {"Hex4-HexNAc2", 1055.3773},
    {"Hex5-HexNAc2", 1217.4301},
};

constexpr double kMz138 = 138.0550;
constexpr double kMz144 = 144.0655;

}  // namespace

void OxoniumTable::validate() {
  if (ions_.size() != 54) {
    throw FormatError("oxonium table: expected 54 ions, got " + std::to_string(ions_.size()));
  }
  bool have_138 = false, have_144 = false;
  for (std::size_t i = 0; i < ions_.size(); ++i) {
    if (i > 0 && !(ions_[i - 1].mz < ions_[i].mz)) {
      throw FormatError("oxonium table: m/z not strictly increasing at row " + std::to_string(i + 1));
    }
    if (std::abs(ions_[i].mz - kMz138) < 1e-4) {
      idx_138_ = i;
      have_138 = true;
    }
    if (std::abs(ions_[i].mz - kMz144) < 1e-4) {
      idx_144_ = i;
      have_144 = true;
    }
  }
  if (!have_138 || !have_144) {
    throw FormatError("oxonium table: must contain the 138.0550 / 144.0655 diagnostic ions");
  }
}

OxoniumTable OxoniumTable::from_tsv(const std::string& text) {
  OxoniumTable t;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (lineno == 1 && line == "name\tmz") continue;
    const std::size_t tab = line.find('\t');
    if (tab == std::string::npos) throw FormatError("oxonium table line " + std::to_string(lineno) + ": no tab");
    Ion ion;
    ion.name = line.substr(0, tab);
    const std::string mz_text = line.substr(tab + 1);
    auto res = std::from_chars(mz_text.data(), mz_text.data() + mz_text.size(), ion.mz);
    if (res.ec != std::errc() || res.ptr != mz_text.data() + mz_text.size()) {
      throw FormatError("oxonium table line " + std::to_string(lineno) + ": bad m/z '" + mz_text + "'");
    }
    t.ions_.push_back(std::move(ion));
  }
  t.validate();
  return t;
}

OxoniumTable OxoniumTable::from_file(const std::string& path) { return from_tsv(io::read_file(path)); }

const OxoniumTable& OxoniumTable::builtin() {
  static const OxoniumTable table = [] {
    OxoniumTable t;
    for (const auto& ion : kDefaultIons) t.ions_.push_back({ion.name, ion.mz});
    t.validate();
    return t;
  }();
  return table;
}

std::string OxoniumTable::to_tsv() const {
  std::string out = "name\tmz\n";
  for (const auto& ion : ions_) out += ion.name + "\t" + io::format_double(ion.mz) + "\n";
  return out;
}

OxoniumFeatures extract_oxonium(const Spectrum& s, const OxoniumTable& table, const PreprocessConfig& cfg) {
  cfg.validate();
  OxoniumFeatures f;
  f.intensities.assign(table.size(), 0.0);
  const auto& ions = table.ions();
  for (std::size_t i = 0; i < ions.size(); ++i) {
    const double tol = std::max(cfg.oxonium_tolerance_ppm * ions[i].mz * 1e-6, cfg.oxonium_tolerance_floor);
    double best = 0.0;
    // full scan, not a sorted-window walk, so the result does not depend on
    // peak order
    for (const Peak& p : s.peaks) {
      if (std::abs(p.mz - ions[i].mz) <= tol) best = std::max(best, p.intensity);
    }
    f.intensities[i] = best;
  }
  const double i138 = f.intensities[table.index_138()];
  const double i144 = f.intensities[table.index_144()];
  f.score_o_glyco = i144 / (i138 + i144 + 1e-9);
  return f;
}

}  // namespace specfm::preprocess
