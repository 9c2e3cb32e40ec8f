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
#include <vector>

#include "specfm/chem.hpp"
#include "specfm/spectrum.hpp"

namespace specfm::synth {

enum class SynthTask { quality, chimera, phospho, glyco, denovo };

const char* synth_task_name(SynthTask t);
SynthTask synth_task_from_name(const std::string& name);  // throws ConfigError

struct SynthConfig {
  SynthTask task = SynthTask::quality;
  std::size_t n = 0;
  std::uint64_t seed = 0;
  std::size_t peptide_len_min = 7;
  std::size_t peptide_len_max = 20;
  std::size_t noise_min = 5;
  std::size_t noise_max = 40;
  double noise_mz_lo = 140.0;  // noise lands inside the binning range
  double noise_mz_hi = 2000.0;
  double quality_keep_lo = 0.7;  // positive class keeps q in [lo, 1]
  double quality_keep_hi = 0.3;  // negative class keeps q in [0, hi]
  double rate_quality = 0.40;
  double rate_chimera = 0.45;
  double rate_phospho = 0.54;
  double rate_glyco = 0.102;

  double positive_rate() const;
  void validate() const;
};

struct PlantedPeak {
  std::string name;
  double mz = 0.0;
  double intensity = 0.0;
};

// Everything needed to re-derive the label.
struct Provenance {
  std::vector<chem::Peptide> peptides;  // 1, or 2 for chimeric positives
  std::vector<PlantedPeak> planted;     // all non-noise peaks
  double kept_fraction = 1.0;           // quality task
  std::size_t kept_fragments = 0;
  std::size_t total_fragments = 0;
  bool neutral_loss = false;
};

struct SynthRecord {
  Spectrum spectrum;
  int label = 0;  // -1 for the de novo task (no binary label)
  Provenance provenance;
};

// Deterministic: record i draws from a counter-based stream keyed by
// (seed, i), so output is byte-stable and order-independent.
std::vector<SynthRecord> gen_dataset(const SynthConfig& cfg);

// Re-derives the label from provenance and checks every planted peak is
// present in the spectrum.
bool verify_record(const SynthRecord& r, SynthTask task);

std::vector<Spectrum> to_spectra(const std::vector<SynthRecord>& records);
std::vector<LabelRecord> to_labels(const std::vector<SynthRecord>& records, SynthTask task);
std::string to_provenance_jsonl(const std::vector<SynthRecord>& records);
std::vector<SynthRecord> parse_provenance_jsonl(const std::string& text, const std::vector<Spectrum>& spectra);

// Oxonium m/z values the glyco task plants.
constexpr double kOxHexNAc = 204.0867;
constexpr double kOx138 = 138.0550;
constexpr double kOxHexHexNAc = 366.1395;
constexpr double kOx144 = 144.0655;

}  // namespace specfm::synth
