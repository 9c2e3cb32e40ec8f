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

#include <string>
#include <utility>
#include <vector>

#include "specfm/spectrum.hpp"

namespace specfm::preprocess {

struct PreprocessConfig {
  double encoder_mz_min = 50.0;
  double encoder_mz_max = 2500.0;
  std::size_t max_peaks = 150;
  double bin_lo = 140.0;
  double bin_hi = 2000.0;
  std::size_t n_bins = 100;  // default width (2000-140)/100 = 18.6
  double oxonium_tolerance_ppm = 10.0;
  double oxonium_tolerance_floor = 0.005;

  void validate() const;  // throws ConfigError
};

// Encoder input: peaks with sqrt-transformed, unit-L2-norm intensities.
struct ProcessedSpectrum {
  std::vector<Peak> peaks;
  double precursor_mz = 0.0;
  int precursor_charge = 0;
};

// Filter to [encoder_mz_min, encoder_mz_max], keep the top max_peaks by
// intensity (ties kept in ascending m/z order), replace intensity with its
// square root, scale to unit Euclidean norm, sort by m/z.
// Throws EmptySpectrum when no peak survives the m/z filter.
ProcessedSpectrum preprocess_spectrum(const Spectrum& s, const PreprocessConfig& cfg);

// Sum of raw intensities per bin over [bin_lo, bin_hi); out-of-range peaks
// are ignored.
std::vector<double> bin_spectrum(const Spectrum& s, const PreprocessConfig& cfg);

// Reference oxonium ions, ordered by m/z; the order defines the feature
// index of the extracted intensity vector.
class OxoniumTable {
 public:
  struct Ion {
    std::string name;
    double mz = 0.0;
  };

  // Parses TSV "name\tmz"; validates 54 rows, strictly increasing m/z, and
  // the presence of the 138.0550 / 144.0655 diagnostic pair.
  static OxoniumTable from_tsv(const std::string& text);
  static OxoniumTable from_file(const std::string& path);
  // The default table compiled into the library.
  static const OxoniumTable& builtin();

  const std::vector<Ion>& ions() const { return ions_; }
  std::size_t size() const { return ions_.size(); }
  std::size_t index_138() const { return idx_138_; }
  std::size_t index_144() const { return idx_144_; }
  std::string to_tsv() const;

 private:
  void validate();
  std::vector<Ion> ions_;
  std::size_t idx_138_ = 0;
  std::size_t idx_144_ = 0;
};

struct OxoniumFeatures {
  std::vector<double> intensities;  // one entry per table ion
  double score_o_glyco = 0.0;       // I144 / (I138 + I144 + 1e-9)
};

// Entry i = max peak intensity within max(ppm * ref * 1e-6, floor) of
// reference ion i, else 0.
OxoniumFeatures extract_oxonium(const Spectrum& s, const OxoniumTable& table, const PreprocessConfig& cfg);

}  // namespace specfm::preprocess
