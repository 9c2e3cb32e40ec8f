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
#include "specfm/chem.hpp"

#include <string>

#include "specfm/errors.hpp"

namespace specfm::chem {

const std::map<char, double>& residue_masses() {
  static const std::map<char, double> table = {
      {'G', 57.02146},  {'A', 71.03711},  {'S', 87.03203},  {'P', 97.05276},
      {'V', 99.06841},  {'T', 101.04768}, {'C', 103.00919}, {'L', 113.08406},
      {'I', 113.08406}, {'N', 114.04293}, {'D', 115.02694}, {'Q', 128.05858},
      {'K', 128.09496}, {'E', 129.04259}, {'M', 131.04049}, {'H', 137.05891},
      {'F', 147.06841}, {'R', 156.10111}, {'Y', 163.06333}, {'W', 186.07931},
  };
  return table;
}

bool is_canonical_residue(char code) { return residue_masses().count(code) != 0; }

void validate_peptide(const Peptide& p) {
  if (p.sequence.empty()) {
    throw InvalidPeptide("empty peptide sequence");
  }
  for (char c : p.sequence) {
    if (!is_canonical_residue(c)) {
      throw InvalidPeptide(std::string("unknown residue '") + c + "'");
    }
  }
  for (const auto& [pos, delta] : p.mods) {
    (void)delta;
    if (pos >= p.sequence.size()) {
      throw InvalidPeptide("mod position " + std::to_string(pos) + " out of range for peptide of length " +
                           std::to_string(p.sequence.size()));
    }
  }
}

double peptide_mass(const Peptide& p) {
  validate_peptide(p);
  double m = kWaterMass;
  for (char c : p.sequence) m += residue_masses().at(c);
  for (const auto& [pos, delta] : p.mods) {
    (void)pos;
    m += delta;
  }
  return m;
}

std::vector<FragmentIon> fragment_mzs(const Peptide& p, int frag_charge) {
  validate_peptide(p);
  if (frag_charge < 1) throw InvalidCharge("fragment charge must be >= 1");
  const std::size_t n = p.sequence.size();
  std::vector<FragmentIon> out;
  if (n < 2) return out;
  out.reserve(2 * (n - 1));

  // Per-position residue mass including any mods at that position.
  std::vector<double> site(n);
  for (std::size_t i = 0; i < n; ++i) site[i] = residue_masses().at(p.sequence[i]);
  for (const auto& [pos, delta] : p.mods) site[pos] += delta;

  const double z = static_cast<double>(frag_charge);
  double prefix = 0.0;
  for (std::size_t i = 1; i < n; ++i) {
    prefix += site[i - 1];
    out.push_back({IonSeries::b, i, (prefix + z * kProtonMass) / z});
  }
  double suffix = 0.0;
  for (std::size_t i = 1; i < n; ++i) {
    suffix += site[n - i];
    out.push_back({IonSeries::y, i, (suffix + kWaterMass + z * kProtonMass) / z});
  }
  return out;
}

double precursor_mz(double neutral_mass, int z) {
  if (z < 1) throw InvalidCharge("precursor charge must be >= 1");
  if (neutral_mass <= 0.0) throw InvalidPeptide("neutral mass must be positive");
  return (neutral_mass + z * kProtonMass) / z;
}

}  // namespace specfm::chem
