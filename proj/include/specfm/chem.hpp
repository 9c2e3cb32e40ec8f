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

#include <map>
#include <string>
#include <utility>
#include <vector>

namespace specfm::chem {

// Monoisotopic masses in Dalton.
constexpr double kProtonMass = 1.007276;
constexpr double kWaterMass = 18.010565;
// HPO3, the mass added by phosphorylation of S/T/Y.
constexpr double kPhosphoDelta = 79.96633;
// H3PO4, the neutral loss commonly seen on phosphopeptide precursors.
constexpr double kPhosphoNeutralLoss = 97.9769;

// Map from 1-letter code to monoisotopic residue mass for the 20 canonical
// amino acids.
const std::map<char, double>& residue_masses();

bool is_canonical_residue(char code);

// Amino-acid sequence with optional per-residue modification mass deltas.
struct Peptide {
  std::string sequence;
  // (position index into sequence, mass delta in Da)
  std::vector<std::pair<std::size_t, double>> mods;
};

enum class IonSeries { b, y };

struct FragmentIon {
  IonSeries series;
  std::size_t index;  // 1-based cleavage index within its series
  double mz;
};

// Throws InvalidPeptide if the sequence is empty, contains a non-canonical
// residue, or a mod position is out of range.
void validate_peptide(const Peptide& p);

// Neutral monoisotopic mass: residues + mod deltas + water.
double peptide_mass(const Peptide& p);

// b/y fragment m/z values at the given fragment charge, ordered b1..b(n-1)
// then y1..y(n-1). A length-1 peptide has no cleavage site and yields {}.
std::vector<FragmentIon> fragment_mzs(const Peptide& p, int frag_charge);

// (neutral_mass + z * proton) / z. Throws InvalidCharge when z < 1.
double precursor_mz(double neutral_mass, int z);

}  // namespace specfm::chem
