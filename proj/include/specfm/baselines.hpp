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
#include <vector>

#include "specfm/gbdt.hpp"
#include "specfm/preprocess.hpp"
#include "specfm/spectrum.hpp"

namespace specfm::baselines {

struct BaselineData {
  std::vector<Spectrum> spectra;
  std::vector<int> labels;
};

// m/z-binned intensity features for every spectrum.
gbdt::FeatureMatrix bin_features(const std::vector<Spectrum>& spectra, const preprocess::PreprocessConfig& cfg);

// 54-entry oxonium intensity features.
gbdt::FeatureMatrix oxonium_features(const std::vector<Spectrum>& spectra, const preprocess::OxoniumTable& table,
                                     const preprocess::PreprocessConfig& cfg);

// bin_spectrum -> gbdt_fit -> gbdt_predict; returns probabilities on test.
std::vector<double> binned_baseline(const BaselineData& train, const BaselineData& valid,
                                    const BaselineData& test, const preprocess::PreprocessConfig& pre_cfg,
                                    const gbdt::GbdtConfig& gbdt_cfg, gbdt::GbdtModel* out_model = nullptr);

enum class OxoniumMode { ratio, gbdt54 };

// "ratio" scores with I144/(I138+I144+eps) directly (no fitting); "gbdt54"
// boosts over the full oxonium vector.
std::vector<double> oxonium_baseline(const BaselineData& train, const BaselineData& valid,
                                     const BaselineData& test, const preprocess::OxoniumTable& table,
                                     const preprocess::PreprocessConfig& pre_cfg,
                                     const gbdt::GbdtConfig& gbdt_cfg, OxoniumMode mode,
                                     gbdt::GbdtModel* out_model = nullptr);

struct BinSweepRow {
  std::size_t n_bins = 0;
  double auroc = 0.0;
};

// AUROC of the binned baseline on the validation set across bin resolutions.
std::vector<BinSweepRow> bin_resolution_sweep(const BaselineData& train, const BaselineData& valid,
                                              const std::vector<std::size_t>& bin_counts,
                                              preprocess::PreprocessConfig pre_cfg,
                                              const gbdt::GbdtConfig& gbdt_cfg);

std::string bin_sweep_tsv(const std::vector<BinSweepRow>& rows);

}  // namespace specfm::baselines
