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
#include "specfm/baselines.hpp"

#include "specfm/errors.hpp"
#include "specfm/metrics.hpp"
#include "specfm/msio.hpp"

namespace specfm::baselines {

gbdt::FeatureMatrix bin_features(const std::vector<Spectrum>& spectra, const preprocess::PreprocessConfig& cfg) {
  gbdt::FeatureMatrix m;
  m.n = spectra.size();
  m.d = cfg.n_bins;
  m.data.reserve(m.n * m.d);
  for (const Spectrum& s : spectra) {
    const auto bins = preprocess::bin_spectrum(s, cfg);
    m.data.insert(m.data.end(), bins.begin(), bins.end());
  }
  return m;
}

gbdt::FeatureMatrix oxonium_features(const std::vector<Spectrum>& spectra, const preprocess::OxoniumTable& table,
                                     const preprocess::PreprocessConfig& cfg) {
  gbdt::FeatureMatrix m;
  m.n = spectra.size();
  m.d = table.size();
  m.data.reserve(m.n * m.d);
  for (const Spectrum& s : spectra) {
    const auto f = preprocess::extract_oxonium(s, table, cfg);
    m.data.insert(m.data.end(), f.intensities.begin(), f.intensities.end());
  }
  return m;
}

std::vector<double> binned_baseline(const BaselineData& train, const BaselineData& valid,
                                    const BaselineData& test, const preprocess::PreprocessConfig& pre_cfg,
                                    const gbdt::GbdtConfig& gbdt_cfg, gbdt::GbdtModel* out_model) {
  const auto x_train = bin_features(train.spectra, pre_cfg);
  const auto x_valid = bin_features(valid.spectra, pre_cfg);
  const auto x_test = bin_features(test.spectra, pre_cfg);
  gbdt::GbdtModel model = gbdt::gbdt_fit(x_train, train.labels, x_valid, valid.labels, gbdt_cfg);
  auto scores = gbdt::gbdt_predict(model, x_test);
  if (out_model) *out_model = std::move(model);
  return scores;
}

std::vector<double> oxonium_baseline(const BaselineData& train, const BaselineData& valid,
                                     const BaselineData& test, const preprocess::OxoniumTable& table,
                                     const preprocess::PreprocessConfig& pre_cfg,
                                     const gbdt::GbdtConfig& gbdt_cfg, OxoniumMode mode,
                                     gbdt::GbdtModel* out_model) {
  if (mode == OxoniumMode::ratio) {
    std::vector<double> scores;
    scores.reserve(test.spectra.size());
    for (const Spectrum& s : test.spectra) {
      scores.push_back(preprocess::extract_oxonium(s, table, pre_cfg).score_o_glyco);
    }
    return scores;
  }
  const auto x_train = oxonium_features(train.spectra, table, pre_cfg);
  const auto x_valid = oxonium_features(valid.spectra, table, pre_cfg);
  const auto x_test = oxonium_features(test.spectra, table, pre_cfg);
  gbdt::GbdtModel model = gbdt::gbdt_fit(x_train, train.labels, x_valid, valid.labels, gbdt_cfg);
  auto scores = gbdt::gbdt_predict(model, x_test);
  if (out_model) *out_model = std::move(model);
  return scores;
}

std::vector<BinSweepRow> bin_resolution_sweep(const BaselineData& train, const BaselineData& valid,
                                              const std::vector<std::size_t>& bin_counts,
                                              preprocess::PreprocessConfig pre_cfg,
                                              const gbdt::GbdtConfig& gbdt_cfg) {
  std::vector<BinSweepRow> rows;
  for (const std::size_t n_bins : bin_counts) {
    pre_cfg.n_bins = n_bins;
    const auto x_train = bin_features(train.spectra, pre_cfg);
    const auto x_valid = bin_features(valid.spectra, pre_cfg);
    const gbdt::GbdtModel model = gbdt::gbdt_fit(x_train, train.labels, x_valid, valid.labels, gbdt_cfg);
    metrics::ScoredLabels scored;
    scored.scores = gbdt::gbdt_predict(model, x_valid);
    scored.labels = valid.labels;
    rows.push_back({n_bins, metrics::auroc(scored)});
  }
  return rows;
}

std::string bin_sweep_tsv(const std::vector<BinSweepRow>& rows) {
  std::string out = "n_bins\tauroc\n";
  for (const auto& r : rows) {
    out += std::to_string(r.n_bins) + "\t" + io::format_double(r.auroc) + "\n";
  }
  return out;
}

}  // namespace specfm::baselines
