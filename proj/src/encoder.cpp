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
#include "specfm/encoder.hpp"

#include <algorithm>

namespace specfm::encoder {

void EncoderConfig::validate() const {
  if (d_model == 0 || d_model % 2 != 0) throw ConfigError("encoder: d_model must be even and positive");
  if (n_heads == 0 || d_model % n_heads != 0) {
    throw ConfigError("encoder: d_model must be divisible by n_heads");
  }
  if (n_layers < 1) throw ConfigError("encoder: n_layers must be >= 1");
  if (!(lambda_min < lambda_max) || lambda_min <= 0.0) {
    throw ConfigError("encoder: need 0 < lambda_min < lambda_max");
  }
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("encoder: dropout must be in [0, 1)");
}

std::vector<double> encode_mz(double mz, std::size_t d_model, double lambda_min, double lambda_max) {
  const std::size_t half = d_model / 2;
  std::vector<double> out(d_model);
  const double ratio = lambda_max / lambda_min;
  const double denom = half > 1 ? static_cast<double>(half - 1) : 1.0;
  constexpr double two_pi = 6.283185307179586476925286766559;
  for (std::size_t k = 0; k < half; ++k) {
    const double lambda = lambda_min * std::pow(ratio, static_cast<double>(k) / denom);
    const double omega = two_pi / lambda;
    out[k] = std::sin(omega * mz);
    out[half + k] = std::cos(omega * mz);
  }
  return out;
}

void PeakBatch::row_valid(std::size_t row, std::vector<double>& out_mz,
                          std::vector<double>& out_intensity) const {
  out_mz.clear();
  out_intensity.clear();
  for (std::size_t i = 0; i < max_len; ++i) {
    const std::size_t idx = row * max_len + i;
    if (mask[idx]) {
      out_mz.push_back(mz[idx]);
      out_intensity.push_back(intensity[idx]);
    }
  }
}

void PeakBatch::validate() const {
  if (mz.size() != batch * max_len || intensity.size() != mz.size() || mask.size() != mz.size()) {
    throw NumericError("peak batch: array shapes inconsistent");
  }
  for (std::size_t r = 0; r < batch; ++r) {
    std::size_t valid = 0;
    for (std::size_t i = 0; i < max_len; ++i) {
      const std::size_t idx = r * max_len + i;
      if (mask[idx]) {
        ++valid;
        if (!std::isfinite(mz[idx]) || !std::isfinite(intensity[idx])) {
          throw NumericError("peak batch: non-finite peak in row " + std::to_string(r));
        }
      }
    }
    if (valid == 0) throw EmptySpectrum("peak batch: row " + std::to_string(r) + " has no valid peaks");
  }
}

PeakBatch pack_batch(const std::vector<preprocess::ProcessedSpectrum>& spectra) {
  PeakBatch b;
  b.batch = spectra.size();
  b.max_len = 0;
  for (const auto& s : spectra) b.max_len = std::max(b.max_len, s.peaks.size());
  b.mz.assign(b.batch * b.max_len, 0.0);
  b.intensity.assign(b.batch * b.max_len, 0.0);
  b.mask.assign(b.batch * b.max_len, 0);
  for (std::size_t r = 0; r < spectra.size(); ++r) {
    const auto& peaks = spectra[r].peaks;
    for (std::size_t i = 0; i < peaks.size(); ++i) {
      const std::size_t idx = r * b.max_len + i;
      b.mz[idx] = peaks[i].mz;
      b.intensity[idx] = peaks[i].intensity;
      b.mask[idx] = 1;
    }
  }
  return b;
}

}  // namespace specfm::encoder
