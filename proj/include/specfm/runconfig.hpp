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

#include "specfm/denovo.hpp"
#include "specfm/encoder.hpp"
#include "specfm/gbdt.hpp"
#include "specfm/preprocess.hpp"
#include "specfm/synthgen.hpp"
#include "specfm/train.hpp"

namespace specfm::config {

// Resolved configuration for a CLI run. Precedence: defaults < file (key =
// value lines) < command-line overrides. Unknown keys are rejected.
struct RunConfig {
  encoder::EncoderConfig encoder;
  denovo::DecoderConfig decoder;
  train::TrainConfig train;
  gbdt::GbdtConfig gbdt;
  preprocess::PreprocessConfig preprocess;
  synth::SynthConfig synth;

  // Applies one "section.key = value" assignment; throws ConfigError for
  // unknown keys or unparsable values.
  void set(const std::string& key, const std::string& value);
  // Parses a config file ('#' comments, blank lines allowed).
  void load_file(const std::string& path);
  void apply_overrides(const std::vector<std::string>& assignments);  // "key=value" each
  // Key-sorted dump of every resolved value (run manifest body).
  std::string dump() const;
  // Validates every section against its owning module.
  void validate() const;
};

// FNV-1a digest of a file's bytes, as 16 hex characters (manifest input
// digests).
std::string file_digest(const std::string& path);

}  // namespace specfm::config
