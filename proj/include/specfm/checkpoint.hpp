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
#include <vector>

#include "specfm/denovo.hpp"
#include "specfm/encoder.hpp"
#include "specfm/nn.hpp"
#include "specfm/spectrum.hpp"
#include "specfm/train.hpp"

namespace specfm::model {

// A saved model: architecture config plus every named parameter tensor.
// Binary layout: magic "SCPT", version u32, config block (length-prefixed
// JSON), then per tensor (name-length u32, name bytes, rank u32, dims u32[],
// float32 data), all little-endian.
struct ModelBundle {
  bool has_encoder = false;
  bool has_decoder = false;
  encoder::EncoderConfig enc_cfg;
  denovo::DecoderConfig dec_cfg;
  denovo::Vocabulary vocab;  // meaningful when has_decoder
  std::vector<std::string> head_names;
  std::size_t head_hidden = 0;
  std::size_t head_input_dim = 0;
  nn::ParamSet<float> params;
};

std::string save_checkpoint(const ModelBundle& bundle);
// Validates that every architecture-required tensor is present exactly once
// with a consistent shape; throws FormatError otherwise.
ModelBundle load_checkpoint(const std::string& bytes);

void save_checkpoint_file(const ModelBundle& bundle, const std::string& path);
ModelBundle load_checkpoint_file(const std::string& path);

// bundle builders
ModelBundle bundle_encoder(const encoder::EncoderModel<float>& enc);
ModelBundle bundle_pretrained(const encoder::EncoderModel<float>& enc, const denovo::DecoderModel<float>& dec);
ModelBundle bundle_multitask(const encoder::EncoderModel<float>& enc, const denovo::DecoderModel<float>& dec,
                             const std::map<Task, train::HeadModel<float>>& heads);
ModelBundle bundle_head(const train::HeadModel<float>& head, const std::string& name);

// component extraction (validates presence + shapes)
encoder::EncoderModel<float> encoder_from(const ModelBundle& bundle);
denovo::DecoderModel<float> decoder_from(const ModelBundle& bundle);
train::HeadModel<float> head_from(const ModelBundle& bundle, const std::string& name);

}  // namespace specfm::model
