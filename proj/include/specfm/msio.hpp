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
#include <utility>
#include <vector>

#include "specfm/spectrum.hpp"

namespace specfm::io {

// ---- MGF ----------------------------------------------------------------
//
// BEGIN IONS / END IONS blocks with TITLE (scan id), optional RUNID (this
// toolkit's extension so run ids survive a round trip), PEPMASS, CHARGE,
// then "mz intensity" peak lines. Peaks are sorted by m/z after parsing.

std::vector<Spectrum> parse_mgf(const std::string& text);
std::string write_mgf(const std::vector<Spectrum>& spectra);

std::vector<Spectrum> parse_mgf_file(const std::string& path);
void write_mgf_file(const std::vector<Spectrum>& spectra, const std::string& path);

// ---- mzML (strict subset) ------------------------------------------------
//
// MS level 2 spectra only; per spectrum a base64-encoded m/z array and
// intensity array (IEEE-754 little-endian 32- or 64-bit floats, zlib or no
// compression, cvParam-declared). Indexed-mzML wrappers are tolerated by
// skipping the index.

std::vector<Spectrum> parse_mzml(const std::string& bytes);
std::vector<Spectrum> parse_mzml_file(const std::string& path);

// ---- label tables ---------------------------------------------------------

// TSV with header "run_id\tscan_id\ttask\tlabel". Label must be 0 or 1;
// duplicate (run_id, scan_id, task) keys raise DuplicateLabel.
std::vector<LabelRecord> read_labels(const std::string& text);
std::vector<LabelRecord> read_labels_file(const std::string& path);
std::string write_labels(const std::vector<LabelRecord>& records);
void write_labels_file(const std::vector<LabelRecord>& records, const std::string& path);

// Join on (run_id, scan_id) for one task; spectra without a matching record
// are dropped.
std::vector<std::pair<Spectrum, int>> join_labels(const std::vector<Spectrum>& spectra,
                                                  const std::vector<LabelRecord>& records, Task task);

// ---- embedding persistence -------------------------------------------------
//
// Binary layout: magic "SEMB", version u32=1, n_rows u32, dim u32, then
// n_rows*dim float32, all little-endian. A TSV sidecar holds the row index.

struct EmbeddingMatrix {
  std::size_t n_rows = 0;
  std::size_t dim = 0;
  std::vector<float> data;  // row-major, n_rows * dim
  std::vector<std::pair<std::string, std::string>> index;  // (run_id, scan_id) per row
};

std::string serialize_embeddings(const EmbeddingMatrix& m);
EmbeddingMatrix parse_embeddings(const std::string& bytes);
std::string serialize_row_index(const EmbeddingMatrix& m);
void parse_row_index(const std::string& text, EmbeddingMatrix& m);

// Writes <path> and <path>.tsv.
void write_embeddings_file(const EmbeddingMatrix& m, const std::string& path);
EmbeddingMatrix read_embeddings_file(const std::string& path);

// ---- small shared helpers ---------------------------------------------------

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& bytes);

// Shortest decimal representation that round-trips the double exactly.
std::string format_double(double v);

namespace detail {
std::string base64_decode(const std::string& in);  // throws ParseError
std::string base64_encode(const std::string& in);
std::string zlib_inflate(const std::string& in);   // throws ParseError
std::string zlib_deflate(const std::string& in);
}  // namespace detail

}  // namespace specfm::io
