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
#include "specfm/msio.hpp"

#include <zlib.h>

#include <algorithm>
#include <array>
#include <charconv>
#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "specfm/errors.hpp"

namespace specfm::io {

namespace {

bool parse_double(const std::string& s, double& out) {
  const char* first = s.data();
  const char* last = s.data() + s.size();
  auto res = std::from_chars(first, last, out);
  return res.ec == std::errc() && res.ptr == last;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = s.find(sep, start);
    if (pos == std::string::npos) {
      out.push_back(s.substr(start));
      break;
    }
    out.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

std::string strip_cr(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

void append_u32(std::string& out, std::uint32_t v) {
  char b[4];
  b[0] = static_cast<char>(v & 0xff);
  b[1] = static_cast<char>((v >> 8) & 0xff);
  b[2] = static_cast<char>((v >> 16) & 0xff);
  b[3] = static_cast<char>((v >> 24) & 0xff);
  out.append(b, 4);
}

std::uint32_t read_u32(const std::string& bytes, std::size_t off) {
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + off);
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace

std::string format_double(double v) {
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ParseError("cannot open file for writing: " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ParseError("write failed: " + path);
}

// ---- MGF --------------------------------------------------------------------

std::vector<Spectrum> parse_mgf(const std::string& text) {
  std::vector<Spectrum> out;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;

  bool in_block = false;
  std::size_t block_start = 0;
  bool have_pepmass = false;
  Spectrum cur;

  while (std::getline(in, line)) {
    ++lineno;
    line = strip_cr(line);
    if (!in_block) {
      if (line == "BEGIN IONS") {
        in_block = true;
        block_start = lineno;
        have_pepmass = false;
        cur = Spectrum{};
      }
      // anything outside a block is ignored (comments, blank lines)
      continue;
    }
    if (line == "END IONS") {
      if (!have_pepmass) {
        throw ParseError("MGF block starting at line " + std::to_string(block_start) +
                         ": missing PEPMASS (block ends at line " + std::to_string(lineno) + ")");
      }
      std::stable_sort(cur.peaks.begin(), cur.peaks.end(),
                       [](const Peak& a, const Peak& b) { return a.mz < b.mz; });
      out.push_back(std::move(cur));
      in_block = false;
      continue;
    }
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    const std::size_t sp = line.find_first_of(" \t");
    if (eq != std::string::npos && (sp == std::string::npos || eq < sp)) {
      const std::string key = line.substr(0, eq);
      const std::string value = line.substr(eq + 1);
      if (key == "TITLE") {
        cur.scan_id = value;
      } else if (key == "RUNID") {
        cur.run_id = value;
      } else if (key == "PEPMASS") {
        // PEPMASS may carry an intensity after the m/z; take the first token.
        const std::string first = value.substr(0, value.find_first_of(" \t"));
        double mz = 0.0;
        if (!parse_double(first, mz)) {
          throw ParseError("line " + std::to_string(lineno) + ": bad PEPMASS value '" + value + "'");
        }
        cur.precursor_mz = mz;
        have_pepmass = true;
      } else if (key == "CHARGE") {
        std::string v = value;
        if (!v.empty() && (v.back() == '+' || v.back() == '-')) v.pop_back();
        if (!v.empty() && v.front() == '+') v.erase(v.begin());
        int z = 0;
        auto res = std::from_chars(v.data(), v.data() + v.size(), z);
        if (res.ec != std::errc() || res.ptr != v.data() + v.size() || z < 0) {
          throw ParseError("line " + std::to_string(lineno) + ": bad CHARGE value '" + value + "'");
        }
        cur.precursor_charge = z;
      }
      // other KEY=VALUE headers are ignored
      continue;
    }
    // peak line: "mz intensity" (extra columns tolerated)
    std::istringstream ls(line);
    std::string tok_mz, tok_int;
    ls >> tok_mz >> tok_int;
    double mz = 0.0, inten = 0.0;
    if (tok_int.empty() || !parse_double(tok_mz, mz) || !parse_double(tok_int, inten)) {
      throw ParseError("line " + std::to_string(lineno) + ": bad peak line '" + line + "'");
    }
    cur.peaks.push_back({mz, inten});
  }
  if (in_block) {
    throw ParseError("MGF block starting at line " + std::to_string(block_start) + ": missing END IONS at end of input");
  }
  return out;
}

std::string write_mgf(const std::vector<Spectrum>& spectra) {
  std::string out;
  for (const Spectrum& s : spectra) {
    out += "BEGIN IONS\n";
    out += "TITLE=" + s.scan_id + "\n";
    if (!s.run_id.empty()) out += "RUNID=" + s.run_id + "\n";
    out += "PEPMASS=" + format_double(s.precursor_mz) + "\n";
    if (s.precursor_charge > 0) out += "CHARGE=" + std::to_string(s.precursor_charge) + "+\n";
    for (const Peak& p : s.peaks) {
      out += format_double(p.mz) + " " + format_double(p.intensity) + "\n";
    }
    out += "END IONS\n";
  }
  return out;
}

std::vector<Spectrum> parse_mgf_file(const std::string& path) { return parse_mgf(read_file(path)); }

void write_mgf_file(const std::vector<Spectrum>& spectra, const std::string& path) {
  write_file(path, write_mgf(spectra));
}

// ---- base64 / zlib ------------------------------------------------------------

namespace detail {

std::string base64_decode(const std::string& in) {
  static const auto table = [] {
    std::array<int, 256> t{};
    t.fill(-1);
    const char* alphabet = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
    for (int i = 0; i < 64; ++i) t[static_cast<unsigned char>(alphabet[i])] = i;
    return t;
  }();
  std::string out;
  out.reserve(in.size() / 4 * 3);
  std::uint32_t acc = 0;
  int bits = 0;
  std::size_t pad = 0;
  for (char c : in) {
    if (c == '\n' || c == '\r' || c == ' ' || c == '\t') continue;
    if (c == '=') {
      ++pad;
      continue;
    }
    if (pad > 0) throw ParseError("base64: data after padding");
    const int v = table[static_cast<unsigned char>(c)];
    if (v < 0) throw ParseError(std::string("base64: invalid character '") + c + "'");
    acc = (acc << 6) | static_cast<std::uint32_t>(v);
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      out.push_back(static_cast<char>((acc >> bits) & 0xff));
    }
  }
  if (bits >= 6 || pad > 2) throw ParseError("base64: truncated input");
  return out;
}

std::string base64_encode(const std::string& in) {
  static const char* alphabet = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  out.reserve((in.size() + 2) / 3 * 4);
  std::size_t i = 0;
  while (i + 3 <= in.size()) {
    const std::uint32_t v = (static_cast<unsigned char>(in[i]) << 16) |
                            (static_cast<unsigned char>(in[i + 1]) << 8) | static_cast<unsigned char>(in[i + 2]);
    out.push_back(alphabet[(v >> 18) & 63]);
    out.push_back(alphabet[(v >> 12) & 63]);
    out.push_back(alphabet[(v >> 6) & 63]);
    out.push_back(alphabet[v & 63]);
    i += 3;
  }
  const std::size_t rem = in.size() - i;
  if (rem == 1) {
    const std::uint32_t v = static_cast<unsigned char>(in[i]) << 16;
    out.push_back(alphabet[(v >> 18) & 63]);
    out.push_back(alphabet[(v >> 12) & 63]);
    out += "==";
  } else if (rem == 2) {
    const std::uint32_t v =
        (static_cast<unsigned char>(in[i]) << 16) | (static_cast<unsigned char>(in[i + 1]) << 8);
    out.push_back(alphabet[(v >> 18) & 63]);
    out.push_back(alphabet[(v >> 12) & 63]);
    out.push_back(alphabet[(v >> 6) & 63]);
    out.push_back('=');
  }
  return out;
}

std::string zlib_inflate(const std::string& in) {
  z_stream zs{};
  if (inflateInit(&zs) != Z_OK) throw ParseError("zlib: inflateInit failed");
  std::string out;
  out.resize(std::max<std::size_t>(in.size() * 4, 1024));
  zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(in.data()));
  zs.avail_in = static_cast<uInt>(in.size());
  std::size_t written = 0;
  int ret = Z_OK;
  do {
    if (written == out.size()) out.resize(out.size() * 2);
    zs.next_out = reinterpret_cast<Bytef*>(out.data() + written);
    zs.avail_out = static_cast<uInt>(out.size() - written);
    ret = inflate(&zs, Z_NO_FLUSH);
    if (ret != Z_OK && ret != Z_STREAM_END) {
      inflateEnd(&zs);
      throw ParseError("zlib: corrupt deflate stream");
    }
    written = zs.total_out;
  } while (ret != Z_STREAM_END);
  inflateEnd(&zs);
  out.resize(written);
  return out;
}

std::string zlib_deflate(const std::string& in) {
  uLong bound = compressBound(static_cast<uLong>(in.size()));
  std::string out;
  out.resize(bound);
  uLongf out_len = bound;
  if (compress(reinterpret_cast<Bytef*>(out.data()), &out_len,
               reinterpret_cast<const Bytef*>(in.data()), static_cast<uLong>(in.size())) != Z_OK) {
    throw ParseError("zlib: compress failed");
  }
  out.resize(out_len);
  return out;
}

}  // namespace detail

// ---- mzML ---------------------------------------------------------------------

namespace {

// Minimal scanner for the mzML subset written by common converters. Not a
// general XML parser; it only understands the elements this toolkit consumes.

// Returns the value of attribute `name` inside `tag` (the text between '<x'
// and '>'), or empty string if absent.
std::string find_attr(const std::string& tag, const std::string& name) {
  const std::string needle = name + "=";
  std::size_t pos = 0;
  while ((pos = tag.find(needle, pos)) != std::string::npos) {
    // must be preceded by whitespace
    if (pos == 0 || !(tag[pos - 1] == ' ' || tag[pos - 1] == '\t' || tag[pos - 1] == '\n')) {
      pos += needle.size();
      continue;
    }
    const std::size_t q = pos + needle.size();
    if (q >= tag.size() || (tag[q] != '"' && tag[q] != '\'')) {
      pos += needle.size();
      continue;
    }
    const char quote = tag[q];
    const std::size_t end = tag.find(quote, q + 1);
    if (end == std::string::npos) return "";
    return tag.substr(q + 1, end - q - 1);
  }
  return "";
}

struct TagSpan {
  std::size_t begin = std::string::npos;  // position of '<'
  std::size_t inner_begin = 0;            // just after the opening tag's '>'
  std::size_t inner_end = 0;              // position of matching "</name"
  std::string open_tag;                   // text between "<name" and '>'
};

// Finds the next element with the given name at or after `from`, matching
// whole tag names only. Handles self-closing tags (inner range empty).
TagSpan find_element(const std::string& xml, const std::string& name, std::size_t from) {
  const std::string open = "<" + name;
  std::size_t pos = from;
  while ((pos = xml.find(open, pos)) != std::string::npos) {
    const std::size_t after = pos + open.size();
    if (after < xml.size() && (xml[after] == ' ' || xml[after] == '>' || xml[after] == '/' ||
                               xml[after] == '\t' || xml[after] == '\n')) {
      break;
    }
    pos = after;
  }
  TagSpan span;
  if (pos == std::string::npos) return span;
  const std::size_t gt = xml.find('>', pos);
  if (gt == std::string::npos) return span;
  span.begin = pos;
  span.open_tag = xml.substr(pos, gt - pos + 1);
  if (gt > 0 && xml[gt - 1] == '/') {  // self-closing
    span.inner_begin = gt + 1;
    span.inner_end = gt + 1;
    return span;
  }
  span.inner_begin = gt + 1;
  const std::string close = "</" + name;
  const std::size_t end = xml.find(close, gt + 1);
  if (end == std::string::npos) {
    span.begin = std::string::npos;
    return span;
  }
  span.inner_end = end;
  return span;
}

struct CvParam {
  std::string accession;
  std::string value;
};

std::vector<CvParam> cv_params(const std::string& xml, std::size_t begin, std::size_t end) {
  std::vector<CvParam> out;
  std::size_t pos = begin;
  while (true) {
    const std::size_t p = xml.find("<cvParam", pos);
    if (p == std::string::npos || p >= end) break;
    const std::size_t gt = xml.find('>', p);
    if (gt == std::string::npos || gt >= end) break;
    const std::string tag = xml.substr(p, gt - p + 1);
    out.push_back({find_attr(tag, "accession"), find_attr(tag, "value")});
    pos = gt + 1;
  }
  return out;
}

// accessions
constexpr const char* kMsLevel = "MS:1000511";
constexpr const char* kMzArray = "MS:1000514";
constexpr const char* kIntensityArray = "MS:1000515";
constexpr const char* kFloat32 = "MS:1000521";
constexpr const char* kFloat64 = "MS:1000523";
constexpr const char* kZlib = "MS:1000574";
constexpr const char* kNoCompression = "MS:1000576";
constexpr const char* kSelectedIonMz = "MS:1000744";
constexpr const char* kChargeState = "MS:1000041";

std::vector<double> decode_binary_array(const std::string& xml, const TagSpan& array_span,
                                        const std::string& spectrum_id) {
  const auto params = cv_params(xml, array_span.inner_begin, array_span.inner_end);
  bool f32 = false, f64 = false, zlib_c = false, none_c = false;
  for (const auto& p : params) {
    if (p.accession == kFloat32) f32 = true;
    if (p.accession == kFloat64) f64 = true;
    if (p.accession == kZlib) zlib_c = true;
    if (p.accession == kNoCompression) none_c = true;
  }
  if (f32 == f64) {
    throw ParseError("mzML spectrum '" + spectrum_id + "': binary array precision cvParam missing or ambiguous");
  }
  if (zlib_c == none_c) {
    throw ParseError("mzML spectrum '" + spectrum_id +
                     "': unsupported or undeclared binary array compression cvParam");
  }
  const TagSpan bin = find_element(xml, "binary", array_span.inner_begin);
  if (bin.begin == std::string::npos || bin.begin >= array_span.inner_end) {
    throw ParseError("mzML spectrum '" + spectrum_id + "': missing <binary> payload");
  }
  std::string payload = xml.substr(bin.inner_begin, bin.inner_end - bin.inner_begin);
  std::string bytes;
  try {
    bytes = detail::base64_decode(payload);
    if (zlib_c) bytes = detail::zlib_inflate(bytes);
  } catch (const ParseError& e) {
    throw ParseError("mzML spectrum '" + spectrum_id + "': " + e.what());
  }
  const std::size_t width = f64 ? 8 : 4;
  if (bytes.size() % width != 0) {
    throw ParseError("mzML spectrum '" + spectrum_id + "': binary payload size not a multiple of element width");
  }
  const std::size_t n = bytes.size() / width;
  std::vector<double> values(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (f64) {
      double v;
      std::memcpy(&v, bytes.data() + i * 8, 8);
      values[i] = v;
    } else {
      float v;
      std::memcpy(&v, bytes.data() + i * 4, 4);
      values[i] = static_cast<double>(v);
    }
  }
  return values;
}

}  // namespace

std::vector<Spectrum> parse_mzml(const std::string& bytes) {
  std::vector<Spectrum> out;
  // Restrict the scan to the spectrumList so an indexed-mzML trailer never
  // confuses the element search.
  const TagSpan list = find_element(bytes, "spectrumList", 0);
  const std::size_t scan_begin = list.begin == std::string::npos ? 0 : list.inner_begin;
  const std::size_t scan_end = list.begin == std::string::npos ? bytes.size() : list.inner_end;

  std::size_t pos = scan_begin;
  while (pos < scan_end) {
    const TagSpan spec = find_element(bytes, "spectrum", pos);
    if (spec.begin == std::string::npos || spec.begin >= scan_end) break;
    pos = spec.inner_end + 1;

    const std::string id = find_attr(spec.open_tag, "id");

    int ms_level = 0;
    for (const auto& p : cv_params(bytes, spec.inner_begin, spec.inner_end)) {
      if (p.accession == kMsLevel) {
        double v = 0.0;
        if (parse_double(p.value, v)) ms_level = static_cast<int>(v);
      }
    }
    if (ms_level != 2) continue;

    Spectrum s;
    s.scan_id = id;

    const TagSpan sel = find_element(bytes, "selectedIon", spec.inner_begin);
    if (sel.begin != std::string::npos && sel.begin < spec.inner_end) {
      for (const auto& p : cv_params(bytes, sel.begin, sel.inner_end == sel.inner_begin
                                                           ? sel.inner_begin
                                                           : sel.inner_end)) {
        double v = 0.0;
        if (p.accession == kSelectedIonMz && parse_double(p.value, v)) s.precursor_mz = v;
        if (p.accession == kChargeState && parse_double(p.value, v)) s.precursor_charge = static_cast<int>(v);
      }
    }

    std::vector<double> mz, intensity;
    bool have_mz = false, have_intensity = false;
    std::size_t apos = spec.inner_begin;
    while (apos < spec.inner_end) {
      const TagSpan arr = find_element(bytes, "binaryDataArray", apos);
      if (arr.begin == std::string::npos || arr.begin >= spec.inner_end) break;
      apos = arr.inner_end + 1;
      bool is_mz = false, is_intensity = false;
      for (const auto& p : cv_params(bytes, arr.inner_begin, arr.inner_end)) {
        if (p.accession == kMzArray) is_mz = true;
        if (p.accession == kIntensityArray) is_intensity = true;
      }
      if (!is_mz && !is_intensity) continue;
      auto values = decode_binary_array(bytes, arr, id);
      if (is_mz) {
        mz = std::move(values);
        have_mz = true;
      } else {
        intensity = std::move(values);
        have_intensity = true;
      }
    }
    if (!have_mz || !have_intensity) {
      throw ParseError("mzML spectrum '" + id + "': missing m/z or intensity binary array");
    }
    if (mz.size() != intensity.size()) {
      throw ParseError("mzML spectrum '" + id + "': m/z and intensity array lengths differ (" +
                       std::to_string(mz.size()) + " vs " + std::to_string(intensity.size()) + ")");
    }
    s.peaks.reserve(mz.size());
    for (std::size_t i = 0; i < mz.size(); ++i) s.peaks.push_back({mz[i], intensity[i]});
    std::stable_sort(s.peaks.begin(), s.peaks.end(), [](const Peak& a, const Peak& b) { return a.mz < b.mz; });
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<Spectrum> parse_mzml_file(const std::string& path) { return parse_mzml(read_file(path)); }

// ---- labels --------------------------------------------------------------------

std::vector<LabelRecord> read_labels(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  std::vector<LabelRecord> out;
  std::set<std::string> seen;

  if (!std::getline(in, line)) return out;
  ++lineno;
  line = strip_cr(line);
  if (line != "run_id\tscan_id\ttask\tlabel") {
    throw ParseError("label TSV: bad header '" + line + "'");
  }
  while (std::getline(in, line)) {
    ++lineno;
    line = strip_cr(line);
    if (line.empty()) continue;
    const auto fields = split(line, '\t');
    if (fields.size() != 4) {
      throw ParseError("label TSV line " + std::to_string(lineno) + ": expected 4 fields, got " +
                       std::to_string(fields.size()));
    }
    LabelRecord r;
    r.run_id = fields[0];
    r.scan_id = fields[1];
    try {
      r.task = task_from_name(fields[2]);
    } catch (const ConfigError&) {
      throw ParseError("label TSV line " + std::to_string(lineno) + ": unknown task '" + fields[2] + "'");
    }
    if (fields[3] == "0") {
      r.label = 0;
    } else if (fields[3] == "1") {
      r.label = 1;
    } else {
      throw ParseError("label TSV line " + std::to_string(lineno) + ": label must be 0 or 1, got '" + fields[3] +
                       "'");
    }
    const std::string key = r.run_id + "\t" + r.scan_id + "\t" + fields[2];
    if (!seen.insert(key).second) {
      throw DuplicateLabel("duplicate label key (" + r.run_id + ", " + r.scan_id + ", " + fields[2] + ")");
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<LabelRecord> read_labels_file(const std::string& path) { return read_labels(read_file(path)); }

std::string write_labels(const std::vector<LabelRecord>& records) {
  std::string out = "run_id\tscan_id\ttask\tlabel\n";
  for (const auto& r : records) {
    out += r.run_id + "\t" + r.scan_id + "\t" + task_name(r.task) + "\t" + std::to_string(r.label) + "\n";
  }
  return out;
}

void write_labels_file(const std::vector<LabelRecord>& records, const std::string& path) {
  write_file(path, write_labels(records));
}

std::vector<std::pair<Spectrum, int>> join_labels(const std::vector<Spectrum>& spectra,
                                                  const std::vector<LabelRecord>& records, Task task) {
  std::map<std::pair<std::string, std::string>, int> by_key;
  for (const auto& r : records) {
    if (r.task == task) by_key[{r.run_id, r.scan_id}] = r.label;
  }
  std::vector<std::pair<Spectrum, int>> out;
  for (const auto& s : spectra) {
    const auto it = by_key.find({s.run_id, s.scan_id});
    if (it != by_key.end()) out.emplace_back(s, it->second);
  }
  return out;
}

// ---- embeddings -----------------------------------------------------------------

std::string serialize_embeddings(const EmbeddingMatrix& m) {
  if (m.data.size() != m.n_rows * m.dim) throw FormatError("embedding matrix: data size does not match header");
  std::string out = "SEMB";
  append_u32(out, 1);
  append_u32(out, static_cast<std::uint32_t>(m.n_rows));
  append_u32(out, static_cast<std::uint32_t>(m.dim));
  const std::size_t nbytes = m.data.size() * sizeof(float);
  const std::size_t off = out.size();
  out.resize(off + nbytes);
  if (nbytes > 0) std::memcpy(out.data() + off, m.data.data(), nbytes);
  return out;
}

EmbeddingMatrix parse_embeddings(const std::string& bytes) {
  if (bytes.size() < 16 || bytes.compare(0, 4, "SEMB") != 0) {
    throw FormatError("embedding file: bad magic");
  }
  const std::uint32_t version = read_u32(bytes, 4);
  if (version != 1) throw FormatError("embedding file: unsupported version " + std::to_string(version));
  EmbeddingMatrix m;
  m.n_rows = read_u32(bytes, 8);
  m.dim = read_u32(bytes, 12);
  const std::size_t expect = 16 + m.n_rows * m.dim * sizeof(float);
  if (bytes.size() != expect) {
    throw FormatError("embedding file: size " + std::to_string(bytes.size()) + " does not match header (expected " +
                      std::to_string(expect) + ")");
  }
  m.data.resize(m.n_rows * m.dim);
  if (!m.data.empty()) std::memcpy(m.data.data(), bytes.data() + 16, m.data.size() * sizeof(float));
  return m;
}

std::string serialize_row_index(const EmbeddingMatrix& m) {
  std::string out = "run_id\tscan_id\n";
  for (const auto& [run, scan] : m.index) out += run + "\t" + scan + "\n";
  return out;
}

void parse_row_index(const std::string& text, EmbeddingMatrix& m) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw FormatError("embedding row index: empty file");
  if (strip_cr(line) != "run_id\tscan_id") throw FormatError("embedding row index: bad header");
  m.index.clear();
  while (std::getline(in, line)) {
    line = strip_cr(line);
    if (line.empty()) continue;
    const auto fields = split(line, '\t');
    if (fields.size() != 2) throw FormatError("embedding row index: expected 2 fields");
    m.index.emplace_back(fields[0], fields[1]);
  }
  if (m.index.size() != m.n_rows) {
    throw FormatError("embedding row index: " + std::to_string(m.index.size()) + " rows for matrix with " +
                      std::to_string(m.n_rows));
  }
}

void write_embeddings_file(const EmbeddingMatrix& m, const std::string& path) {
  write_file(path, serialize_embeddings(m));
  write_file(path + ".tsv", serialize_row_index(m));
}

EmbeddingMatrix read_embeddings_file(const std::string& path) {
  EmbeddingMatrix m = parse_embeddings(read_file(path));
  parse_row_index(read_file(path + ".tsv"), m);
  return m;
}

}  // namespace specfm::io
