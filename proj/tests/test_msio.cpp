#include <doctest.h>

#include <cmath>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "specfm/errors.hpp"
#include "specfm/msio.hpp"
#include "specfm/rng.hpp"

using namespace specfm;

#ifndef SPECFM_TEST_DATA
#define SPECFM_TEST_DATA "tests/data"
#endif

namespace {

std::string data_path(const std::string& name) { return std::string(SPECFM_TEST_DATA) + "/" + name; }

std::vector<Spectrum> random_spectra(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Spectrum> out;
  for (std::size_t i = 0; i < n; ++i) {
    Spectrum s;
    s.run_id = "run" + std::to_string(rng.uniform_int(5));
    s.scan_id = "scan=" + std::to_string(i);
    s.precursor_mz = rng.uniform(120.0, 1800.0);
    s.precursor_charge = rng.bernoulli(0.2) ? 0 : static_cast<int>(rng.uniform_range(1, 5));
    const std::size_t n_peaks = rng.uniform_int(60);
    for (std::size_t p = 0; p < n_peaks; ++p) {
      s.peaks.push_back({rng.uniform(50.0, 2400.0), 1.0 - rng.uniform()});
    }
    std::sort(s.peaks.begin(), s.peaks.end(), [](const Peak& a, const Peak& b) { return a.mz < b.mz; });
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace

TEST_CASE("parse_mgf reads a well-formed block") {
  const std::string text =
      "BEGIN IONS\n"
      "TITLE=scan 12\n"
      "PEPMASS=501.0\n"
      "CHARGE=2+\n"
      "100.0 1.0\n"
      "200.0 2.0\n"
      "END IONS\n";
  const auto spectra = io::parse_mgf(text);
  REQUIRE(spectra.size() == 1);
  CHECK(spectra[0].scan_id == "scan 12");
  CHECK(spectra[0].precursor_mz == doctest::Approx(501.0));
  CHECK(spectra[0].precursor_charge == 2);
  REQUIRE(spectra[0].peaks.size() == 2);
  CHECK(spectra[0].peaks[0].mz == doctest::Approx(100.0));
  CHECK(spectra[0].peaks[1].intensity == doctest::Approx(2.0));
}

TEST_CASE("parse_mgf sorts unsorted peak lists") {
  const std::string text =
      "BEGIN IONS\nTITLE=t\nPEPMASS=300\n500.0 1.0\n100.0 2.0\n300.0 3.0\nEND IONS\n";
  const auto spectra = io::parse_mgf(text);
  REQUIRE(spectra.size() == 1);
  CHECK(spectra[0].peaks[0].mz == 100.0);
  CHECK(spectra[0].peaks[1].mz == 300.0);
  CHECK(spectra[0].peaks[2].mz == 500.0);
}

TEST_CASE("parse_mgf error cases") {
  CHECK(io::parse_mgf("").empty());
  CHECK_THROWS_AS(io::parse_mgf("BEGIN IONS\nTITLE=t\n100 1\nEND IONS\n"), ParseError);  // no PEPMASS
  CHECK_THROWS_AS(io::parse_mgf("BEGIN IONS\nTITLE=t\nPEPMASS=1\nabc def\nEND IONS\n"), ParseError);
  CHECK_THROWS_AS(io::parse_mgf("BEGIN IONS\nTITLE=t\nPEPMASS=1\n100 1\n"), ParseError);  // EOF
}

TEST_CASE("MGF round trip is field-identical") {
  const auto spectra = random_spectra(200, 0xab5u);
  const auto parsed = io::parse_mgf(io::write_mgf(spectra));
  REQUIRE(parsed.size() == spectra.size());
  for (std::size_t i = 0; i < spectra.size(); ++i) {
    CHECK(parsed[i].run_id == spectra[i].run_id);
    CHECK(parsed[i].scan_id == spectra[i].scan_id);
    CHECK(parsed[i].precursor_mz == spectra[i].precursor_mz);
    CHECK(parsed[i].precursor_charge == spectra[i].precursor_charge);
    REQUIRE(parsed[i].peaks.size() == spectra[i].peaks.size());
    for (std::size_t p = 0; p < spectra[i].peaks.size(); ++p) {
      CHECK(parsed[i].peaks[p].mz == spectra[i].peaks[p].mz);
      CHECK(parsed[i].peaks[p].intensity == spectra[i].peaks[p].intensity);
    }
  }
}

TEST_CASE("MGF zero-peak spectrum round-trips to zero peaks") {
  Spectrum s;
  s.scan_id = "empty";
  s.precursor_mz = 444.4;
  const auto parsed = io::parse_mgf(io::write_mgf({s}));
  REQUIRE(parsed.size() == 1);
  CHECK(parsed[0].peaks.empty());
  CHECK(parsed[0].precursor_mz == 444.4);
}

TEST_CASE("mzML fixtures decode to the independently encoded arrays") {
  nlohmann::json expected;
  {
    std::ifstream in(data_path("mzml_expected.json"));
    REQUIRE(in.good());
    in >> expected;
  }
  for (const auto& name : {"two_arrays", "indexed", "zlib64"}) {
    const auto spectra = io::parse_mzml(io::read_file(data_path(std::string(name) + ".mzML")));
    const auto& exp = expected.at(name);
    REQUIRE(spectra.size() == exp.at("ids").size());
    for (std::size_t i = 0; i < spectra.size(); ++i) {
      CHECK(spectra[i].scan_id == exp.at("ids")[i].get<std::string>());
      CHECK(spectra[i].precursor_mz == exp.at("prec_mz")[i].get<double>());
      CHECK(spectra[i].precursor_charge == exp.at("charge")[i].get<int>());
      const auto& mz = exp.at("mz")[i];
      const auto& inten = exp.at("intensity")[i];
      REQUIRE(spectra[i].peaks.size() == mz.size());
      for (std::size_t p = 0; p < spectra[i].peaks.size(); ++p) {
        // bit-exact: encoded by an independent script, decoded here
        CHECK(spectra[i].peaks[p].mz == mz[p].get<double>());
        CHECK(spectra[i].peaks[p].intensity == inten[p].get<double>());
      }
    }
  }
}

TEST_CASE("mzML with zero spectra parses to empty") {
  CHECK(io::parse_mzml(io::read_file(data_path("empty.mzML"))).empty());
}

TEST_CASE("mzML corrupt base64 raises ParseError naming the spectrum") {
  try {
    io::parse_mzml(io::read_file(data_path("bad_base64.mzML")));
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("scan=1") != std::string::npos);
  }
}

TEST_CASE("mzML mismatched array lengths raise ParseError") {
  std::string xml = io::read_file(data_path("two_arrays.mzML"));
  // chop the intensity payload to one float by re-encoding: simpler to hand
  // the parser a file where the intensity array is empty
  const std::size_t ms2_at = xml.find("id=\"scan=1\"");
  REQUIRE(ms2_at != std::string::npos);
  const std::size_t from = xml.find("intensity array", ms2_at);
  REQUIRE(from != std::string::npos);
  const std::size_t bin_open = xml.find("<binary>", from);
  const std::size_t bin_close = xml.find("</binary>", from);
  REQUIRE(bin_open != std::string::npos);
  xml = xml.substr(0, bin_open + 8) + xml.substr(bin_close);
  CHECK_THROWS_AS(io::parse_mzml(xml), ParseError);
}

TEST_CASE("label TSV parse, join, and error paths") {
  const std::string tsv =
      "run_id\tscan_id\ttask\tlabel\n"
      "r1\ts1\tchimera\t1\n"
      "r1\ts2\tchimera\t0\n"
      "r1\ts1\tquality\t1\n";
  const auto records = io::read_labels(tsv);
  CHECK(records.size() == 3);

  std::vector<Spectrum> spectra(3);
  spectra[0].run_id = "r1";
  spectra[0].scan_id = "s1";
  spectra[1].run_id = "r1";
  spectra[1].scan_id = "s2";
  spectra[2].run_id = "r1";
  spectra[2].scan_id = "s3";
  const auto joined = io::join_labels(spectra, records, Task::chimera);
  REQUIRE(joined.size() == 2);
  CHECK(joined[0].second == 1);
  CHECK(joined[1].second == 0);

  CHECK_THROWS_AS(io::read_labels("run_id\tscan_id\ttask\tlabel\nr\ts\tquality\t2\n"), ParseError);
  CHECK_THROWS_AS(
      io::read_labels("run_id\tscan_id\ttask\tlabel\nr\ts\tquality\t1\nr\ts\tquality\t0\n"),
      DuplicateLabel);
  CHECK_THROWS_AS(io::read_labels("bad header\n"), ParseError);
}

TEST_CASE("embedding serialization is bit-exact") {
  io::EmbeddingMatrix m;
  m.n_rows = 2;
  m.dim = 3;
  m.data = {1.5f, -2.25f, 3.0e-8f, 0.0f, -0.0f, 42.0f};
  m.index = {{"r1", "s1"}, {"r1", "s2"}};

  const std::string bytes = io::serialize_embeddings(m);
  CHECK(bytes.size() == 16 + 24);
  const auto back = io::parse_embeddings(bytes);
  CHECK(back.n_rows == 2);
  CHECK(back.dim == 3);
  CHECK(std::memcmp(back.data.data(), m.data.data(), m.data.size() * sizeof(float)) == 0);

  io::EmbeddingMatrix round = back;
  io::parse_row_index(io::serialize_row_index(m), round);
  CHECK(round.index == m.index);
}

TEST_CASE("zero-row embedding file is exactly the 16-byte header") {
  io::EmbeddingMatrix m;
  m.n_rows = 0;
  m.dim = 512;
  const std::string bytes = io::serialize_embeddings(m);
  CHECK(bytes.size() == 16);
  const auto back = io::parse_embeddings(bytes);
  CHECK(back.dim == 512);
  CHECK(back.data.empty());
}

TEST_CASE("embedding format errors") {
  io::EmbeddingMatrix m;
  m.n_rows = 2;
  m.dim = 2;
  m.data = {1, 2, 3, 4};
  std::string bytes = io::serialize_embeddings(m);
  CHECK_THROWS_AS(io::parse_embeddings(bytes.substr(0, bytes.size() - 3)), FormatError);  // truncated mid-row
  std::string bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS(io::parse_embeddings(bad), FormatError);
}
