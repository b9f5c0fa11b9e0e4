// Copyright 2026 The hom-indist Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// CSV reading and writing for curves and histograms, with "# key=value"
// provenance lines ahead of the header row. Writes go to a temporary file
// that is renamed into place.

#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <unistd.h>

#include "hom/curve.hpp"
#include "hom/errors.hpp"
#include "hom/experiment_sim.hpp"

namespace hom::io {

using Metadata = std::map<std::string, std::string>;

/// Shortest text that reads back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("read failed: " + path.string());
  return ss.str();
}

inline void atomic_write(const std::filesystem::path& path, const std::string& text) {
  namespace fs = std::filesystem;
  const fs::path tmp = path.string() + ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot create " + tmp.string());
    out.write(text.data(), std::streamsize(text.size()));
    out.flush();
    if (!out) {
      std::error_code ec;
      fs::remove(tmp, ec);
      throw IoError("write failed: " + tmp.string());
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw IoError("cannot rename into " + path.string());
  }
}

struct CsvTable {
  Metadata meta;
  std::vector<std::string> header;
  std::vector<std::vector<double>> columns;
  std::vector<std::size_t> lines;  // source line of each row
  std::size_t header_line = 0;

  std::size_t rows() const { return columns.empty() ? 0 : columns.front().size(); }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto at = s.find(sep, start);
    out.push_back(trim(s.substr(start, at == std::string_view::npos ? std::string_view::npos : at - start)));
    if (at == std::string_view::npos) break;
    start = at + 1;
  }
  return out;
}

inline double parse_number(std::string_view s, std::size_t line) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw ParseError("not a number: '" + std::string(s) + "'", line);
  if (!std::isfinite(v)) throw ParseError("non-finite value", line);
  return v;
}

}  // namespace detail

/// Parses comment/metadata lines, a header row that must equal
/// `expected_header` when given, and numeric rows.
inline CsvTable parse_csv(const std::string& text, const std::vector<std::string>& expected_header = {}) {
  CsvTable t;
  std::size_t line_no = 0;
  bool have_header = false;
  std::istringstream in(text);
  std::string raw;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string_view line = detail::trim(raw);
    if (line.empty()) continue;
    if (line.front() == '#') {
      if (have_header) continue;
      const auto body = detail::trim(line.substr(1));
      const auto eq = body.find('=');
      if (eq != std::string_view::npos)
        t.meta[std::string(detail::trim(body.substr(0, eq)))] = std::string(detail::trim(body.substr(eq + 1)));
      continue;
    }
    const auto fields = detail::split(line, ',');
    if (!have_header) {
      t.header_line = line_no;
      for (auto f : fields) t.header.emplace_back(f);
      if (!expected_header.empty() && t.header != expected_header) {
        std::string want;
        for (const auto& h : expected_header) want += (want.empty() ? "" : ",") + h;
        throw ParseError("expected header '" + want + "', got '" + std::string(line) + "'", line_no);
      }
      t.columns.assign(t.header.size(), {});
      have_header = true;
      continue;
    }
    if (fields.size() != t.header.size())
      throw ParseError("expected " + std::to_string(t.header.size()) + " fields, got " +
                           std::to_string(fields.size()),
                       line_no);
    for (std::size_t k = 0; k < fields.size(); ++k) t.columns[k].push_back(detail::parse_number(fields[k], line_no));
    t.lines.push_back(line_no);
  }
  if (!have_header) throw ParseError("missing header row", line_no);
  if (t.rows() == 0) throw ParseError("no data rows", line_no);
  return t;
}

inline std::string metadata_block(const Metadata& meta) {
  std::string s;
  for (const auto& [k, v] : meta) s += "# " + k + "=" + v + "\n";
  return s;
}

inline CurveRegime regime_from_string(const std::string& s) {
  if (s == "cw") return CurveRegime::cw_normalized;
  if (s == "pulsed") return CurveRegime::pulsed_unnormalized;
  throw ValidationError("unknown regime '" + s + "'", "regime");
}

// ---- curves -----------------------------------------------------------

inline std::string curve_to_csv(const CorrelationCurve& c, Metadata meta = {}) {
  meta.emplace("regime", to_string(c.regime));
  for (const auto& [k, v] : c.labels) meta.emplace("label." + k, v);
  std::string s = metadata_block(meta) + "tau_s,value\n";
  for (std::size_t i = 0; i < c.size(); ++i) s += format_double(c.tau[i]) + "," + format_double(c.values[i]) + "\n";
  return s;
}

inline CorrelationCurve curve_from_csv(const std::string& text) {
  const CsvTable t = parse_csv(text, {"tau_s", "value"});
  CorrelationCurve c;
  c.tau = t.columns[0];
  c.values = t.columns[1];
  for (const auto& [k, v] : t.meta)
    if (k.rfind("label.", 0) == 0) c.labels[k.substr(6)] = v;
  if (auto it = t.meta.find("regime"); it != t.meta.end()) c.regime = regime_from_string(it->second);
  for (std::size_t i = 1; i < c.size(); ++i)
    if (!(c.tau[i] > c.tau[i - 1])) throw ParseError("tau_s must increase", t.lines[i]);
  try {
    c.validate();
  } catch (const ValidationError& e) {
    throw ParseError(e.what(), t.lines.back());
  }
  return c;
}

inline void write_curve(const std::filesystem::path& path, const CorrelationCurve& c, const Metadata& meta = {}) {
  atomic_write(path, curve_to_csv(c, meta));
}

inline CorrelationCurve read_curve(const std::filesystem::path& path) { return curve_from_csv(read_text(path)); }

// ---- histograms -------------------------------------------------------

/// Rows are bin centres; the bin width is the centre spacing.
inline std::string histogram_to_csv(const CoincidenceHistogram& h, Metadata meta = {}) {
  h.validate();
  meta.emplace("regime", to_string(h.regime));
  meta.emplace("seed", std::to_string(h.seed));
  meta.emplace("bin_width_s", format_double(h.bin_width()));
  meta.emplace("normalization",
               h.normalization == CoincidenceHistogram::Normalization::raw ? "raw" : "asymptote_normalized");
  for (const auto& [k, v] : h.labels) meta.emplace("label." + k, v);
  std::string s = metadata_block(meta) + "tau_s,counts\n";
  const auto centres = h.centers();
  for (std::size_t i = 0; i < h.size(); ++i) s += format_double(centres[i]) + "," + std::to_string(h.counts[i]) + "\n";
  return s;
}

inline CoincidenceHistogram histogram_from_csv(const std::string& text) {
  const CsvTable t = parse_csv(text, {"tau_s", "counts"});
  const auto& tau = t.columns[0];
  if (tau.size() < 2) throw ParseError("histogram needs at least two bins", t.lines.front());
  CoincidenceHistogram h;
  for (std::size_t i = 0; i < tau.size(); ++i) {
    const double c = t.columns[1][i];
    if (c < 0.0 || c != std::floor(c) || c > 9.0e15) throw ParseError("counts must be non-negative integers", t.lines[i]);
    h.counts.push_back(std::int64_t(c));
    h.total_counts += h.counts.back();
    if (i > 0 && !(tau[i] > tau[i - 1])) throw ParseError("tau_s must increase", t.lines[i]);
  }
  const double w = (tau.back() - tau.front()) / double(tau.size() - 1);
  for (std::size_t i = 1; i < tau.size(); ++i)
    if (std::abs(tau[i] - tau[i - 1] - w) > 1e-6 * w) throw ParseError("bins must be uniform", t.lines[i]);
  h.bin_edges.resize(tau.size() + 1);
  for (std::size_t i = 0; i <= tau.size(); ++i) h.bin_edges[i] = tau.front() + (double(i) - 0.5) * w;
  for (const auto& [k, v] : t.meta) {
    if (k.rfind("label.", 0) == 0) h.labels[k.substr(6)] = v;
    else if (k == "regime") h.regime = regime_from_string(v);
    else if (k == "seed") h.seed = std::uint64_t(std::stoull(v));
    else if (k == "normalization" && v == "asymptote_normalized")
      h.normalization = CoincidenceHistogram::Normalization::asymptote_normalized;
  }
  return h;
}

inline void write_histogram(const std::filesystem::path& path, const CoincidenceHistogram& h,
                            const Metadata& meta = {}) {
  atomic_write(path, histogram_to_csv(h, meta));
}

inline CoincidenceHistogram read_histogram(const std::filesystem::path& path) {
  return histogram_from_csv(read_text(path));
}

/// Either CSV kind: "counts" files become histograms, "value" files curves.
inline bool is_histogram_csv(const std::string& text) {
  const CsvTable t = parse_csv(text);
  if (t.header == std::vector<std::string>{"tau_s", "counts"}) return true;
  if (t.header == std::vector<std::string>{"tau_s", "value"}) return false;
  throw ParseError("header must be 'tau_s,value' or 'tau_s,counts'", t.header_line);
}

/// Generic table with named numeric columns.
inline std::string table_to_csv(const std::vector<std::string>& header, const std::vector<std::vector<double>>& rows,
                                const Metadata& meta = {}) {
  std::string s = metadata_block(meta);
  for (std::size_t k = 0; k < header.size(); ++k) s += (k ? "," : "") + header[k];
  s += "\n";
  for (const auto& r : rows) {
    if (r.size() != header.size()) throw std::invalid_argument("table_to_csv: row width mismatch");
    for (std::size_t k = 0; k < r.size(); ++k) s += (k ? "," : "") + format_double(r[k]);
    s += "\n";
  }
  return s;
}

}  // namespace hom::io
