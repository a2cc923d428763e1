// Copyright 2026 The mtpdhg Authors
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

// File formats: CSV traces and ledgers, flat key=value configs, LIBSVM data
// and JSON output.

#pragma once

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mtpdhg/metrics.hpp"
#include "mtpdhg/simnet.hpp"

namespace mtpdhg {

using Json = nlohmann::json;

/// Shortest round-trip decimal, independent of the C locale.
inline std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  if (ec != std::errc()) throw Error("format_double: conversion failed");
  return std::string(buf, end);
}

inline double parse_double(const std::string& text, const std::string& context) {
  if (text == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (text == "inf") return std::numeric_limits<double>::infinity();
  if (text == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  const char* first = text.data();
  const char* last = first + text.size();
  if (!text.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || first == last) {
    throw InvalidArgument(context + ": '" + text + "' is not a number");
  }
  return v;
}

inline std::ofstream open_output(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  return out;
}

// ---- CSV ----------------------------------------------------------------

inline const std::vector<std::string>& trace_fixed_columns() {
  static const std::vector<std::string> cols{"k",       "primal_value",        "gap_sup",  "violation",
                                             "kkt",     "consensus_violation", "cum_cost", "wall_seconds"};
  return cols;
}

/// Header, then one row per MetricRow: fixed columns, rounds_<s>, extras.
inline void write_trace_csv(std::ostream& out, const std::vector<MetricRow>& trace) {
  const std::size_t S = trace.empty() ? 0 : trace.front().rounds.size();
  std::vector<std::string> extras;
  if (!trace.empty())
    for (const auto& [name, v] : trace.front().extra) extras.push_back(name);
  const auto& fixed = trace_fixed_columns();
  for (std::size_t i = 0; i < fixed.size(); ++i) out << (i ? "," : "") << fixed[i];
  for (std::size_t s = 0; s < S; ++s) out << ",rounds_" << s;
  for (const auto& e : extras) out << "," << e;
  out << "\n";
  for (const auto& row : trace) {
    require(row.rounds.size() == S, "write_trace_csv: rows disagree on the number of blocks");
    require(row.extra.size() == extras.size(), "write_trace_csv: rows disagree on extra columns");
    out << row.k;
    for (std::size_t i = 1; i < fixed.size(); ++i) out << "," << format_double(row.column(fixed[i]));
    for (long r : row.rounds) out << "," << r;
    for (std::size_t i = 0; i < extras.size(); ++i) {
      require(row.extra[i].first == extras[i], "write_trace_csv: extra columns out of order");
      out << "," << format_double(row.extra[i].second);
    }
    out << "\n";
  }
}

inline void write_trace_csv(const std::filesystem::path& path, const std::vector<MetricRow>& trace) {
  auto out = open_output(path);
  write_trace_csv(out, trace);
}

inline void write_ledger_csv(std::ostream& out, const MessageLedger& ledger) {
  out << "iter,block,rounds,msgs,payload_scalars,iter_cost,cum_cost\n";
  for (const auto& r : ledger.rows()) {
    out << r.iter << "," << r.block << "," << r.rounds << "," << r.msgs << "," << r.payload_scalars << ","
        << format_double(r.iter_cost) << "," << format_double(r.cum_cost) << "\n";
  }
}

inline void write_ledger_csv(const std::filesystem::path& path, const MessageLedger& ledger) {
  auto out = open_output(path);
  write_ledger_csv(out, ledger);
}

/// A numeric CSV table (header + rows).
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  std::size_t column_index(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw InvalidArgument("csv: no column '" + name + "'");
  }
  std::vector<double> column(const std::string& name) const {
    const std::size_t i = column_index(name);
    std::vector<double> out;
    for (const auto& r : rows) out.push_back(r[i]);
    return out;
  }
};

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

inline CsvTable read_csv(std::istream& in) {
  CsvTable t;
  std::string line;
  if (!std::getline(in, line)) throw InvalidArgument("csv: empty input");
  t.header = split(line, ',');
  long lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto cells = split(line, ',');
    if (cells.size() != t.header.size()) {
      throw InvalidArgument("csv line " + std::to_string(lineno) + ": expected " + std::to_string(t.header.size()) +
                            " cells, got " + std::to_string(cells.size()));
    }
    std::vector<double> row;
    for (const auto& c : cells) row.push_back(parse_double(c, "csv line " + std::to_string(lineno)));
    t.rows.push_back(std::move(row));
  }
  return t;
}

inline CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  return read_csv(in);
}

// ---- key=value configs ----------------------------------------------------

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

/// Flat `key = value` lines; '#' starts a comment; keys must be unique.
inline std::map<std::string, std::string> parse_key_value(std::istream& in) {
  std::map<std::string, std::string> out;
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw InvalidArgument("config line " + std::to_string(lineno) + ": expected key=value");
    }
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw InvalidArgument("config line " + std::to_string(lineno) + ": empty key");
    if (!out.emplace(key, trim(line.substr(eq + 1))).second) {
      throw InvalidArgument("config line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
    }
  }
  return out;
}

inline std::map<std::string, std::string> load_key_value(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config '" + path.string() + "'");
  return parse_key_value(in);
}

// ---- LIBSVM ---------------------------------------------------------------

struct SvmData {
  /// One sample per row.
  SparseMatrix features;
  /// +1 / -1.
  Vector labels;

  Index samples() const { return features.rows(); }
  Index dim() const { return features.cols(); }
};

/// `label idx:val ...` with 1-based ascending indices. Labels 1/+1 map to
/// +1 and 0/-1 to -1. `dim` pads the feature count (0 = max index seen).
inline SvmData libsvm_parse(std::istream& in, bool normalize, Index dim = 0) {
  std::vector<Eigen::Triplet<double>> trips;
  std::vector<double> labels;
  std::string line;
  long lineno = 0;
  Index max_index = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string ctx = "libsvm line " + std::to_string(lineno);
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    std::istringstream tok(line);
    std::string label_text;
    if (!(tok >> label_text)) continue;
    const double lab = parse_double(label_text, ctx + " label");
    double label;
    if (lab == 1.0) {
      label = 1.0;
    } else if (lab == -1.0 || lab == 0.0) {
      label = -1.0;
    } else {
      throw InvalidArgument(ctx + ": label must be -1, 0, 1 or +1, got '" + label_text + "'");
    }
    const Index row = static_cast<Index>(labels.size());
    std::vector<std::pair<Index, double>> entries;
    std::string pair;
    Index last = 0;
    while (tok >> pair) {
      const auto colon = pair.find(':');
      if (colon == std::string::npos) throw InvalidArgument(ctx + ": expected idx:val, got '" + pair + "'");
      const std::string idx_text = pair.substr(0, colon);
      long idx = 0;
      auto [p, ec] = std::from_chars(idx_text.data(), idx_text.data() + idx_text.size(), idx);
      if (ec != std::errc() || p != idx_text.data() + idx_text.size() || idx < 1) {
        throw InvalidArgument(ctx + ": bad feature index '" + idx_text + "'");
      }
      if (idx <= last) throw InvalidArgument(ctx + ": feature indices must be strictly increasing");
      last = idx;
      const double v = parse_double(pair.substr(colon + 1), ctx);
      if (!std::isfinite(v)) throw InvalidArgument(ctx + ": non-finite feature value");
      entries.emplace_back(Index(idx - 1), v);
      max_index = std::max(max_index, Index(idx));
    }
    double scale = 1.0;
    if (normalize) {
      double sq = 0.0;
      for (const auto& e : entries) sq += e.second * e.second;
      if (sq > 0.0) scale = 1.0 / std::sqrt(sq);
    }
    for (const auto& [j, v] : entries) trips.emplace_back(row, j, v * scale);
    labels.push_back(label);
  }
  if (dim == 0) dim = max_index;
  require(dim >= max_index, "libsvm: feature index exceeds the requested dimension");
  SvmData d;
  d.features.resize(static_cast<Index>(labels.size()), dim);
  d.features.setFromTriplets(trips.begin(), trips.end());
  d.features.makeCompressed();
  d.labels = Eigen::Map<const Vector>(labels.data(), static_cast<Index>(labels.size()));
  return d;
}

inline SvmData libsvm_load(const std::filesystem::path& path, bool normalize, Index dim = 0) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open data file '" + path.string() + "'");
  return libsvm_parse(in, normalize, dim);
}

inline void libsvm_write(std::ostream& out, const SvmData& data) {
  for (Index r = 0; r < data.samples(); ++r) {
    out << (data.labels[r] > 0 ? "+1" : "-1");
    for (SparseMatrix::InnerIterator it(data.features, r); it; ++it) {
      out << " " << (it.col() + 1) << ":" << format_double(it.value());
    }
    out << "\n";
  }
}

inline void libsvm_save(const std::filesystem::path& path, const SvmData& data) {
  auto out = open_output(path);
  libsvm_write(out, data);
}

// ---- JSON -----------------------------------------------------------------

inline Json to_json(const std::vector<double>& v) {
  Json j = Json::array();
  for (double x : v) j.push_back(std::isfinite(x) ? Json(x) : Json(nullptr));
  return j;
}

inline Json finite_or_null(double x) { return std::isfinite(x) ? Json(x) : Json(nullptr); }

inline void write_json(const std::filesystem::path& path, const Json& j) {
  auto out = open_output(path);
  out << j.dump(2) << "\n";
}

}  // namespace mtpdhg
