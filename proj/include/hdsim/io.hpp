#pragma once

#include <json.hpp>

#include <charconv>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "hdsim/errors.hpp"
#include "hdsim/linalg.hpp"
#include "hdsim/margins.hpp"

namespace hdsim::io {

/// Shortest decimal string that parses back to exactly `v`.
inline std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '"')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r' || s.back() == '"')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split(std::string_view line, char sep = ',') {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline bool is_missing(std::string_view s) { return s.empty() || s == "NA" || s == "NaN" || s == "nan" || s == "."; }

inline double parse_double(std::string_view s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw DataError("cannot parse '" + std::string(s) + "' as a number");
  return v;
}

inline std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "' for reading");
  return in;
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  return out;
}

// ---------------------------------------------------------------------------
// Matrix CSV: headerless, one row per line.

inline Matrix read_matrix_csv(std::istream& in) {
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    std::vector<double> row;
    for (auto field : split(line)) row.push_back(parse_double(field));
    if (!rows.empty() && row.size() != rows.front().size()) throw DataError("matrix CSV rows differ in length");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw DataError("matrix CSV is empty");
  Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  return m;
}

inline Matrix read_matrix_csv(const std::string& path) {
  auto in = open_in(path);
  return read_matrix_csv(in);
}

inline void write_matrix_csv(std::ostream& out, const Matrix& m) {
  std::string line;
  for (Index i = 0; i < m.rows(); ++i) {
    line.clear();
    for (Index j = 0; j < m.cols(); ++j) {
      if (j) line += ',';
      line += format_double(m(i, j));
    }
    line += '\n';
    out << line;
  }
}

inline void write_matrix_csv(const std::string& path, const Matrix& m) {
  auto out = open_out(path);
  write_matrix_csv(out, m);
}

// ---------------------------------------------------------------------------
// Data CSV: header row, one observation per row. Rows with a missing field
// are dropped and counted.

struct DataTable {
  std::vector<std::string> names;
  Matrix values;
  std::size_t dropped_rows = 0;

  Index column(std::string_view name) const {
    for (std::size_t j = 0; j < names.size(); ++j)
      if (names[j] == name) return static_cast<Index>(j);
    throw DataError("no column named '" + std::string(name) + "'");
  }
};

inline DataTable read_data_csv(std::istream& in) {
  DataTable t;
  std::string line;
  if (!std::getline(in, line)) throw DataError("data CSV is empty");
  for (auto name : split(line)) t.names.emplace_back(name);
  std::vector<double> flat;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const auto fields = split(line);
    if (fields.size() != t.names.size()) throw DataError("data CSV row " + std::to_string(rows + t.dropped_rows + 2) + " has the wrong number of fields");
    bool missing = false;
    for (auto f : fields) missing = missing || is_missing(f);
    if (missing) {
      ++t.dropped_rows;
      continue;
    }
    for (auto f : fields) flat.push_back(parse_double(f));
    ++rows;
  }
  const auto d = static_cast<Index>(t.names.size());
  t.values.resize(static_cast<Index>(rows), d);
  for (std::size_t i = 0; i < rows; ++i)
    for (Index j = 0; j < d; ++j) t.values(static_cast<Index>(i), j) = flat[i * static_cast<std::size_t>(d) + static_cast<std::size_t>(j)];
  return t;
}

inline DataTable read_data_csv(const std::string& path) {
  auto in = open_in(path);
  return read_data_csv(in);
}

inline void write_data_csv(std::ostream& out, const Matrix& data, const std::vector<std::string>& names) {
  std::string line;
  for (Index j = 0; j < data.cols(); ++j) {
    if (j) line += ',';
    line += static_cast<std::size_t>(j) < names.size() ? names[static_cast<std::size_t>(j)] : "V" + std::to_string(j + 1);
  }
  out << line << '\n';
  write_matrix_csv(out, data);
}

inline void write_data_csv(const std::string& path, const Matrix& data, const std::vector<std::string>& names) {
  auto out = open_out(path);
  write_data_csv(out, data, names);
}

// ---------------------------------------------------------------------------
// JSON

inline nlohmann::json read_json(const std::string& path) {
  auto in = open_in(path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("'" + path + "' is not valid JSON: " + e.what());
  }
}

inline void write_json(const std::string& path, const nlohmann::json& j) {
  auto out = open_out(path);
  out << j.dump(2) << '\n';
}

inline std::vector<MarginSpec> margins_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw DataError("margins document must be a JSON array");
  std::vector<MarginSpec> out;
  out.reserve(j.size());
  for (const auto& item : j) out.push_back(margin_from_json(item));
  return out;
}

inline nlohmann::json margins_to_json(const std::vector<MarginSpec>& margins) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& m : margins) j.push_back(m);
  return j;
}

}  // namespace hdsim::io
