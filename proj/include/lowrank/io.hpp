#pragma once

#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "lowrank/error.hpp"
#include "lowrank/ratfun.hpp"
#include "lowrank/simulate.hpp"

namespace lowrank {

using json = nlohmann::json;

/// Shortest decimal text that parses back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    fail(ErrorCode::io, "cannot parse number '" + std::string(s) + "'");
  return v;
}

// Transfer functions travel as ascending-z coefficient lists, the storage
// order of Poly: {"num": [c0, c1, ...], "den": [d0, d1, ...]} for
// (c0 + c1 z + ...) / (d0 + d1 z + ...). The zero function is {"num": [0], "den": [1]}.

inline json to_json(const Poly& p) { return p.is_zero() ? json::array({0.0}) : json(p.coeffs()); }

inline json to_json(const RatTF& w) { return json{{"num", to_json(w.num())}, {"den", to_json(w.den())}}; }

/// Parses a transfer function; problems are appended to `issues` (prefixed
/// by `where`) and the zero function is returned.
inline RatTF rattf_from_json(const json& j, const std::string& where, std::vector<std::string>& issues) {
  auto coeffs = [&](const char* key, std::vector<double>& out) {
    if (!j.is_object() || !j.contains(key)) {
      issues.push_back(where + "." + key + ": missing");
      return false;
    }
    const json& a = j.at(key);
    if (!a.is_array() || a.empty()) {
      issues.push_back(where + "." + key + ": expected a nonempty array of numbers");
      return false;
    }
    for (const auto& v : a) {
      if (!v.is_number()) {
        issues.push_back(where + "." + key + ": expected numbers");
        return false;
      }
      out.push_back(v.get<double>());
    }
    return true;
  };
  std::vector<double> num, den;
  const bool ok_n = coeffs("num", num);
  const bool ok_d = coeffs("den", den);
  if (!ok_n || !ok_d) return {};
  try {
    const Poly d(den);
    if (d.is_zero()) {
      issues.push_back(where + ".den: denominator is identically zero");
      return {};
    }
    return RatTF::reduce(Poly(num), d);
  } catch (const Error& e) {
    issues.push_back(where + ": " + e.what());
    return {};
  }
}

inline RatTF rattf_from_json(const json& j) {
  std::vector<std::string> issues;
  RatTF w = rattf_from_json(j, "transfer function", issues);
  if (!issues.empty()) fail(ErrorCode::invalid_input, issues.front());
  return w;
}

// ---------------------------------------------------------------------------
// CSV

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> columns;

  std::size_t rows() const { return columns.empty() ? 0 : columns.front().size(); }

  const std::vector<double>& column(const std::string& name) const {
    for (std::size_t k = 0; k < header.size(); ++k)
      if (header[k] == name) return columns[k];
    fail(ErrorCode::io, "CSV column '" + name + "' not found");
  }

  bool has(const std::string& name) const {
    for (const auto& h : header)
      if (h == name) return true;
    return false;
  }
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  for (auto& c : out) {
    while (!c.empty() && (c.back() == '\r' || c.back() == ' ')) c.pop_back();
    while (!c.empty() && c.front() == ' ') c.erase(c.begin());
  }
  return out;
}

/// Numeric CSV with a header row.
inline CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io, "cannot open '" + path + "' for reading");
  CsvTable t;
  std::string line;
  if (!std::getline(in, line)) fail(ErrorCode::io, "'" + path + "' is empty");
  t.header = split_csv_line(line);
  t.columns.assign(t.header.size(), {});
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != t.header.size())
      fail(ErrorCode::io, path + ":" + std::to_string(lineno) + ": expected " + std::to_string(t.header.size()) +
                              " fields, found " + std::to_string(cells.size()));
    for (std::size_t k = 0; k < cells.size(); ++k) t.columns[k].push_back(parse_double(cells[k]));
  }
  return t;
}

/// Row-oriented CSV writer; numbers use the shortest round-trip form.
class CsvWriter {
 public:
  explicit CsvWriter(const std::vector<std::string>& header) { row_strings(header); }

  void row_strings(const std::vector<std::string>& cells) {
    for (std::size_t k = 0; k < cells.size(); ++k) os_ << (k ? "," : "") << cells[k];
    os_ << '\n';
  }

  void row(const std::vector<double>& values) {
    for (std::size_t k = 0; k < values.size(); ++k) os_ << (k ? "," : "") << format_double(values[k]);
    os_ << '\n';
  }

  std::string str() const { return os_.str(); }

 private:
  std::ostringstream os_;
};

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::io, "cannot open '" + path + "' for writing");
  out << text;
  if (!out) fail(ErrorCode::io, "write to '" + path + "' failed");
}

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io, "cannot open '" + path + "' for reading");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

inline std::string series_csv(const std::vector<const TimeSeries*>& series) {
  std::vector<std::string> header{"t"};
  for (const auto* s : series) header.push_back(s->label);
  CsvWriter w(header);
  const std::size_t n = series.empty() ? 0 : series.front()->n();
  std::vector<double> row(series.size() + 1);
  for (std::size_t t = 0; t < n; ++t) {
    row[0] = static_cast<double>(t);
    for (std::size_t k = 0; k < series.size(); ++k) row[k + 1] = (*series[k])[t];
    w.row(row);
  }
  return w.str();
}

}  // namespace lowrank
