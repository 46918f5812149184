#pragma once

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "dtd/error.hpp"
#include "dtd/metrics.hpp"

namespace dtd {

inline constexpr const char* kCsvHeader = "trial,comm_round,samples,objective_error,msbe,consensus_error,q_norm";

/// 17 significant digits; NaN (metric not computed) becomes an empty field.
inline std::string format_double(double v) {
  if (std::isnan(v)) return {};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string csv_line(const MetricsRow& r) {
  std::string line = std::to_string(r.trial);
  line += ',' + std::to_string(r.comm_round);
  line += ',' + std::to_string(r.samples);
  for (double v : {r.objective_error, r.msbe, r.consensus_error, r.q_norm}) {
    line += ',';
    line += format_double(v);
  }
  return line;
}

inline void write_csv(const std::vector<MetricsRow>& rows, std::ostream& out) {
  out << kCsvHeader << '\n';
  for (const auto& r : rows) out << csv_line(r) << '\n';
}

inline void write_csv(const std::vector<MetricsRow>& rows, const std::filesystem::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw IoError(path.parent_path().string() + ": " + ec.message());
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(path.string() + ": cannot open for writing: " + std::strerror(errno));
  write_csv(rows, out);
  out.flush();
  if (!out) throw IoError(path.string() + ": write failed");
}

namespace detail {

inline std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline double parse_metric(const std::string& s, const std::string& where) {
  if (s.empty()) return std::numeric_limits<double>::quiet_NaN();
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size()) throw IoError(where + ": bad number '" + s + "'");
  return v;
}

inline long long parse_integer(const std::string& s, const std::string& where) {
  char* end = nullptr;
  const long long v = std::strtoll(s.c_str(), &end, 10);
  if (s.empty() || end != s.c_str() + s.size()) throw IoError(where + ": bad integer '" + s + "'");
  return v;
}

}  // namespace detail

inline std::vector<MetricsRow> read_csv(std::istream& in, const std::string& name = "<stream>") {
  std::string line;
  if (!std::getline(in, line)) throw IoError(name + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kCsvHeader) throw IoError(name + ": unexpected header '" + line + "'");
  std::vector<MetricsRow> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::string where = name + ":" + std::to_string(lineno);
    const auto f = detail::split_fields(line);
    if (f.size() != 7) throw IoError(where + ": expected 7 fields, got " + std::to_string(f.size()));
    MetricsRow r;
    r.trial = detail::parse_integer(f[0], where);
    const auto round = detail::parse_integer(f[1], where);
    const auto samples = detail::parse_integer(f[2], where);
    if (round < 0 || samples < 0) throw IoError(where + ": negative round or sample count");
    r.comm_round = static_cast<std::size_t>(round);
    r.samples = static_cast<std::size_t>(samples);
    r.objective_error = detail::parse_metric(f[3], where);
    r.msbe = detail::parse_metric(f[4], where);
    r.consensus_error = detail::parse_metric(f[5], where);
    r.q_norm = detail::parse_metric(f[6], where);
    rows.push_back(r);
  }
  return rows;
}

inline std::vector<MetricsRow> read_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string() + ": cannot open for reading");
  return read_csv(in, path.string());
}

}  // namespace dtd
