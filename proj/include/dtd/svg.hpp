#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "dtd/csv.hpp"
#include "dtd/error.hpp"
#include "dtd/metrics.hpp"

namespace dtd {

enum class XAxis { comm_round, samples };

inline XAxis x_axis_from_string(const std::string& s) {
  if (s == "comm_round" || s == "rounds") return XAxis::comm_round;
  if (s == "samples") return XAxis::samples;
  throw ConfigError("unknown x axis '" + s + "' (comm_round or samples)");
}

struct PlotAxes {
  XAxis x = XAxis::comm_round;
  Metric y = Metric::objective_error;
  bool log_y = false;
  double log_floor = 1e-12;  // log-y values at or below this are drawn at the floor
  std::string title;
};

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

/// One curve per CSV: its mean rows (trial -1) when present, otherwise the
/// per-round average over whatever trials it holds.
inline Series series_from_rows(const std::vector<MetricsRow>& rows, const PlotAxes& axes, std::string label) {
  const bool has_mean = std::any_of(rows.begin(), rows.end(), [](const auto& r) { return r.trial == -1; });
  std::map<std::size_t, std::pair<double, std::size_t>> acc;  // x -> (sum, count)
  for (const auto& r : rows) {
    if (has_mean && r.trial != -1) continue;
    const double v = metric_value(r, axes.y);
    if (std::isnan(v)) continue;
    const std::size_t x = axes.x == XAxis::comm_round ? r.comm_round : r.samples;
    auto& slot = acc[x];
    slot.first += v;
    slot.second += 1;
  }
  Series s;
  s.label = std::move(label);
  for (const auto& [x, sc] : acc) {
    s.x.push_back(static_cast<double>(x));
    s.y.push_back(sc.first / static_cast<double>(sc.second));
  }
  return s;
}

namespace detail {

inline std::string fmt(double v, const char* f = "%.2f") {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

inline std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

inline constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                           "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

}  // namespace detail

/// Deterministic SVG line chart: identical input gives identical bytes.
inline std::string render_svg(const std::vector<Series>& series, const PlotAxes& axes) {
  constexpr double W = 720, H = 440, left = 80, right = 180, top = 40, bottom = 60;
  const double pw = W - left - right, ph = H - top - bottom;

  bool clamped = false;
  auto ty = [&](double v) {
    if (!axes.log_y) return v;
    if (v <= axes.log_floor) {
      clamped = true;
      v = axes.log_floor;
    }
    return std::log10(v);
  };
  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin, ymin = xmin, ymax = -xmin;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      xmin = std::min(xmin, s.x[i]);
      xmax = std::max(xmax, s.x[i]);
      const double y = ty(s.y[i]);
      ymin = std::min(ymin, y);
      ymax = std::max(ymax, y);
    }
  }
  if (!std::isfinite(xmin)) xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  if (xmax == xmin) xmax = xmin + 1;
  if (ymax == ymin) ymin -= 0.5, ymax += 0.5;
  const double pad = 0.05 * (ymax - ymin);
  ymin -= pad;
  ymax += pad;
  auto px = [&](double x) { return left + (x - xmin) / (xmax - xmin) * pw; };
  auto py = [&](double y) { return top + (ymax - y) / (ymax - ymin) * ph; };

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
    << ' ' << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (!axes.title.empty()) {
    o << "<text x=\"" << detail::fmt(left + pw / 2) << "\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">"
      << detail::xml_escape(axes.title) << "</text>\n";
  }
  o << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
    << "\" fill=\"none\" stroke=\"black\"/>\n";
  constexpr int ticks = 5;
  for (int i = 0; i <= ticks; ++i) {
    const double xv = xmin + (xmax - xmin) * i / ticks;
    const double yv = ymin + (ymax - ymin) * i / ticks;
    o << "<line x1=\"" << detail::fmt(px(xv)) << "\" y1=\"" << top + ph << "\" x2=\"" << detail::fmt(px(xv))
      << "\" y2=\"" << top + ph + 5 << "\" stroke=\"black\"/>\n";
    o << "<text x=\"" << detail::fmt(px(xv)) << "\" y=\"" << top + ph + 20 << "\" text-anchor=\"middle\">"
      << detail::fmt(xv, "%.6g") << "</text>\n";
    o << "<line x1=\"" << left - 5 << "\" y1=\"" << detail::fmt(py(yv)) << "\" x2=\"" << left << "\" y2=\""
      << detail::fmt(py(yv)) << "\" stroke=\"black\"/>\n";
    const double label = axes.log_y ? std::pow(10.0, yv) : yv;
    o << "<text x=\"" << left - 8 << "\" y=\"" << detail::fmt(py(yv) + 4) << "\" text-anchor=\"end\">"
      << detail::fmt(label, "%.4g") << "</text>\n";
  }
  o << "<text x=\"" << detail::fmt(left + pw / 2) << "\" y=\"" << H - 15 << "\" text-anchor=\"middle\">"
    << (axes.x == XAxis::comm_round ? "communication rounds" : "samples") << "</text>\n";
  o << "<text x=\"20\" y=\"" << detail::fmt(top + ph / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 20 "
    << detail::fmt(top + ph / 2) << ")\">" << to_string(axes.y) << (axes.log_y ? " (log)" : "") << "</text>\n";

  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* color = detail::kPalette[k % std::size(detail::kPalette)];
    o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (i > 0) o << ' ';
      o << detail::fmt(px(s.x[i])) << ',' << detail::fmt(py(ty(s.y[i])));
    }
    o << "\"/>\n";
    const double ly = top + 10 + 18.0 * static_cast<double>(k);
    o << "<line x1=\"" << left + pw + 15 << "\" y1=\"" << detail::fmt(ly) << "\" x2=\"" << left + pw + 40
      << "\" y2=\"" << detail::fmt(ly) << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    o << "<text x=\"" << left + pw + 45 << "\" y=\"" << detail::fmt(ly + 4) << "\">" << detail::xml_escape(s.label)
      << "</text>\n";
  }
  if (clamped) {
    o << "<text x=\"" << left + 5 << "\" y=\"" << top + ph - 6 << "\" font-size=\"10\" fill=\"#555\">values &lt;= "
      << detail::fmt(axes.log_floor, "%.3g") << " clamped to the floor</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

/// Reads each CSV, labels it by file stem unless labels are given, writes the SVG.
inline void render_plot(const std::vector<std::filesystem::path>& csvs, const PlotAxes& axes,
                        const std::filesystem::path& out, const std::vector<std::string>& labels = {}) {
  if (csvs.empty()) throw ConfigError("plot: no input CSVs");
  if (!labels.empty() && labels.size() != csvs.size()) throw ConfigError("plot: one label per CSV required");
  if (axes.log_y && !(axes.log_floor > 0.0)) throw ConfigError("plot: log floor must be > 0");
  std::vector<Series> series;
  for (std::size_t i = 0; i < csvs.size(); ++i) {
    series.push_back(series_from_rows(read_csv(csvs[i]), axes, labels.empty() ? csvs[i].stem().string() : labels[i]));
  }
  if (out.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(out.parent_path(), ec);
    if (ec) throw IoError(out.parent_path().string() + ": " + ec.message());
  }
  std::ofstream f(out, std::ios::binary);
  if (!f) throw IoError(out.string() + ": cannot open for writing");
  f << render_svg(series, axes);
  if (!f) throw IoError(out.string() + ": write failed");
}

}  // namespace dtd
