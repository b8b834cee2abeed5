#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "colearn/csv.hpp"
#include "colearn/error.hpp"

namespace colearn {

struct Series {
  std::string name;
  std::vector<std::pair<double, double>> points;  // (x, y), sorted by x
};

/// Collects (x, y) points per series value from a CSV table. Rows whose
/// `status` column is present and not "ok" are skipped. Series come back
/// in name order.
inline std::vector<Series> series_from_table(const CsvTable& table, const std::string& x_col,
                                             const std::string& y_col,
                                             const std::string& series_col) {
  const auto xi = table.column(x_col);
  const auto yi = table.column(y_col);
  const auto si = table.column(series_col);
  if (!xi) throw DataError("missing column '" + x_col + "'");
  if (!yi) throw DataError("missing column '" + y_col + "'");
  if (!si) throw DataError("missing column '" + series_col + "'");
  const auto status = table.column("status");

  std::map<std::string, Series> by_name;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const std::vector<std::string>& row = table.rows[r];
    if (status && row[*status] != "ok") continue;
    const auto x = parse_double(row[*xi]);
    const auto y = parse_double(row[*yi]);
    if (!x || !y || !std::isfinite(*x) || !std::isfinite(*y)) {
      throw DataError("row " + std::to_string(r + 2) + ": non-numeric value in '" + x_col +
                      "' or '" + y_col + "'");
    }
    Series& s = by_name[row[*si]];
    s.name = row[*si];
    s.points.emplace_back(*x, *y);
  }
  if (by_name.empty()) throw DataError("no data rows to plot");
  std::vector<Series> out;
  for (auto& [name, s] : by_name) {
    std::stable_sort(s.points.begin(), s.points.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    out.push_back(std::move(s));
  }
  return out;
}

namespace detail {

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

inline std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

inline std::pair<double, double> padded_range(double lo, double hi) {
  if (lo == hi) {
    const double pad = lo == 0.0 ? 1.0 : std::abs(lo) * 0.1;
    return {lo - pad, hi + pad};
  }
  return {lo, hi};
}

}  // namespace detail

/// Standalone 800x500 SVG line chart: one polyline and marker set per
/// series, ten tick intervals per axis, legend on the right.
inline std::string render_line_chart(const std::vector<Series>& series, const std::string& x_label,
                                     const std::string& y_label, const std::string& title = "") {
  constexpr double kWidth = 800, kHeight = 500;
  constexpr double kLeft = 80, kRight = 640, kTop = 50, kBottom = 430;
  constexpr int kTicks = 10;
  static const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                         "#9467bd", "#8c564b", "#e377c2", "#17becf"};

  double x_lo = INFINITY, x_hi = -INFINITY, y_lo = INFINITY, y_hi = -INFINITY;
  for (const Series& s : series) {
    for (const auto& [x, y] : s.points) {
      x_lo = std::min(x_lo, x);
      x_hi = std::max(x_hi, x);
      y_lo = std::min(y_lo, y);
      y_hi = std::max(y_hi, y);
    }
  }
  if (!std::isfinite(x_lo)) throw DataError("nothing to plot");
  std::tie(x_lo, x_hi) = detail::padded_range(x_lo, x_hi);
  std::tie(y_lo, y_hi) = detail::padded_range(y_lo, y_hi);
  const auto px = [&](double x) { return kLeft + (x - x_lo) / (x_hi - x_lo) * (kRight - kLeft); };
  const auto py = [&](double y) { return kBottom - (y - y_lo) / (y_hi - y_lo) * (kBottom - kTop); };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\">\n";
  svg << "<rect x=\"0\" y=\"0\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" fill=\"white\"/>\n";
  if (!title.empty()) {
    svg << "<text x=\"" << (kLeft + kRight) / 2 << "\" y=\"28\" text-anchor=\"middle\" "
        << "font-family=\"sans-serif\" font-size=\"16\">" << detail::xml_escape(title) << "</text>\n";
  }
  svg << "<g stroke=\"black\" stroke-width=\"1\">\n"
      << "<line x1=\"" << kLeft << "\" y1=\"" << kBottom << "\" x2=\"" << kRight << "\" y2=\""
      << kBottom << "\"/>\n"
      << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\""
      << kBottom << "\"/>\n</g>\n";

  svg << "<g font-family=\"sans-serif\" font-size=\"11\">\n";
  for (int i = 0; i <= kTicks; ++i) {
    const double f = static_cast<double>(i) / kTicks;
    const double xv = x_lo + f * (x_hi - x_lo), yv = y_lo + f * (y_hi - y_lo);
    const std::string xp = detail::fmt("%.2f", px(xv)), yp = detail::fmt("%.2f", py(yv));
    svg << "<line x1=\"" << xp << "\" y1=\"" << kBottom << "\" x2=\"" << xp << "\" y2=\""
        << kBottom + 5 << "\" stroke=\"black\"/>"
        << "<text x=\"" << xp << "\" y=\"" << kBottom + 18 << "\" text-anchor=\"middle\">"
        << detail::fmt("%.4g", xv) << "</text>\n";
    svg << "<line x1=\"" << kLeft - 5 << "\" y1=\"" << yp << "\" x2=\"" << kLeft << "\" y2=\"" << yp
        << "\" stroke=\"black\"/>"
        << "<text x=\"" << kLeft - 8 << "\" y=\"" << yp << "\" text-anchor=\"end\" "
        << "dominant-baseline=\"middle\">" << detail::fmt("%.4g", yv) << "</text>\n";
  }
  svg << "</g>\n";
  svg << "<text x=\"" << (kLeft + kRight) / 2 << "\" y=\"" << kBottom + 45
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">"
      << detail::xml_escape(x_label) << "</text>\n";
  svg << "<text x=\"20\" y=\"" << (kTop + kBottom) / 2 << "\" text-anchor=\"middle\" "
      << "font-family=\"sans-serif\" font-size=\"13\" transform=\"rotate(-90 20 "
      << (kTop + kBottom) / 2 << ")\">" << detail::xml_escape(y_label) << "</text>\n";

  for (std::size_t k = 0; k < series.size(); ++k) {
    const Series& s = series[k];
    const char* color = kPalette[k % std::size(kPalette)];
    if (s.points.size() > 1) {
      svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
      for (std::size_t i = 0; i < s.points.size(); ++i) {
        svg << (i ? " " : "") << detail::fmt("%.2f", px(s.points[i].first)) << ','
            << detail::fmt("%.2f", py(s.points[i].second));
      }
      svg << "\"/>\n";
    }
    for (const auto& [x, y] : s.points) {
      svg << "<circle cx=\"" << detail::fmt("%.2f", px(x)) << "\" cy=\"" << detail::fmt("%.2f", py(y))
          << "\" r=\"4\" fill=\"" << color << "\"/>\n";
    }
    const double ly = kTop + 10 + 22.0 * static_cast<double>(k);
    svg << "<line x1=\"" << kRight + 20 << "\" y1=\"" << ly << "\" x2=\"" << kRight + 50
        << "\" y2=\"" << ly << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>"
        << "<circle cx=\"" << kRight + 35 << "\" cy=\"" << ly << "\" r=\"4\" fill=\"" << color
        << "\"/>"
        << "<text x=\"" << kRight + 58 << "\" y=\"" << ly << "\" dominant-baseline=\"middle\" "
        << "font-family=\"sans-serif\" font-size=\"12\">" << detail::xml_escape(s.name)
        << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace colearn
