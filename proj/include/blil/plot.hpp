#pragma once

// Line plots of CSV columns as SVG. Fixed viewport, fixed palette and fixed
// number formatting, so equal tables give byte-identical files.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "blil/csv.hpp"

namespace blil {

namespace detail {

inline std::string fmt_fixed(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string fmt_tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
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

}  // namespace detail

/// One polyline per y column against the x column. Rows with a non-finite x or y
/// break the line. Every column must exist; an empty table gives bare axes.
inline std::string render_svg(const CsvTable& t, const std::string& xcol, const std::vector<std::string>& ycols,
                              const std::string& title = "") {
  const auto xs = t.numeric(xcol);
  std::vector<std::vector<double>> ys;
  for (const auto& c : ycols) ys.push_back(t.numeric(c));

  constexpr double W = 640, H = 400, L = 70, R = 20, T = 30, B = 50;
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (!std::isfinite(xs[i])) continue;
    for (const auto& col : ys) {
      if (!std::isfinite(col[i])) continue;
      x0 = std::min(x0, xs[i]);
      x1 = std::max(x1, xs[i]);
      y0 = std::min(y0, col[i]);
      y1 = std::max(y1, col[i]);
    }
  }
  if (!(x0 <= x1)) {
    x0 = 0.0;
    x1 = 1.0;
    y0 = 0.0;
    y1 = 1.0;
  }
  if (x0 == x1) x1 = x0 + 1.0;
  if (y0 == y1) y1 = y0 + 1.0;
  auto px = [&](double x) { return L + (W - L - R) * (x - x0) / (x1 - x0); };
  auto py = [&](double y) { return H - B - (H - T - B) * (y - y0) / (y1 - y0); };
  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

  std::ostringstream os;
  using detail::fmt_fixed;
  using detail::fmt_tick;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
     << ' ' << H << "\">\n";
  os << "<rect x=\"0\" y=\"0\" width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
  os << "<path d=\"M" << L << ' ' << T << " V" << H - B << " H" << W - R
     << "\" fill=\"none\" stroke=\"black\"/>\n";
  auto text = [&](double x, double y, const std::string& anchor, const std::string& s) {
    os << "<text x=\"" << fmt_fixed(x) << "\" y=\"" << fmt_fixed(y) << "\" font-family=\"monospace\" font-size=\"11\""
       << " text-anchor=\"" << anchor << "\">" << detail::xml_escape(s) << "</text>\n";
  };
  for (int i = 0; i <= 4; ++i) {
    const double fx = x0 + (x1 - x0) * i / 4, fy = y0 + (y1 - y0) * i / 4;
    text(px(fx), H - B + 16, "middle", fmt_tick(fx));
    text(L - 6, py(fy) + 4, "end", fmt_tick(fy));
  }
  text(L + (W - L - R) / 2, H - 10, "middle", xcol);
  if (!title.empty()) text(L + (W - L - R) / 2, 18, "middle", title);
  for (std::size_t c = 0; c < ys.size(); ++c) {
    const char* colour = palette[c % std::size(palette)];
    std::string d;
    bool pen = false;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      if (!std::isfinite(xs[i]) || !std::isfinite(ys[c][i])) {
        pen = false;
        continue;
      }
      d += (pen ? " L" : (d.empty() ? "M" : " M")) + fmt_fixed(px(xs[i])) + ' ' + fmt_fixed(py(ys[c][i]));
      pen = true;
    }
    if (!d.empty()) os << "<path d=\"" << d << "\" fill=\"none\" stroke=\"" << colour << "\"/>\n";
    os << "<text x=\"" << fmt_fixed(W - R - 4) << "\" y=\"" << fmt_fixed(T + 14.0 * (c + 1))
       << "\" font-family=\"monospace\" font-size=\"11\" text-anchor=\"end\" fill=\"" << colour << "\">"
       << detail::xml_escape(ycols[c]) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace blil
