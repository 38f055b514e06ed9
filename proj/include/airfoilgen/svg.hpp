#pragma once

// Standalone SVG charts on a fixed 800×400 canvas. Coordinates are printed
// with fixed precision so identical data gives identical bytes.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "geometry.hpp"

namespace airfoilgen {

inline constexpr int kSvgWidth = 800;
inline constexpr int kSvgHeight = 400;

enum class SeriesStyle { kLine, kClosed, kMarkers };

struct SvgSeries {
  std::string label;
  std::vector<Point2> points;
  SeriesStyle style = SeriesStyle::kLine;
  int color = 0;  // palette index
};

struct SvgChart {
  std::string title;
  std::string x_label = "x";
  std::string y_label = "y";
  bool equal_aspect = false;
  std::vector<SvgSeries> series;
};

namespace detail {

inline const std::array<const char*, 10> kPalette = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                                     "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

inline std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

inline std::string escape_xml(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace detail

/// Renders the chart to a string. Throws on empty input.
inline std::string render_svg(const SvgChart& chart) {
  if (chart.series.empty()) throw DomainError("render_svg: no series");
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const SvgSeries& s : chart.series) {
    if (s.points.empty()) throw DomainError("render_svg: empty series '" + s.label + "'");
    for (const Point2& p : s.points) {
      if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw DomainError("render_svg: non-finite point");
      x0 = std::min(x0, p.x);
      x1 = std::max(x1, p.x);
      y0 = std::min(y0, p.y);
      y1 = std::max(y1, p.y);
    }
  }
  auto pad = [](double& lo, double& hi) {
    const double span = hi - lo;
    const double m = span > 0.0 ? 0.05 * span : std::max(1e-3, 0.05 * std::abs(lo));
    lo -= m;
    hi += m;
  };
  pad(x0, x1);
  pad(y0, y1);

  const double left = 70, right = kSvgWidth - 150, top = 40, bottom = kSvgHeight - 50;
  double sx = (right - left) / (x1 - x0), sy = (bottom - top) / (y1 - y0);
  if (chart.equal_aspect) {
    const double s = std::min(sx, sy);
    const double cx = 0.5 * (x0 + x1), cy = 0.5 * (y0 + y1);
    sx = sy = s;
    x0 = cx - 0.5 * (right - left) / s;
    x1 = cx + 0.5 * (right - left) / s;
    y0 = cy - 0.5 * (bottom - top) / s;
    y1 = cy + 0.5 * (bottom - top) / s;
  }
  auto px = [&](double x) { return left + (x - x0) * sx; };
  auto py = [&](double y) { return bottom - (y - y0) * sy; };

  std::string o;
  o += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  o += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"800\" height=\"400\" viewBox=\"0 0 800 400\">\n";
  o += "<rect x=\"0\" y=\"0\" width=\"800\" height=\"400\" fill=\"white\"/>\n";
  o += "<text x=\"400\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">" +
       detail::escape_xml(chart.title) + "</text>\n";
  o += "<rect x=\"70\" y=\"40\" width=\"580\" height=\"310\" fill=\"none\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double fx = x0 + (x1 - x0) * k / 4.0, fy = y0 + (y1 - y0) * k / 4.0;
    o += "<line x1=\"" + detail::fmt("%.2f", px(fx)) + "\" y1=\"350\" x2=\"" + detail::fmt("%.2f", px(fx)) +
         "\" y2=\"355\" stroke=\"black\"/>\n";
    o += "<text x=\"" + detail::fmt("%.2f", px(fx)) +
         "\" y=\"368\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" +
         detail::fmt("%.4g", fx) + "</text>\n";
    o += "<line x1=\"65\" y1=\"" + detail::fmt("%.2f", py(fy)) + "\" x2=\"70\" y2=\"" + detail::fmt("%.2f", py(fy)) +
         "\" stroke=\"black\"/>\n";
    o += "<text x=\"62\" y=\"" + detail::fmt("%.2f", py(fy) + 4) +
         "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" + detail::fmt("%.4g", fy) +
         "</text>\n";
  }
  o += "<text x=\"360\" y=\"392\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">" +
       detail::escape_xml(chart.x_label) + "</text>\n";
  o += "<text x=\"16\" y=\"195\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" "
       "transform=\"rotate(-90 16 195)\">" +
       detail::escape_xml(chart.y_label) + "</text>\n";
  o += "<clipPath id=\"plot\"><rect x=\"70\" y=\"40\" width=\"580\" height=\"310\"/></clipPath>\n";
  o += "<g clip-path=\"url(#plot)\">\n";
  for (const SvgSeries& s : chart.series) {
    const char* color = detail::kPalette[static_cast<std::size_t>(s.color) % detail::kPalette.size()];
    if (s.style == SeriesStyle::kMarkers) {
      for (const Point2& p : s.points)
        o += "<circle cx=\"" + detail::fmt("%.2f", px(p.x)) + "\" cy=\"" + detail::fmt("%.2f", py(p.y)) +
             "\" r=\"2\" fill=\"" + color + "\" fill-opacity=\"0.6\"/>\n";
      continue;
    }
    o += "<polyline fill=\"none\" stroke=\"";
    o += color;
    o += "\" stroke-width=\"1.2\" points=\"";
    for (std::size_t i = 0; i < s.points.size(); ++i) {
      if (i) o += ' ';
      o += detail::fmt("%.2f", px(s.points[i].x)) + "," + detail::fmt("%.2f", py(s.points[i].y));
    }
    o += "\"/>\n";
    if (s.style == SeriesStyle::kClosed && s.points.size() > 1) {
      const Point2 a = s.points.back(), b = s.points.front();
      o += "<line x1=\"" + detail::fmt("%.2f", px(a.x)) + "\" y1=\"" + detail::fmt("%.2f", py(a.y)) + "\" x2=\"" +
           detail::fmt("%.2f", px(b.x)) + "\" y2=\"" + detail::fmt("%.2f", py(b.y)) + "\" stroke=\"" + color +
           "\" stroke-width=\"1.2\"/>\n";
    }
  }
  o += "</g>\n";
  double ly = 50;
  for (const SvgSeries& s : chart.series) {
    if (s.label.empty()) continue;
    if (ly > 380) break;
    const char* color = detail::kPalette[static_cast<std::size_t>(s.color) % detail::kPalette.size()];
    o += "<rect x=\"662\" y=\"" + detail::fmt("%.0f", ly - 9) + "\" width=\"10\" height=\"10\" fill=\"" + color +
         "\"/>\n";
    o += "<text x=\"678\" y=\"" + detail::fmt("%.0f", ly) + "\" font-family=\"sans-serif\" font-size=\"11\">" +
         detail::escape_xml(s.label) + "</text>\n";
    ly += 16;
  }
  o += "</svg>\n";
  return o;
}

/// Writes the chart; nothing is created when the data is empty.
inline void plot_svg(const SvgChart& chart, const std::string& path) {
  const std::string body = render_svg(chart);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path);
  f << body;
  if (!f) throw IoError("write failed: " + path);
}

inline SvgChart profile_chart(const std::vector<Profile>& profiles, const std::string& title) {
  SvgChart c;
  c.title = title;
  c.equal_aspect = true;
  for (std::size_t i = 0; i < profiles.size(); ++i)
    c.series.push_back({"", profiles[i].points, SeriesStyle::kClosed, static_cast<int>(i)});
  return c;
}

inline SvgChart curve_chart(const std::vector<std::pair<std::string, std::vector<double>>>& curves,
                            const std::string& title, const std::string& x_label, const std::string& y_label) {
  SvgChart c;
  c.title = title;
  c.x_label = x_label;
  c.y_label = y_label;
  int k = 0;
  for (const auto& [name, ys] : curves) {
    SvgSeries s{name, {}, SeriesStyle::kLine, k++};
    for (std::size_t i = 0; i < ys.size(); ++i) s.points.push_back({static_cast<double>(i + 1), ys[i]});
    c.series.push_back(std::move(s));
  }
  return c;
}

}  // namespace airfoilgen
