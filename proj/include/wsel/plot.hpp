#pragma once

// Minimal line plots as SVG. Output depends only on the data: fixed
// viewport, fixed number formatting, no timestamps.

#include "wsel/common.hpp"

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

namespace wsel::plot {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

struct Figure {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_x = false;
  std::vector<Series> series;
};

struct PlotError : ParameterError {
  using ParameterError::ParameterError;
};

namespace detail {

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

inline std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else if (c == '&') out += "&amp;";
    else out += c;
  }
  return out;
}

}  // namespace detail

constexpr int kWidth = 640;
constexpr int kHeight = 400;

inline std::string render_svg(const Figure& f) {
  if (f.series.empty()) throw PlotError("no series to plot");
  double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
  for (const auto& s : f.series) {
    if (s.x.empty() || s.x.size() != s.y.size()) throw PlotError("series '" + s.label + "' is empty or ragged");
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) throw PlotError("series '" + s.label + "' has non-finite data");
      if (f.log_x && s.x[i] <= 0) throw PlotError("log axis needs positive x");
      const double x = f.log_x ? std::log2(s.x[i]) : s.x[i];
      x0 = std::min(x0, x);
      x1 = std::max(x1, x);
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
  }
  y0 = std::min(y0, 0.0);
  if (x1 - x0 < 1e-12) {
    x0 -= 1;
    x1 += 1;
  }
  if (y1 - y0 < 1e-12) y1 = y0 + 1;
  const double L = 70, R = kWidth - 20, T = 40, B = kHeight - 50;
  auto px = [&](double x) { return L + (R - L) * ((f.log_x ? std::log2(x) : x) - x0) / (x1 - x0); };
  auto py = [&](double y) { return B - (B - T) * (y - y0) / (y1 - y0); };
  static const char* colours[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd"};

  std::string o;
  o += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"400\" viewBox=\"0 0 640 400\">\n";
  o += "<rect width=\"640\" height=\"400\" fill=\"white\"/>\n";
  o += "<text x=\"320\" y=\"22\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">" +
       detail::escape(f.title) + "</text>\n";
  o += "<line x1=\"" + detail::num(L) + "\" y1=\"" + detail::num(B) + "\" x2=\"" + detail::num(R) + "\" y2=\"" +
       detail::num(B) + "\" stroke=\"black\"/>\n";
  o += "<line x1=\"" + detail::num(L) + "\" y1=\"" + detail::num(T) + "\" x2=\"" + detail::num(L) + "\" y2=\"" +
       detail::num(B) + "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double yv = y0 + (y1 - y0) * k / 4;
    o += "<text x=\"" + detail::num(L - 6) + "\" y=\"" + detail::num(py(yv) + 4) +
         "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">" + detail::tick(yv) + "</text>\n";
  }
  // x ticks at the data points of the first series
  for (double xv : f.series.front().x)
    o += "<text x=\"" + detail::num(px(xv)) + "\" y=\"" + detail::num(B + 16) +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">" + detail::tick(xv) + "</text>\n";
  o += "<text x=\"" + detail::num((L + R) / 2) + "\" y=\"" + detail::num(kHeight - 10.0) +
       "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" + detail::escape(f.x_label) +
       "</text>\n";
  o += "<text x=\"16\" y=\"" + detail::num((T + B) / 2) + "\" transform=\"rotate(-90 16 " + detail::num((T + B) / 2) +
       ")\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" + detail::escape(f.y_label) +
       "</text>\n";
  for (std::size_t k = 0; k < f.series.size(); ++k) {
    const auto& s = f.series[k];
    const char* c = colours[k % 4];
    std::string pts;
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (i) pts += ' ';
      pts += detail::num(px(s.x[i])) + "," + detail::num(py(s.y[i]));
    }
    o += "<polyline fill=\"none\" stroke=\"" + std::string(c) + "\" stroke-width=\"2\" points=\"" + pts + "\"/>\n";
    for (std::size_t i = 0; i < s.x.size(); ++i)
      o += "<circle cx=\"" + detail::num(px(s.x[i])) + "\" cy=\"" + detail::num(py(s.y[i])) + "\" r=\"3\" fill=\"" + c +
           "\"/>\n";
    const double ly = T + 14.0 * static_cast<double>(k);
    o += "<text x=\"" + detail::num(R - 4) + "\" y=\"" + detail::num(ly) + "\" text-anchor=\"end\" fill=\"" + c +
         "\" font-family=\"sans-serif\" font-size=\"11\">" + detail::escape(s.label) + "</text>\n";
  }
  o += "</svg>\n";
  return o;
}

}  // namespace wsel::plot
