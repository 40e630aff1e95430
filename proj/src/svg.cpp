#include "rbflow/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace rbflow {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

std::string escape(const std::string& s) {
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

constexpr const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

}  // namespace

std::string svg_plot(const std::vector<Series>& series, const PlotOptions& opt) {
  const double left = 70, right = 20, top = 36, bottom = 46;
  const double w = opt.width - left - right, h = opt.height - top - bottom;

  std::vector<std::vector<std::pair<double, double>>> pts(series.size());
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (std::size_t s = 0; s < series.size(); ++s) {
    const auto& ser = series[s];
    for (std::size_t i = 0; i < std::min(ser.x.size(), ser.y.size()); ++i) {
      double y = ser.y[i];
      if (opt.log_y) {
        if (!(y > 0.0)) continue;
        y = std::log10(y);
      }
      if (!std::isfinite(ser.x[i]) || !std::isfinite(y)) continue;
      pts[s].emplace_back(ser.x[i], y);
      x0 = std::min(x0, ser.x[i]), x1 = std::max(x1, ser.x[i]);
      y0 = std::min(y0, y), y1 = std::max(y1, y);
    }
  }
  if (!(x0 <= x1)) x0 = 0.0, x1 = 1.0, y0 = 0.0, y1 = 1.0;
  if (x1 == x0) x0 -= 0.5, x1 += 0.5;
  if (y1 == y0) y0 -= 0.5, y1 += 0.5;
  auto px = [&](double x) { return left + (x - x0) / (x1 - x0) * w; };
  auto py = [&](double y) { return top + (1.0 - (y - y0) / (y1 - y0)) * h; };

  std::string o;
  o += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(opt.width) + "\" height=\"" +
       std::to_string(opt.height) + "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  o += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o += "<text x=\"" + fmt(left) + "\" y=\"20\" font-size=\"13\">" + escape(opt.title) + "</text>\n";
  o += "<rect x=\"" + fmt(left) + "\" y=\"" + fmt(top) + "\" width=\"" + fmt(w) + "\" height=\"" + fmt(h) +
       "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double fx = x0 + (x1 - x0) * i / 4.0, fy = y0 + (y1 - y0) * i / 4.0;
    o += "<text x=\"" + fmt(px(fx)) + "\" y=\"" + fmt(top + h + 16) + "\" text-anchor=\"middle\">" + label(fx) + "</text>\n";
    o += "<text x=\"" + fmt(left - 6) + "\" y=\"" + fmt(py(fy) + 4) + "\" text-anchor=\"end\">" +
         (opt.log_y ? "1e" + label(fy) : label(fy)) + "</text>\n";
  }
  o += "<text x=\"" + fmt(left + w / 2) + "\" y=\"" + fmt(opt.height - 8.0) + "\" text-anchor=\"middle\">" +
       escape(opt.x_label) + "</text>\n";
  o += "<text x=\"14\" y=\"" + fmt(top + h / 2) + "\" transform=\"rotate(-90 14 " + fmt(top + h / 2) +
       ")\" text-anchor=\"middle\">" + escape(opt.y_label) + "</text>\n";
  for (std::size_t s = 0; s < series.size(); ++s) {
    const std::string color = kColors[s % std::size(kColors)];
    if (opt.scatter) {
      for (auto [x, y] : pts[s])
        o += "<circle cx=\"" + fmt(px(x)) + "\" cy=\"" + fmt(py(y)) + "\" r=\"1.5\" fill=\"" + color + "\"/>\n";
    } else if (!pts[s].empty()) {
      o += "<polyline fill=\"none\" stroke=\"" + color + "\" stroke-width=\"1.5\" points=\"";
      for (std::size_t i = 0; i < pts[s].size(); ++i)
        o += (i ? " " : "") + fmt(px(pts[s][i].first)) + "," + fmt(py(pts[s][i].second));
      o += "\"/>\n";
    }
    o += "<text x=\"" + fmt(left + w - 4) + "\" y=\"" + fmt(top + 14 + 14.0 * s) + "\" text-anchor=\"end\" fill=\"" +
         color + "\">" + escape(series[s].name) + "</text>\n";
  }
  o += "</svg>\n";
  return o;
}

}  // namespace rbflow
