#pragma once

#include <string>
#include <vector>

namespace rbflow {

struct Series {
  std::string name;
  std::vector<double> x, y;
};

struct PlotOptions {
  std::string title;
  std::string x_label = "t";
  std::string y_label;
  bool log_y = false;    ///< nonpositive values are dropped
  bool scatter = false;  ///< markers instead of a polyline
  int width = 640, height = 400;
};

/// Standalone SVG document; byte-identical output for identical input.
/// Non-finite points are skipped, an empty series gives bare axes.
std::string svg_plot(const std::vector<Series>& series, const PlotOptions& opt);

}  // namespace rbflow
