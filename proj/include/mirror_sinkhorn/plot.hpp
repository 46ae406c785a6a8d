#pragma once

// SVG line plots of summary tables: the median as a line, p10..p90 as a
// shaded band, one panel per metric.

#include <filesystem>
#include <string>
#include <vector>

#include "mirror_sinkhorn/csv_io.hpp"

namespace mirror_sinkhorn {

struct PlotSeries {
  std::string label;
  CsvTable summary;  // columns x, <metric>_median and optionally _p10, _p90
};

struct PlotSpec {
  std::vector<std::string> metrics{"f_value"};
  std::string x_column = "t";
  std::string x_label = "t";
  bool log_x = true;
  bool log_y = true;
  std::string title;
  double panel_width = 420.0;
  double panel_height = 300.0;
};

// Throws ParseError when a metric column is missing or a series has no
// plottable point (NaN, or non-positive on a log axis).
std::string render_plot_svg(const std::vector<PlotSeries>& series, const PlotSpec& spec);

// Renders first, so nothing is written on error.
void emit_plot(const std::vector<PlotSeries>& series, const PlotSpec& spec, const std::filesystem::path& path);

}  // namespace mirror_sinkhorn
