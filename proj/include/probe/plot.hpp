#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "probe/evaluation.hpp"
#include "probe/importance.hpp"

namespace probe {

struct Series {
  std::string label;
  std::vector<std::pair<double, double>> points;
};

struct LinePlot {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;
};

// Static SVG line chart with axes, ticks and a legend.
std::string render_svg(const LinePlot& plot);

// C_level and I_level against realized CDDI, one pair of lines per mode.
LinePlot accuracy_plot(std::span<const EvaluationReport> reports);

// Mean constraint weight against constraint position, one line per CDDI.
LinePlot importance_plot(std::span<const ImportanceProfile> profiles);

}  // namespace probe
