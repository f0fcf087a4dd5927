#pragma once

#include <string>
#include <vector>

namespace switchsafe {

struct PlotSeries {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
  std::string color = "#1f77b4";
  bool dashed = false;
};

/// Static line chart with axes, ticks and a legend. Non-finite points are skipped.
std::string svg_line_chart(const std::string& title, const std::string& xlabel, const std::string& ylabel,
                           const std::vector<PlotSeries>& series, double width = 720, double height = 420);

} // namespace switchsafe
