#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace occ {

struct ChartSeries {
  std::string label;
  std::vector<std::pair<double, double>> points;  // (x, y), plotted in order
};

// Minimal static SVG line chart: one polyline per series, tick-labeled axes,
// legend in the top-right corner. Output is deterministic for fixed input.
void write_line_chart(const std::filesystem::path& path, const std::string& title,
                      const std::string& x_label, const std::string& y_label,
                      std::span<const ChartSeries> series);

}  // namespace occ
