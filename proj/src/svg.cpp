#include "occ/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace occ {

namespace {

constexpr double kWidth = 640.0;
constexpr double kHeight = 420.0;
constexpr double kLeft = 64.0, kRight = 24.0, kTop = 40.0, kBottom = 48.0;

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                          "#ff7f0e", "#8c564b"};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

}  // namespace

void write_line_chart(const std::filesystem::path& path, const std::string& title,
                      const std::string& x_label, const std::string& y_label,
                      std::span<const ChartSeries> series) {
  double x_min = 0.0, x_max = 1.0, y_min = 0.0, y_max = 1.0;
  bool any = false;
  for (const ChartSeries& s : series)
    for (const auto& [x, y] : s.points) {
      if (!any) {
        x_min = x_max = x;
        y_min = y_max = y;
        any = true;
      }
      x_min = std::min(x_min, x);
      x_max = std::max(x_max, x);
      y_min = std::min(y_min, y);
      y_max = std::max(y_max, y);
    }
  if (x_max - x_min < 1e-12) x_max = x_min + 1.0;
  if (y_max - y_min < 1e-12) y_max = y_min + 1.0;

  const double plot_w = kWidth - kLeft - kRight;
  const double plot_h = kHeight - kTop - kBottom;
  auto sx = [&](double x) { return kLeft + (x - x_min) / (x_max - x_min) * plot_w; };
  auto sy = [&](double y) {
    return kTop + plot_h - (y - y_min) / (y_max - y_min) * plot_h;
  };

  std::ofstream out(path);
  if (!out)
    throw std::runtime_error("write_line_chart: cannot open " + path.string());

  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(kWidth)
      << "\" height=\"" << fmt(kHeight) << "\" font-family=\"sans-serif\" "
      << "font-size=\"12\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << fmt(kWidth / 2) << "\" y=\"20\" text-anchor=\"middle\" "
      << "font-size=\"15\">" << title << "</text>\n";

  // axes with min/mid/max tick labels
  out << "<line x1=\"" << fmt(kLeft) << "\" y1=\"" << fmt(kTop) << "\" x2=\""
      << fmt(kLeft) << "\" y2=\"" << fmt(kTop + plot_h)
      << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << fmt(kLeft) << "\" y1=\"" << fmt(kTop + plot_h)
      << "\" x2=\"" << fmt(kLeft + plot_w) << "\" y2=\"" << fmt(kTop + plot_h)
      << "\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double fx = x_min + (x_max - x_min) * t / 4.0;
    const double fy = y_min + (y_max - y_min) * t / 4.0;
    out << "<text x=\"" << fmt(sx(fx)) << "\" y=\"" << fmt(kTop + plot_h + 16)
        << "\" text-anchor=\"middle\">" << fmt(fx) << "</text>\n";
    out << "<text x=\"" << fmt(kLeft - 6) << "\" y=\"" << fmt(sy(fy) + 4)
        << "\" text-anchor=\"end\">" << fmt(fy) << "</text>\n";
    out << "<line x1=\"" << fmt(kLeft) << "\" y1=\"" << fmt(sy(fy)) << "\" x2=\""
        << fmt(kLeft + plot_w) << "\" y2=\"" << fmt(sy(fy))
        << "\" stroke=\"#dddddd\"/>\n";
  }
  out << "<text x=\"" << fmt(kLeft + plot_w / 2) << "\" y=\""
      << fmt(kHeight - 10) << "\" text-anchor=\"middle\">" << x_label
      << "</text>\n";
  out << "<text x=\"16\" y=\"" << fmt(kTop + plot_h / 2)
      << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
      << fmt(kTop + plot_h / 2) << ")\">" << y_label << "</text>\n";

  for (std::size_t i = 0; i < series.size(); ++i) {
    const char* color = kPalette[i % std::size(kPalette)];
    out << "<polyline fill=\"none\" stroke=\"" << color
        << "\" stroke-width=\"2\" points=\"";
    for (const auto& [x, y] : series[i].points)
      out << fmt(sx(x)) << "," << fmt(sy(y)) << " ";
    out << "\"/>\n";
    for (const auto& [x, y] : series[i].points)
      out << "<circle cx=\"" << fmt(sx(x)) << "\" cy=\"" << fmt(sy(y))
          << "\" r=\"2.5\" fill=\"" << color << "\"/>\n";
    const double ly = kTop + 14.0 * static_cast<double>(i);
    out << "<rect x=\"" << fmt(kLeft + plot_w - 110) << "\" y=\"" << fmt(ly)
        << "\" width=\"10\" height=\"10\" fill=\"" << color << "\"/>\n";
    out << "<text x=\"" << fmt(kLeft + plot_w - 96) << "\" y=\"" << fmt(ly + 9)
        << "\">" << series[i].label << "</text>\n";
  }
  out << "</svg>\n";
  if (!out)
    throw std::runtime_error("write_line_chart: write failed for " + path.string());
}

}  // namespace occ
