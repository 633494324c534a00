#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "mlnira/core.hpp"

namespace mlnira {

// Bar chart of per-scenario mean totals with one highlighted (baseline) bar.
// Direct markup emission keeps the output deterministic and dependency-free;
// the numbers also go out as CSV for external re-plotting.
inline std::string bar_chart_svg(const std::vector<std::string>& labels,
                                 const std::vector<double>& values, std::size_t highlight,
                                 const std::string& title, const std::string& y_label) {
  if (labels.size() != values.size() || labels.empty()) {
    throw ContractError("bar_chart_svg: labels and values must match and be nonempty");
  }
  const int bar_width = 46;
  const int gap = 18;
  const int margin_left = 70;
  const int margin_right = 20;
  const int margin_top = 46;
  const int margin_bottom = 58;
  const int plot_height = 300;
  const int n = static_cast<int>(labels.size());
  const int width = margin_left + margin_right + n * bar_width + (n - 1) * gap;
  const int height = margin_top + plot_height + margin_bottom;

  double max_value = *std::max_element(values.begin(), values.end());
  if (max_value <= 0.0) max_value = 1.0;
  const double scale = plot_height / (max_value * 1.15);

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(width) + "\" height=\"" +
         std::to_string(height) + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg += "<text x=\"" + std::to_string(width / 2) + "\" y=\"20\" text-anchor=\"middle\" font-size=\"15\">" +
         title + "</text>\n";
  svg += "<text x=\"16\" y=\"" + std::to_string(margin_top + plot_height / 2) +
         "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " +
         std::to_string(margin_top + plot_height / 2) + ")\">" + y_label + "</text>\n";

  // Axes and ticks
  const int axis_y = margin_top + plot_height;
  svg += "<line x1=\"" + std::to_string(margin_left) + "\" y1=\"" + std::to_string(margin_top) + "\" x2=\"" +
         std::to_string(margin_left) + "\" y2=\"" + std::to_string(axis_y) + "\" stroke=\"black\"/>\n";
  svg += "<line x1=\"" + std::to_string(margin_left) + "\" y1=\"" + std::to_string(axis_y) + "\" x2=\"" +
         std::to_string(width - margin_right) + "\" y2=\"" + std::to_string(axis_y) + "\" stroke=\"black\"/>\n";
  for (int tick = 0; tick <= 4; ++tick) {
    double value = max_value * 1.15 * tick / 4.0;
    int y = axis_y - static_cast<int>(value * scale);
    svg += "<line x1=\"" + std::to_string(margin_left - 4) + "\" y1=\"" + std::to_string(y) + "\" x2=\"" +
           std::to_string(margin_left) + "\" y2=\"" + std::to_string(y) + "\" stroke=\"black\"/>\n";
    svg += "<text x=\"" + std::to_string(margin_left - 8) + "\" y=\"" + std::to_string(y + 4) +
           "\" text-anchor=\"end\">" + format_double(std::round(value * 100.0) / 100.0) + "</text>\n";
  }

  for (int i = 0; i < n; ++i) {
    const double value = values[static_cast<std::size_t>(i)];
    const int bar_height = static_cast<int>(value * scale);
    const int x = margin_left + i * (bar_width + gap);
    const int y = axis_y - bar_height;
    const char* fill = static_cast<std::size_t>(i) == highlight ? "#d95f02" : "#4878a8";
    svg += "<rect x=\"" + std::to_string(x) + "\" y=\"" + std::to_string(y) + "\" width=\"" +
           std::to_string(bar_width) + "\" height=\"" + std::to_string(bar_height) + "\" fill=\"" + fill +
           "\"/>\n";
    svg += "<text x=\"" + std::to_string(x + bar_width / 2) + "\" y=\"" + std::to_string(y - 5) +
           "\" text-anchor=\"middle\">" + format_double(std::round(value * 1000.0) / 1000.0) + "</text>\n";
    svg += "<text x=\"" + std::to_string(x + bar_width / 2) + "\" y=\"" + std::to_string(axis_y + 16) +
           "\" text-anchor=\"middle\">" + labels[static_cast<std::size_t>(i)] + "</text>\n";
  }
  svg += "</svg>\n";
  return svg;
}

}  // namespace mlnira
