#pragma once

#include <string>
#include <vector>

namespace siv {

struct PlotSeries {
  std::vector<double> x;
  std::vector<double> y;
  std::string color = "#1f77b4";
  bool markers = false;
};

// Static line plot: axes, ticks, polylines. CSV remains the authoritative
// output; this is a quick look.
std::string render_svg_plot(const std::vector<PlotSeries>& series, const std::string& title,
                            const std::string& x_label, const std::string& y_label);

}  // namespace siv
