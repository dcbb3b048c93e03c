#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace brtrl {

struct PlotSeries {
  std::vector<int> episodes;
  std::vector<double> rewards;
};

// Parses a curve CSV by header name: needs `episode` and `total_reward`
// columns (extra columns are ignored). Throws IoError on malformed input or
// when no data rows are present.
PlotSeries read_curve_csv(std::istream& in);

// Trailing moving average: out[i] is the mean of the last min(window, i+1)
// values ending at i.
std::vector<double> moving_average(std::span<const double> values, int window);

// Fixed 800x500 viewport, raw series as a light polyline, trailing moving
// average as a bold overlay, labeled axes. Byte-identical for identical input.
void render_curve_svg(std::ostream& out, const PlotSeries& series, int window,
                      const std::string& y_label = "total reward");

}  // namespace brtrl
