#include "brtrl/plotting.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "brtrl/errors.hpp"
#include "brtrl/trees.hpp"  // parse_double

namespace brtrl {

namespace {

std::vector<std::string> split_csv_row(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream row(line);
  while (std::getline(row, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.push_back("");
  return fields;
}

std::string fmt(double v, const char* spec = "%.2f") {
  char buf[64];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

}  // namespace

PlotSeries read_curve_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw IoError("curve CSV: missing header row");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const std::vector<std::string> header = split_csv_row(line);
  int episode_col = -1, reward_col = -1;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == "episode") episode_col = static_cast<int>(i);
    if (header[i] == "total_reward") reward_col = static_cast<int>(i);
  }
  if (episode_col < 0 || reward_col < 0) {
    throw IoError("curve CSV: header must contain 'episode' and 'total_reward' columns");
  }
  PlotSeries series;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::vector<std::string> fields = split_csv_row(line);
    if (static_cast<int>(fields.size()) <= std::max(episode_col, reward_col)) {
      throw IoError("curve CSV: short row at line " + std::to_string(line_no));
    }
    try {
      series.episodes.push_back(static_cast<int>(parse_double(fields[episode_col])));
      series.rewards.push_back(parse_double(fields[reward_col]));
    } catch (const std::exception&) {
      throw IoError("curve CSV: bad number at line " + std::to_string(line_no));
    }
  }
  if (series.episodes.empty()) throw IoError("curve CSV: no data rows");
  return series;
}

std::vector<double> moving_average(std::span<const double> values, int window) {
  if (window < 1) throw std::invalid_argument("moving_average: window must be >= 1");
  std::vector<double> out(values.size());
  double running = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    running += values[i];
    if (i >= static_cast<std::size_t>(window)) running -= values[i - window];
    const std::size_t n = std::min<std::size_t>(i + 1, window);
    out[i] = running / static_cast<double>(n);
  }
  return out;
}

void render_curve_svg(std::ostream& out, const PlotSeries& series, int window,
                      const std::string& y_label) {
  if (series.episodes.empty() || series.episodes.size() != series.rewards.size()) {
    throw std::invalid_argument("render_curve_svg: need a non-empty, consistent series");
  }
  const std::vector<double> ma = moving_average(series.rewards, window);

  constexpr double kWidth = 800.0, kHeight = 500.0;
  constexpr double kLeft = 62.0, kRight = 16.0, kTop = 18.0, kBottom = 46.0;
  const double plot_w = kWidth - kLeft - kRight;
  const double plot_h = kHeight - kTop - kBottom;

  double x_min = series.episodes.front(), x_max = series.episodes.front();
  double y_min = series.rewards.front(), y_max = series.rewards.front();
  for (std::size_t i = 0; i < series.episodes.size(); ++i) {
    x_min = std::min(x_min, static_cast<double>(series.episodes[i]));
    x_max = std::max(x_max, static_cast<double>(series.episodes[i]));
    y_min = std::min({y_min, series.rewards[i], ma[i]});
    y_max = std::max({y_max, series.rewards[i], ma[i]});
  }
  if (x_max == x_min) {
    x_min -= 0.5;
    x_max += 0.5;
  }
  const double y_pad = y_max == y_min ? 1.0 : 0.05 * (y_max - y_min);
  y_min -= y_pad;
  y_max += y_pad;

  const auto x_px = [&](double x) { return kLeft + (x - x_min) / (x_max - x_min) * plot_w; };
  const auto y_px = [&](double y) { return kTop + (y_max - y) / (y_max - y_min) * plot_h; };

  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"800\" height=\"500\" "
         "viewBox=\"0 0 800 500\">\n";
  out << "<rect x=\"0\" y=\"0\" width=\"800\" height=\"500\" fill=\"white\"/>\n";

  // gridless frame + 5 ticks per axis
  out << "<g stroke=\"black\" stroke-width=\"1\" fill=\"none\">\n";
  out << "<polyline points=\"" << fmt(kLeft) << ',' << fmt(kTop) << ' ' << fmt(kLeft) << ','
      << fmt(kTop + plot_h) << ' ' << fmt(kLeft + plot_w) << ',' << fmt(kTop + plot_h)
      << "\"/>\n";
  out << "</g>\n";
  out << "<g font-family=\"sans-serif\" font-size=\"12\" fill=\"black\">\n";
  constexpr int kTicks = 5;
  for (int i = 0; i < kTicks; ++i) {
    const double fx = x_min + (x_max - x_min) * i / (kTicks - 1);
    const double fy = y_min + (y_max - y_min) * i / (kTicks - 1);
    const double px = x_px(fx);
    const double py = y_px(fy);
    out << "<line x1=\"" << fmt(px) << "\" y1=\"" << fmt(kTop + plot_h) << "\" x2=\"" << fmt(px)
        << "\" y2=\"" << fmt(kTop + plot_h + 5) << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << fmt(px) << "\" y=\"" << fmt(kTop + plot_h + 19)
        << "\" text-anchor=\"middle\">" << fmt(fx, "%g") << "</text>\n";
    out << "<line x1=\"" << fmt(kLeft - 5) << "\" y1=\"" << fmt(py) << "\" x2=\"" << fmt(kLeft)
        << "\" y2=\"" << fmt(py) << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << fmt(kLeft - 8) << "\" y=\"" << fmt(py + 4)
        << "\" text-anchor=\"end\">" << fmt(fy, "%g") << "</text>\n";
  }
  out << "<text x=\"" << fmt(kLeft + plot_w / 2) << "\" y=\"" << fmt(kHeight - 8)
      << "\" text-anchor=\"middle\">episode</text>\n";
  out << "<text x=\"14\" y=\"" << fmt(kTop + plot_h / 2)
      << "\" text-anchor=\"middle\" transform=\"rotate(-90 14 " << fmt(kTop + plot_h / 2)
      << ")\">" << y_label << "</text>\n";
  out << "</g>\n";

  const auto emit_polyline = [&](const std::vector<double>& ys, const char* stroke,
                                 const char* width) {
    out << "<polyline fill=\"none\" stroke=\"" << stroke << "\" stroke-width=\"" << width
        << "\" points=\"";
    for (std::size_t i = 0; i < ys.size(); ++i) {
      if (i > 0) out << ' ';
      out << fmt(x_px(series.episodes[i])) << ',' << fmt(y_px(ys[i]));
    }
    out << "\"/>\n";
  };
  emit_polyline(series.rewards, "#9ecae1", "1");
  emit_polyline(ma, "#08519c", "2");
  out << "</svg>\n";
}

}  // namespace brtrl
