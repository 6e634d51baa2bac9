#include "seqlab/harness/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace seqlab::harness {

namespace {

constexpr double kWidth = 820.0;
constexpr double kHeight = 500.0;
constexpr double kLeft = 80.0, kRight = 790.0, kTop = 50.0, kBottom = 440.0;

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                          "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

}  // namespace

std::string render_line_chart(const std::vector<Series>& series, const ChartOptions& options) {
  if (series.empty()) throw std::invalid_argument("render_line_chart: no series");
  for (const Series& s : series) {
    if (s.x.empty() || s.x.size() != s.y.size()) {
      throw std::invalid_argument("render_line_chart: series '" + s.label +
                                  "' is empty or ragged");
    }
  }

  auto y_value = [&](double y) {
    return options.log_y ? std::log10(std::max(y, 1e-16)) : y;
  };

  double x_min = series[0].x[0], x_max = x_min;
  double y_min = y_value(series[0].y[0]), y_max = y_min;
  for (const Series& s : series) {
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      x_min = std::min(x_min, s.x[i]);
      x_max = std::max(x_max, s.x[i]);
      y_min = std::min(y_min, y_value(s.y[i]));
      y_max = std::max(y_max, y_value(s.y[i]));
    }
  }
  if (x_max == x_min) x_max = x_min + 1.0;
  if (y_max == y_min) {
    y_max += 0.5;
    y_min -= 0.5;
  }
  const double y_pad = 0.05 * (y_max - y_min);
  y_min -= y_pad;
  y_max += y_pad;

  auto px = [&](double x) { return kLeft + (x - x_min) / (x_max - x_min) * (kRight - kLeft); };
  auto py = [&](double y) {
    return kBottom - (y_value(y) - y_min) / (y_max - y_min) * (kBottom - kTop);
  };

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 " << kWidth << " "
      << kHeight << "\" font-family=\"sans-serif\">\n";
  out << "<rect width=\"" << kWidth << "\" height=\"" << kHeight << "\" fill=\"white\"/>\n";
  out << "<text x=\"" << kWidth / 2 << "\" y=\"28\" text-anchor=\"middle\" font-size=\"16\">"
      << options.title << "</text>\n";

  // Axes and ticks.
  out << "<line x1=\"" << kLeft << "\" y1=\"" << kBottom << "\" x2=\"" << kRight << "\" y2=\""
      << kBottom << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\""
      << kBottom << "\" stroke=\"black\"/>\n";
  const int ticks = 5;
  for (int i = 0; i <= ticks; ++i) {
    const double fx = x_min + (x_max - x_min) * i / ticks;
    const double gx = px(fx);
    out << "<line x1=\"" << gx << "\" y1=\"" << kBottom << "\" x2=\"" << gx << "\" y2=\""
        << kBottom + 6 << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << gx << "\" y=\"" << kBottom + 22
        << "\" text-anchor=\"middle\" font-size=\"12\">" << fmt(fx) << "</text>\n";

    const double fy = y_min + (y_max - y_min) * i / ticks;
    const double gy = kBottom - (fy - y_min) / (y_max - y_min) * (kBottom - kTop);
    out << "<line x1=\"" << kLeft - 6 << "\" y1=\"" << gy << "\" x2=\"" << kLeft << "\" y2=\""
        << gy << "\" stroke=\"black\"/>\n";
    const double label = options.log_y ? std::pow(10.0, fy) : fy;
    out << "<text x=\"" << kLeft - 10 << "\" y=\"" << gy + 4
        << "\" text-anchor=\"end\" font-size=\"12\">" << fmt(label) << "</text>\n";
  }
  out << "<text x=\"" << (kLeft + kRight) / 2 << "\" y=\"" << kBottom + 45
      << "\" text-anchor=\"middle\" font-size=\"13\">" << options.x_label << "</text>\n";
  out << "<text x=\"20\" y=\"" << (kTop + kBottom) / 2
      << "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 20 "
      << (kTop + kBottom) / 2 << ")\">" << options.y_label
      << (options.log_y ? " (log scale)" : "") << "</text>\n";

  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* color = kPalette[s % (sizeof(kPalette) / sizeof(kPalette[0]))];
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.8\" points=\"";
    for (std::size_t i = 0; i < series[s].x.size(); ++i) {
      out << fmt(px(series[s].x[i])) << "," << fmt(py(series[s].y[i])) << " ";
    }
    out << "\"/>\n";
    const double ly = kTop + 18.0 * static_cast<double>(s);
    out << "<rect x=\"" << kRight - 180 << "\" y=\"" << ly - 9
        << "\" width=\"12\" height=\"12\" fill=\"" << color << "\"/>\n";
    out << "<text x=\"" << kRight - 162 << "\" y=\"" << ly + 2 << "\" font-size=\"12\">"
        << series[s].label << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

void write_line_chart(const std::string& path, const std::vector<Series>& series,
                      const ChartOptions& options) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_line_chart: cannot open " + path);
  out << render_line_chart(series, options);
}

}  // namespace seqlab::harness
