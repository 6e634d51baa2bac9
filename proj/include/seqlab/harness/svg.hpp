#ifndef SEQLAB_HARNESS_SVG_HPP
#define SEQLAB_HARNESS_SVG_HPP

#include <string>
#include <vector>

namespace seqlab::harness {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

struct ChartOptions {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_y = false;
};

// Standalone polyline chart; no plotting dependency. Throws
// std::invalid_argument on empty or ragged series.
std::string render_line_chart(const std::vector<Series>& series, const ChartOptions& options);

void write_line_chart(const std::string& path, const std::vector<Series>& series,
                      const ChartOptions& options);

}  // namespace seqlab::harness

#endif  // SEQLAB_HARNESS_SVG_HPP
