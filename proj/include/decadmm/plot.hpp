#pragma once

#include <string>
#include <vector>

namespace decadmm {

/// One curve with an optional band; `lo`/`hi` are empty or match `y`.
struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> lo;
  std::vector<double> hi;
};

struct PlotSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_x = false;
  bool log_y = false;
  std::vector<Series> series;
};

/// Standalone SVG line plot. Output depends only on `spec`.
std::string render_svg(const PlotSpec& spec);

}  // namespace decadmm
