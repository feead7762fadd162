#pragma once

#include <optional>
#include <string>
#include <vector>

namespace tiad::plot {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

struct Series {
  std::string name;
  std::vector<Point> points;
  bool dashed = false;
  bool markers = false;
  /// Optional ± band drawn as error bars (same length as points).
  std::vector<double> error;
};

struct Marker {
  double x = 0.0;
  std::string label;
};

struct LinePlot {
  std::string title;
  std::string x_label;
  std::string y_label;
  double x_min = 0.0, x_max = 1.0;
  double y_min = 0.0, y_max = 1.0;
  std::vector<Series> series;
  std::vector<Marker> markers;
  /// Replaces numeric x tick labels when non-empty.
  std::vector<std::pair<double, std::string>> x_ticks;
};

std::string render_svg(const LinePlot& plot);
void write_svg(const LinePlot& plot, const std::string& path);

}  // namespace tiad::plot
