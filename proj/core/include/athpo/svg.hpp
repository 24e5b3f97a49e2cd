#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace athpo::svg {

struct Series {
  std::string label;
  std::string color;
  std::vector<std::pair<double, double>> points;  // (x, y)
};

// Shaded region between lo(x) and hi(x), drawn under the lines.
struct Band {
  std::string color;
  std::vector<std::tuple<double, double, double>> points;  // (x, lo, hi)
};

struct ChartOptions {
  std::string title;
  std::string x_label;
  std::string y_label;
  int width = 720;
  int height = 480;
  bool scatter = false;  // markers only, no connecting lines
};

void write_chart(std::ostream& out, const ChartOptions& opts,
                 const std::vector<Series>& series,
                 const std::vector<Band>& bands = {});

// Grid heatmap with per-cell values and optional star markers (the
// Pareto-frontier cells).
struct HeatmapOptions {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<std::string> x_ticks;
  std::vector<std::string> y_ticks;
  int cell_size = 64;
};

void write_heatmap(std::ostream& out, const HeatmapOptions& opts,
                   const std::vector<std::vector<double>>& values,
                   const std::vector<std::vector<bool>>& stars = {});

}  // namespace athpo::svg
