#include "athpo/svg.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

namespace athpo::svg {

namespace {

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                          "#9467bd", "#8c564b", "#17becf", "#7f7f7f"};

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

struct Range {
  double lo = 0.0, hi = 1.0;
  void expand(double v) {
    if (!std::isfinite(v)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
};

}  // namespace

void write_chart(std::ostream& out, const ChartOptions& opts,
                 const std::vector<Series>& series,
                 const std::vector<Band>& bands) {
  const double ml = 64, mr = 16, mt = 36, mb = 48;
  const double pw = opts.width - ml - mr, ph = opts.height - mt - mb;

  Range xr{1e300, -1e300}, yr{1e300, -1e300};
  for (const auto& s : series)
    for (const auto& [x, y] : s.points) {
      xr.expand(x);
      yr.expand(y);
    }
  for (const auto& b : bands)
    for (const auto& [x, lo, hi] : b.points) {
      xr.expand(x);
      yr.expand(lo);
      yr.expand(hi);
    }
  if (xr.lo > xr.hi) xr = {0.0, 1.0};
  if (yr.lo > yr.hi) yr = {0.0, 1.0};
  if (xr.hi == xr.lo) xr.hi = xr.lo + 1.0;
  if (yr.hi == yr.lo) yr.hi = yr.lo + 1.0;

  auto px = [&](double x) { return ml + (x - xr.lo) / (xr.hi - xr.lo) * pw; };
  auto py = [&](double y) { return mt + ph - (y - yr.lo) / (yr.hi - yr.lo) * ph; };

  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << opts.width
      << "\" height=\"" << opts.height << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << opts.width / 2 << "\" y=\"20\" text-anchor=\"middle\" "
      << "font-family=\"sans-serif\" font-size=\"14\">" << opts.title
      << "</text>\n";

  for (const auto& b : bands) {
    if (b.points.empty()) continue;
    out << "<polygon fill=\"" << (b.color.empty() ? "#cccccc" : b.color)
        << "\" fill-opacity=\"0.3\" stroke=\"none\" points=\"";
    for (const auto& [x, lo, hi] : b.points)
      out << fmt(px(x)) << ',' << fmt(py(hi)) << ' ';
    for (auto it = b.points.rbegin(); it != b.points.rend(); ++it)
      out << fmt(px(std::get<0>(*it))) << ',' << fmt(py(std::get<1>(*it)))
          << ' ';
    out << "\"/>\n";
  }

  // axes + 5 ticks each
  out << "<line x1=\"" << fmt(ml) << "\" y1=\"" << fmt(mt + ph) << "\" x2=\""
      << fmt(ml + pw) << "\" y2=\"" << fmt(mt + ph)
      << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << fmt(ml) << "\" y1=\"" << fmt(mt) << "\" x2=\""
      << fmt(ml) << "\" y2=\"" << fmt(mt + ph) << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double fx = xr.lo + (xr.hi - xr.lo) * i / 4.0;
    const double fy = yr.lo + (yr.hi - yr.lo) * i / 4.0;
    out << "<text x=\"" << fmt(px(fx)) << "\" y=\"" << fmt(mt + ph + 16)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
        << "font-size=\"10\">" << fmt(fx) << "</text>\n";
    out << "<text x=\"" << fmt(ml - 6) << "\" y=\"" << fmt(py(fy) + 3)
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" "
        << "font-size=\"10\">" << fmt(fy) << "</text>\n";
  }
  out << "<text x=\"" << opts.width / 2 << "\" y=\"" << opts.height - 10
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
      << "font-size=\"12\">" << opts.x_label << "</text>\n";
  out << "<text x=\"14\" y=\"" << opts.height / 2
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
      << "font-size=\"12\" transform=\"rotate(-90 14 " << opts.height / 2
      << ")\">" << opts.y_label << "</text>\n";

  std::size_t color_i = 0;
  for (const auto& s : series) {
    const std::string color =
        s.color.empty() ? kPalette[color_i % 8] : s.color;
    ++color_i;
    if (!opts.scatter && s.points.size() > 1) {
      out << "<polyline fill=\"none\" stroke=\"" << color
          << "\" stroke-width=\"1.5\" points=\"";
      for (const auto& [x, y] : s.points)
        if (std::isfinite(y)) out << fmt(px(x)) << ',' << fmt(py(y)) << ' ';
      out << "\"/>\n";
    } else {
      for (const auto& [x, y] : s.points)
        if (std::isfinite(y))
          out << "<circle cx=\"" << fmt(px(x)) << "\" cy=\"" << fmt(py(y))
              << "\" r=\"2.5\" fill=\"" << color << "\"/>\n";
    }
  }

  // legend
  double ly = mt + 8;
  color_i = 0;
  for (const auto& s : series) {
    const std::string color =
        s.color.empty() ? kPalette[color_i % 8] : s.color;
    ++color_i;
    out << "<rect x=\"" << fmt(ml + pw - 150) << "\" y=\"" << fmt(ly - 8)
        << "\" width=\"10\" height=\"10\" fill=\"" << color << "\"/>\n";
    out << "<text x=\"" << fmt(ml + pw - 136) << "\" y=\"" << fmt(ly + 1)
        << "\" font-family=\"sans-serif\" font-size=\"11\">" << s.label
        << "</text>\n";
    ly += 16;
  }
  out << "</svg>\n";
}

void write_heatmap(std::ostream& out, const HeatmapOptions& opts,
                   const std::vector<std::vector<double>>& values,
                   const std::vector<std::vector<bool>>& stars) {
  const std::size_t rows = values.size();
  const std::size_t cols = rows ? values.front().size() : 0;
  const double ml = 72, mt = 40, mb = 40;
  const int cs = opts.cell_size;
  const double width = ml + cols * cs + 24;
  const double height = mt + rows * cs + mb;

  double lo = 1e300, hi = -1e300;
  for (const auto& row : values)
    for (double v : row) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  if (lo > hi) {
    lo = 0.0;
    hi = 1.0;
  }
  if (hi == lo) hi = lo + 1.0;

  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
      << "\" height=\"" << height << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << width / 2 << "\" y=\"20\" text-anchor=\"middle\" "
      << "font-family=\"sans-serif\" font-size=\"14\">" << opts.title
      << "</text>\n";

  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const double t = (values[r][c] - lo) / (hi - lo);
      // blue (good/low) to red (bad/high)
      const int red = static_cast<int>(40 + 200 * t);
      const int blue = static_cast<int>(240 - 200 * t);
      out << "<rect x=\"" << fmt(ml + c * cs) << "\" y=\"" << fmt(mt + r * cs)
          << "\" width=\"" << cs << "\" height=\"" << cs << "\" fill=\"rgb("
          << red << ",80," << blue << ")\" stroke=\"white\"/>\n";
      out << "<text x=\"" << fmt(ml + c * cs + cs / 2.0) << "\" y=\""
          << fmt(mt + r * cs + cs / 2.0 + 4)
          << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
          << "font-size=\"11\" fill=\"white\">" << fmt(values[r][c])
          << "</text>\n";
      if (!stars.empty() && stars[r][c])
        out << "<text x=\"" << fmt(ml + c * cs + cs - 10) << "\" y=\""
            << fmt(mt + r * cs + 14)
            << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
            << "font-size=\"13\" fill=\"gold\">*</text>\n";
    }
  }
  for (std::size_t c = 0; c < cols && c < opts.x_ticks.size(); ++c)
    out << "<text x=\"" << fmt(ml + c * cs + cs / 2.0) << "\" y=\""
        << fmt(mt + rows * cs + 16)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
        << "font-size=\"11\">" << opts.x_ticks[c] << "</text>\n";
  for (std::size_t r = 0; r < rows && r < opts.y_ticks.size(); ++r)
    out << "<text x=\"" << fmt(ml - 8) << "\" y=\""
        << fmt(mt + r * cs + cs / 2.0 + 4)
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" "
        << "font-size=\"11\">" << opts.y_ticks[r] << "</text>\n";
  out << "<text x=\"" << width / 2 << "\" y=\"" << height - 8
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
      << "font-size=\"12\">" << opts.x_label << "</text>\n";
  out << "<text x=\"16\" y=\"" << height / 2
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
      << "font-size=\"12\" transform=\"rotate(-90 16 " << height / 2 << ")\">"
      << opts.y_label << "</text>\n";
  out << "</svg>\n";
}

}  // namespace athpo::svg
