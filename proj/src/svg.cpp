// Copyright 2026 The mbrlkit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "mbrl/svg.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

namespace mbrl::svg {

namespace {

const char* kPalette[] = {"#1f77b4", "#ff452e", "#2ca02c", "#cd642e",
                          "#9467bd", "#8c564b", "#17becf", "#7f7f7f"};

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  void add(double v) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  void pad() {
    if (!(hi > lo)) {
      lo -= 1.0;
      hi += 1.0;
    }
    const double m = 0.05 * (hi - lo);
    lo -= m;
    hi += m;
  }
};

std::vector<double> parse_column(const csv::Table& t, const std::string& name,
                                 std::vector<bool>& ok) {
  const int col = t.column(name);
  if (col < 0) throw std::runtime_error("no such column: " + name);
  std::vector<double> out(t.rows.size(), std::numeric_limits<double>::quiet_NaN());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    try {
      out[r] = csv::parse_double(t.rows[r][col]);
    } catch (const std::invalid_argument&) {
      ok[r] = false;
    }
  }
  return out;
}

std::string fmt(double v) {
  std::ostringstream ss;
  ss.precision(6);
  ss << v;
  return ss.str();
}

}  // namespace

void render(const csv::Table& table, const PlotSpec& spec, const std::filesystem::path& out) {
  if (spec.y_columns.empty()) throw std::invalid_argument("plot needs >= 1 y column");
  const double margin = 55.0;
  const double w = spec.width, h = spec.height;

  std::vector<bool> ok(table.rows.size(), true);
  const auto xs = parse_column(table, spec.x_column, ok);
  std::vector<std::vector<double>> ys;
  for (const auto& name : spec.y_columns) ys.push_back(parse_column(table, name, ok));
  std::vector<double> vals;
  if (spec.kind == PlotKind::Heatmap) {
    if (spec.value_column.empty()) throw std::invalid_argument("heatmap needs a value column");
    vals = parse_column(table, spec.value_column, ok);
  }

  Range xr, yr, vr;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    if (!ok[r]) continue;
    xr.add(xs[r]);
    for (const auto& y : ys) yr.add(y[r]);
    if (!vals.empty()) vr.add(vals[r]);
  }
  if (!std::isfinite(xr.lo)) throw std::runtime_error("no plottable rows");
  xr.pad();
  yr.pad();

  auto px = [&](double x) { return margin + (x - xr.lo) / (xr.hi - xr.lo) * (w - 2 * margin); };
  auto py = [&](double y) {
    return h - margin - (y - yr.lo) / (yr.hi - yr.lo) * (h - 2 * margin);
  };

  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << spec.width << "\" height=\""
    << spec.height << "\" viewBox=\"0 0 " << spec.width << " " << spec.height << "\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  // axes + ticks
  s << "<line x1=\"" << margin << "\" y1=\"" << h - margin << "\" x2=\"" << w - margin
    << "\" y2=\"" << h - margin << "\" stroke=\"black\"/>\n";
  s << "<line x1=\"" << margin << "\" y1=\"" << margin << "\" x2=\"" << margin << "\" y2=\""
    << h - margin << "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double fx = xr.lo + (xr.hi - xr.lo) * k / 4.0;
    const double fy = yr.lo + (yr.hi - yr.lo) * k / 4.0;
    s << "<text x=\"" << px(fx) << "\" y=\"" << h - margin + 18
      << "\" font-size=\"11\" text-anchor=\"middle\">" << fmt(fx) << "</text>\n";
    s << "<text x=\"" << margin - 6 << "\" y=\"" << py(fy) + 4
      << "\" font-size=\"11\" text-anchor=\"end\">" << fmt(fy) << "</text>\n";
  }
  if (!spec.title.empty())
    s << "<text x=\"" << w / 2 << "\" y=\"20\" font-size=\"14\" text-anchor=\"middle\">"
      << spec.title << "</text>\n";
  s << "<text x=\"" << w / 2 << "\" y=\"" << h - 10
    << "\" font-size=\"12\" text-anchor=\"middle\">" << spec.x_column << "</text>\n";

  if (spec.kind == PlotKind::Heatmap) {
    // distinct sorted coordinates define the cell lattice
    std::set<double> xset, yset;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
      if (!ok[r]) continue;
      xset.insert(xs[r]);
      yset.insert(ys[0][r]);
    }
    const std::vector<double> xcoord(xset.begin(), xset.end());
    const std::vector<double> ycoord(yset.begin(), yset.end());
    const double cw = (w - 2 * margin) / xcoord.size();
    const double ch = (h - 2 * margin) / ycoord.size();
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
      if (!ok[r]) continue;
      const auto ix = std::lower_bound(xcoord.begin(), xcoord.end(), xs[r]) - xcoord.begin();
      const auto iy = std::lower_bound(ycoord.begin(), ycoord.end(), ys[0][r]) - ycoord.begin();
      const double t =
          vr.hi > vr.lo ? (vals[r] - vr.lo) / (vr.hi - vr.lo) : 0.5;
      const int red = static_cast<int>(255 * t);
      const int blue = static_cast<int>(255 * (1.0 - t));
      s << "<rect x=\"" << margin + ix * cw << "\" y=\"" << h - margin - (iy + 1) * ch
        << "\" width=\"" << cw << "\" height=\"" << ch << "\" fill=\"rgb(" << red << ",60,"
        << blue << ")\"><title>" << fmt(vals[r]) << "</title></rect>\n";
    }
  } else {
    for (std::size_t c = 0; c < ys.size(); ++c) {
      const char* color = kPalette[c % (sizeof(kPalette) / sizeof(kPalette[0]))];
      if (spec.kind == PlotKind::Line) {
        s << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t r = 0; r < table.rows.size(); ++r)
          if (ok[r]) s << px(xs[r]) << "," << py(ys[c][r]) << " ";
        s << "\"/>\n";
      }
      for (std::size_t r = 0; r < table.rows.size(); ++r)
        if (ok[r])
          s << "<circle cx=\"" << px(xs[r]) << "\" cy=\"" << py(ys[c][r])
            << "\" r=\"2.5\" fill=\"" << color << "\"/>\n";
      s << "<text x=\"" << w - margin + 4 << "\" y=\"" << margin + 14 * c
        << "\" font-size=\"11\" fill=\"" << color << "\">" << spec.y_columns[c] << "</text>\n";
    }
  }
  s << "</svg>\n";

  if (out.has_parent_path()) std::filesystem::create_directories(out.parent_path());
  std::ofstream f(out, std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open " + out.string() + " for writing");
  f << s.str();
}

}  // namespace mbrl::svg
