// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "trajattn/data/trajectory.hpp"

namespace trajattn {

// One instance drawn in scene units: observed (green), ground truth (blue),
// neighbours (purple), prediction (red).
struct PlotData {
  std::int64_t pedestrian_id = 0;
  PointSeq observed;
  PointSeq truth;
  PointSeq predicted;
  std::vector<PointSeq> neighbors;
};

inline constexpr const char* kObservedColor = "#2ca02c";
inline constexpr const char* kTruthColor = "#1f4fd6";
inline constexpr const char* kNeighborColor = "#8e44ad";
inline constexpr const char* kPredictedColor = "#d62728";

inline void write_plot_svg(std::ostream& os, const PlotData& d, double size_px = 480.0) {
  double lo_x = std::numeric_limits<double>::infinity(), lo_y = lo_x;
  double hi_x = -lo_x, hi_y = -lo_x;
  auto extend = [&](const PointSeq& s) {
    for (Point p : s) {
      lo_x = std::min(lo_x, p.x);
      lo_y = std::min(lo_y, p.y);
      hi_x = std::max(hi_x, p.x);
      hi_y = std::max(hi_y, p.y);
    }
  };
  extend(d.observed);
  extend(d.truth);
  extend(d.predicted);
  for (const auto& n : d.neighbors) extend(n);
  if (!(lo_x <= hi_x)) lo_x = lo_y = 0.0, hi_x = hi_y = 1.0;
  const double span = std::max({hi_x - lo_x, hi_y - lo_y, 1e-9});
  const double margin = 20.0;
  const double k = (size_px - 2 * margin) / span;
  char buf[128];
  auto map = [&](Point p) {
    // SVG y grows downwards.
    std::snprintf(buf, sizeof buf, "%.3f,%.3f", margin + (p.x - lo_x) * k, size_px - margin - (p.y - lo_y) * k);
    return std::string(buf);
  };
  auto polyline = [&](const PointSeq& s, const char* color, double width, const char* cls) {
    if (s.empty()) return;
    os << "  <polyline class=\"" << cls << "\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"" << width
       << "\" points=\"";
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? " " : "") << map(s[i]);
    os << "\"/>\n";
  };
  std::snprintf(buf, sizeof buf, "%.0f", size_px);
  const std::string sz = buf;
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << sz << "\" height=\"" << sz << "\" viewBox=\"0 0 " << sz
     << ' ' << sz << "\">\n";
  os << "  <title>pedestrian " << d.pedestrian_id << "</title>\n";
  os << "  <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (const auto& n : d.neighbors) polyline(n, kNeighborColor, 1.5, "neighbor");
  polyline(d.observed, kObservedColor, 2.5, "observed");
  polyline(d.truth, kTruthColor, 2.5, "truth");
  polyline(d.predicted, kPredictedColor, 2.5, "predicted");
  os << "</svg>\n";
}

// series,index,x,y with series observed | truth | predicted | neighbor<k>.
inline void write_plot_csv(std::ostream& os, const PlotData& d) {
  os << "series,index,x,y\n";
  char buf[96];
  auto rows = [&](const std::string& name, const PointSeq& s) {
    for (std::size_t i = 0; i < s.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g,%.17g", s[i].x, s[i].y);
      os << name << ',' << i << ',' << buf << '\n';
    }
  };
  rows("observed", d.observed);
  rows("truth", d.truth);
  rows("predicted", d.predicted);
  for (std::size_t n = 0; n < d.neighbors.size(); ++n) rows("neighbor" + std::to_string(n), d.neighbors[n]);
}

}  // namespace trajattn
