// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "trajattn/errors.hpp"

namespace trajattn {

struct Point {
  double x = 0.0;
  double y = 0.0;

  friend Point operator+(Point a, Point b) { return {a.x + b.x, a.y + b.y}; }
  friend Point operator-(Point a, Point b) { return {a.x - b.x, a.y - b.y}; }
  friend Point operator*(double s, Point p) { return {s * p.x, s * p.y}; }
  friend bool operator==(Point, Point) = default;
};

inline double norm(Point p) { return std::hypot(p.x, p.y); }
inline double distance(Point a, Point b) { return norm(a - b); }
inline double dot(Point a, Point b) { return a.x * b.x + a.y * b.y; }
inline double cross(Point a, Point b) { return a.x * b.y - a.y * b.x; }

using PointSeq = std::vector<Point>;

struct Observation {
  std::int64_t frame = 0;
  Point pos;

  friend bool operator==(const Observation&, const Observation&) = default;
};

struct Trajectory {
  std::int64_t pedestrian_id = 0;
  std::vector<Observation> frames;  // strictly increasing frame index

  std::size_t length() const noexcept { return frames.size(); }
  std::int64_t first_frame() const { return frames.front().frame; }
  std::int64_t last_frame() const { return frames.back().frame; }

  bool contiguous() const {
    for (std::size_t i = 1; i < frames.size(); ++i) {
      if (frames[i].frame - frames[i - 1].frame != 1) return false;
    }
    return true;
  }

  // Points for frames [start, start + count); requires a contiguous track
  // covering the range.
  PointSeq slice(std::size_t offset, std::size_t count) const {
    if (offset + count > frames.size()) throw ArgumentError("trajectory slice out of range");
    PointSeq out;
    out.reserve(count);
    for (std::size_t i = offset; i < offset + count; ++i) out.push_back(frames[i].pos);
    return out;
  }

  PointSeq points() const { return slice(0, frames.size()); }

  friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

struct Bounds {
  double min_x = 0.0;
  double min_y = 0.0;
  double max_x = 0.0;
  double max_y = 0.0;

  friend bool operator==(const Bounds&, const Bounds&) = default;
};

struct Scene {
  std::vector<Trajectory> trajectories;
  double frame_rate = 0.0;  // metadata only
  Bounds bounds;

  const Trajectory* find(std::int64_t pedestrian_id) const {
    for (const auto& t : trajectories) {
      if (t.pedestrian_id == pedestrian_id) return &t;
    }
    return nullptr;
  }

  friend bool operator==(const Scene&, const Scene&) = default;
};

inline Bounds compute_bounds(const std::vector<Trajectory>& trajectories) {
  Bounds b{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
           -std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  bool any = false;
  for (const auto& t : trajectories) {
    for (const auto& o : t.frames) {
      b.min_x = std::min(b.min_x, o.pos.x);
      b.min_y = std::min(b.min_y, o.pos.y);
      b.max_x = std::max(b.max_x, o.pos.x);
      b.max_y = std::max(b.max_y, o.pos.y);
      any = true;
    }
  }
  return any ? b : Bounds{};
}

// Builds a scene from unordered per-pedestrian observations. Duplicate
// (frame, pedestrian) pairs are a DataError.
inline Scene make_scene(std::vector<Trajectory> trajectories, double frame_rate = 0.0) {
  std::sort(trajectories.begin(), trajectories.end(),
            [](const Trajectory& a, const Trajectory& b) { return a.pedestrian_id < b.pedestrian_id; });
  for (std::size_t i = 0; i < trajectories.size(); ++i) {
    auto& t = trajectories[i];
    if (t.frames.empty()) throw DataError("trajectory " + std::to_string(t.pedestrian_id) + " has no frames");
    if (i > 0 && trajectories[i - 1].pedestrian_id == t.pedestrian_id) {
      throw DataError("pedestrian id " + std::to_string(t.pedestrian_id) + " appears in two trajectories");
    }
    std::stable_sort(t.frames.begin(), t.frames.end(),
                     [](const Observation& a, const Observation& b) { return a.frame < b.frame; });
    for (std::size_t k = 1; k < t.frames.size(); ++k) {
      if (t.frames[k].frame == t.frames[k - 1].frame) {
        throw DataError("duplicate observation for pedestrian " + std::to_string(t.pedestrian_id) + " at frame " +
                        std::to_string(t.frames[k].frame));
      }
    }
  }
  Scene s;
  s.bounds = compute_bounds(trajectories);
  s.trajectories = std::move(trajectories);
  s.frame_rate = frame_rate;
  return s;
}

namespace csv {

inline std::vector<std::string_view> split(std::string_view line, char sep = ',') {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline bool parse_int(std::string_view s, std::int64_t& out) {
  s = trim(s);
  if (s.empty()) return false;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && p == s.data() + s.size();
}

inline bool parse_double(std::string_view s, double& out) {
  s = trim(s);
  if (s.empty()) return false;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && p == s.data() + s.size() && std::isfinite(out);
}

}  // namespace csv

enum class TrajectoryFormat { csv };

// Reads `frame_id,pedestrian_id,x,y` rows (header required, any row order).
inline Scene parse_trajectories(std::istream& in, TrajectoryFormat format = TrajectoryFormat::csv) {
  (void)format;
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  std::map<std::int64_t, Trajectory> by_id;
  std::map<std::pair<std::int64_t, std::int64_t>, std::size_t> seen;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = csv::trim(line);
    if (line_no == 1 && view.size() >= 3 && static_cast<unsigned char>(view[0]) == 0xEF) view.remove_prefix(3);
    if (view.empty()) continue;
    if (!header_seen) {
      const auto cols = csv::split(view);
      if (cols.size() != 4 || csv::trim(cols[0]) != "frame_id" || csv::trim(cols[1]) != "pedestrian_id" ||
          csv::trim(cols[2]) != "x" || csv::trim(cols[3]) != "y") {
        throw ParseError(line_no, "expected header 'frame_id,pedestrian_id,x,y'");
      }
      header_seen = true;
      continue;
    }
    const auto cols = csv::split(view);
    if (cols.size() != 4) throw ParseError(line_no, "expected 4 fields, got " + std::to_string(cols.size()));
    std::int64_t frame = 0, ped = 0;
    double x = 0, y = 0;
    if (!csv::parse_int(cols[0], frame)) throw ParseError(line_no, "bad frame_id");
    if (!csv::parse_int(cols[1], ped)) throw ParseError(line_no, "bad pedestrian_id");
    if (!csv::parse_double(cols[2], x)) throw ParseError(line_no, "bad x");
    if (!csv::parse_double(cols[3], y)) throw ParseError(line_no, "bad y");
    auto [it, inserted] = seen.emplace(std::make_pair(frame, ped), line_no);
    if (!inserted) {
      throw DataError("duplicate observation of pedestrian " + std::to_string(ped) + " at frame " +
                      std::to_string(frame) + " (lines " + std::to_string(it->second) + " and " +
                      std::to_string(line_no) + ")");
    }
    auto& traj = by_id[ped];
    traj.pedestrian_id = ped;
    traj.frames.push_back({frame, {x, y}});
  }
  if (!header_seen) throw ParseError(line_no + 1, "missing header 'frame_id,pedestrian_id,x,y'");
  std::vector<Trajectory> trajs;
  trajs.reserve(by_id.size());
  for (auto& [_, t] : by_id) trajs.push_back(std::move(t));
  return make_scene(std::move(trajs));
}

inline Scene parse_trajectories(std::string_view text) {
  std::istringstream in{std::string(text)};
  return parse_trajectories(in);
}

// Rows sorted by (frame, pedestrian); doubles printed with round-trip precision.
inline void write_trajectories(std::ostream& out, const Scene& scene) {
  struct Row {
    std::int64_t frame, ped;
    Point p;
  };
  std::vector<Row> rows;
  for (const auto& t : scene.trajectories) {
    for (const auto& o : t.frames) rows.push_back({o.frame, t.pedestrian_id, o.pos});
  }
  std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
    return a.frame != b.frame ? a.frame < b.frame : a.ped < b.ped;
  });
  out << "frame_id,pedestrian_id,x,y\n";
  char buf[64];
  for (const auto& r : rows) {
    out << r.frame << ',' << r.ped << ',';
    auto res = std::to_chars(buf, buf + sizeof buf, r.p.x);
    out.write(buf, res.ptr - buf);
    out << ',';
    res = std::to_chars(buf, buf + sizeof buf, r.p.y);
    out.write(buf, res.ptr - buf);
    out << '\n';
  }
}

// Drops trajectories shorter than min_length and any with a frame gap.
inline Scene filter_trajectories(const Scene& scene, std::size_t min_length = 40) {
  if (min_length < 2) throw ArgumentError("filter_trajectories: min_length must be at least 2");
  std::vector<Trajectory> kept;
  for (const auto& t : scene.trajectories) {
    if (t.length() >= min_length && t.contiguous()) kept.push_back(t);
  }
  Scene out;
  out.frame_rate = scene.frame_rate;
  out.bounds = compute_bounds(kept);
  out.trajectories = std::move(kept);
  return out;
}

// Uniform scale plus offset mapping the scene bounds into [0,1]^2 with the
// longer side spanning the full unit interval.
struct NormalizationTransform {
  double offset_x = 0.0;
  double offset_y = 0.0;
  double scale = 1.0;  // scene units per normalized unit

  Point apply(Point p) const { return {(p.x - offset_x) / scale, (p.y - offset_y) / scale}; }
  Point invert(Point p) const { return {p.x * scale + offset_x, p.y * scale + offset_y}; }

  PointSeq apply(std::span<const Point> pts) const {
    PointSeq out;
    out.reserve(pts.size());
    for (Point p : pts) out.push_back(apply(p));
    return out;
  }
  PointSeq invert(std::span<const Point> pts) const {
    PointSeq out;
    out.reserve(pts.size());
    for (Point p : pts) out.push_back(invert(p));
    return out;
  }

  static NormalizationTransform identity() { return {}; }

  friend bool operator==(const NormalizationTransform&, const NormalizationTransform&) = default;
};

inline NormalizationTransform fit_normalization(const Bounds& b) {
  const double w = b.max_x - b.min_x;
  const double h = b.max_y - b.min_y;
  const double extent = std::max(w, h);
  if (!(extent > 0.0) || !std::isfinite(extent) || w <= 0.0 || h <= 0.0) {
    throw DataError("degenerate scene: bounds have zero area");
  }
  return {b.min_x, b.min_y, extent};
}

inline Scene apply_normalization(const Scene& scene, const NormalizationTransform& tf) {
  Scene out = scene;
  for (auto& t : out.trajectories) {
    for (auto& o : t.frames) o.pos = tf.apply(o.pos);
  }
  out.bounds = compute_bounds(out.trajectories);
  return out;
}

struct NormalizedScene {
  Scene scene;
  NormalizationTransform transform;
};

inline NormalizedScene normalize(const Scene& scene) {
  const auto tf = fit_normalization(scene.bounds);
  return {apply_normalization(scene, tf), tf};
}

}  // namespace trajattn
