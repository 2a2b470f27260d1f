// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <vector>

#include "trajattn/data/trajectory.hpp"
#include "trajattn/errors.hpp"
#include "trajattn/model/hardwired.hpp"

namespace trajattn {

enum class Direction { front = 0, left = 1, right = 2 };

inline constexpr std::size_t kDirections = 3;
inline constexpr std::size_t kSlotsPerDirection = 10;
inline constexpr std::size_t kNeighborSlots = kDirections * kSlotsPerDirection;

inline const char* to_string(Direction d) {
  switch (d) {
    case Direction::front: return "front";
    case Direction::left: return "left";
    case Direction::right: return "right";
  }
  return "?";
}

struct NeighborSlot {
  Direction direction = Direction::front;
  PointSeq trajectory;              // one point per observed frame
  std::vector<double> weights;      // hardwired weights, all zero for dummies
  bool is_dummy = true;
  std::vector<std::int64_t> sources;  // contributing pedestrian ids; several for the mean slot
};

// Fixed 3 x 10 slot layout: slots [10*d, 10*d + 10) belong to direction d,
// ordered closest first, the mean-of-remainder slot (if any) last among the
// real ones, then dummies.
struct NeighborhoodTensor {
  std::array<NeighborSlot, kNeighborSlots> slots;

  std::size_t real_count() const {
    return static_cast<std::size_t>(
        std::count_if(slots.begin(), slots.end(), [](const NeighborSlot& s) { return !s.is_dummy; }));
  }

  std::size_t real_count(Direction d) const {
    std::size_t n = 0;
    for (std::size_t k = 0; k < kSlotsPerDirection; ++k) {
      n += slots[static_cast<std::size_t>(d) * kSlotsPerDirection + k].is_dummy ? 0 : 1;
    }
    return n;
  }

  // All dummies, each holding the target's own positions.
  static NeighborhoodTensor empty(std::span<const Point> target) {
    NeighborhoodTensor n;
    for (std::size_t i = 0; i < kNeighborSlots; ++i) {
      auto& s = n.slots[i];
      s.direction = static_cast<Direction>(i / kSlotsPerDirection);
      s.trajectory.assign(target.begin(), target.end());
      s.weights.assign(target.size(), 0.0);
      s.is_dummy = true;
    }
    return n;
  }
};

struct FrameWindow {
  std::int64_t first_frame = 0;
  std::size_t length = 0;
};

namespace detail {

// Position at `frame`, holding the nearest earlier observation (or the
// first one when the track starts later).
inline Point held_position(const Trajectory& t, std::int64_t frame) {
  auto it = std::upper_bound(t.frames.begin(), t.frames.end(), frame,
                             [](std::int64_t f, const Observation& o) { return f < o.frame; });
  if (it == t.frames.begin()) return t.frames.front().pos;
  return std::prev(it)->pos;
}

inline std::size_t overlap(const Trajectory& t, FrameWindow w) {
  const std::int64_t end = w.first_frame + static_cast<std::int64_t>(w.length);
  auto lo = std::lower_bound(t.frames.begin(), t.frames.end(), w.first_frame,
                             [](const Observation& o, std::int64_t f) { return o.frame < f; });
  auto hi = std::lower_bound(lo, t.frames.end(), end, [](const Observation& o, std::int64_t f) { return o.frame < f; });
  return static_cast<std::size_t>(hi - lo);
}

inline std::optional<Direction> sector(Point heading, Point offset) {
  const double angle = std::atan2(cross(heading, offset), dot(heading, offset)) * 180.0 / std::numbers::pi;
  if (std::abs(angle) <= 45.0) return Direction::front;
  if (angle > 45.0 && angle <= 135.0) return Direction::left;
  if (angle >= -135.0 && angle < -45.0) return Direction::right;
  return std::nullopt;
}

}  // namespace detail

// Target points for the window; throws if the target does not cover it
// without gaps.
inline PointSeq window_points(const Trajectory& target, FrameWindow window) {
  auto it = std::lower_bound(target.frames.begin(), target.frames.end(), window.first_frame,
                             [](const Observation& o, std::int64_t f) { return o.frame < f; });
  const auto offset = static_cast<std::size_t>(it - target.frames.begin());
  if (window.length == 0 || it == target.frames.end() || it->frame != window.first_frame ||
      offset + window.length > target.frames.size() ||
      target.frames[offset + window.length - 1].frame !=
          window.first_frame + static_cast<std::int64_t>(window.length) - 1) {
    throw ArgumentError("build_neighborhood: target does not cover the window");
  }
  return target.slice(offset, window.length);
}

// Direction of travel over the window (unit vector, +x when stationary).
inline Point mean_heading(std::span<const Point> pts) {
  if (pts.size() < 2) return {1.0, 0.0};
  const Point d = pts.back() - pts.front();
  const double n = norm(d);
  if (!(n > 1e-12)) return {1.0, 0.0};
  return {d.x / n, d.y / n};
}

// Fills the 3 x 10 neighbour slots for `target` over `window`. Candidates
// must be present for at least half the window; missing frames hold the last
// seen position. Sectors are taken from the mean offset relative to the
// target's heading: front within +-45 deg, left (45, 135], right [-135, -45),
// the rear is dropped. Ranking is by mean distance, ties by lower id.
inline NeighborhoodTensor build_neighborhood(const Scene& scene, const Trajectory& target, FrameWindow window,
                                             double min_distance = kDefaultMinDistance) {
  const PointSeq tpts = window_points(target, window);
  const Point heading = mean_heading(tpts);
  Point tmean{};
  for (Point p : tpts) tmean = tmean + p;
  tmean = (1.0 / static_cast<double>(tpts.size())) * tmean;

  struct Candidate {
    std::int64_t id;
    double dist;
    PointSeq pts;
  };
  std::array<std::vector<Candidate>, kDirections> buckets;
  for (const auto& other : scene.trajectories) {
    if (other.pedestrian_id == target.pedestrian_id) continue;
    if (2 * detail::overlap(other, window) < window.length) continue;
    Candidate c{other.pedestrian_id, 0.0, {}};
    c.pts.reserve(window.length);
    Point cmean{};
    for (std::size_t j = 0; j < window.length; ++j) {
      const Point p = detail::held_position(other, window.first_frame + static_cast<std::int64_t>(j));
      c.pts.push_back(p);
      cmean = cmean + p;
      c.dist += distance(p, tpts[j]);
    }
    c.dist /= static_cast<double>(window.length);
    cmean = (1.0 / static_cast<double>(window.length)) * cmean;
    const auto dir = detail::sector(heading, cmean - tmean);
    if (!dir) continue;
    buckets[static_cast<std::size_t>(*dir)].push_back(std::move(c));
  }

  NeighborhoodTensor out = NeighborhoodTensor::empty(tpts);
  for (std::size_t d = 0; d < kDirections; ++d) {
    auto& cands = buckets[d];
    std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
      return a.dist != b.dist ? a.dist < b.dist : a.id < b.id;
    });
    const bool overflow = cands.size() > kSlotsPerDirection;
    const std::size_t direct = overflow ? kSlotsPerDirection - 1 : cands.size();
    for (std::size_t k = 0; k < direct; ++k) {
      auto& slot = out.slots[d * kSlotsPerDirection + k];
      slot.trajectory = std::move(cands[k].pts);
      slot.weights = hardwired_weights(tpts, slot.trajectory, min_distance);
      slot.is_dummy = false;
      slot.sources = {cands[k].id};
    }
    if (overflow) {
      auto& slot = out.slots[d * kSlotsPerDirection + kSlotsPerDirection - 1];
      PointSeq mean(window.length);
      const double inv = 1.0 / static_cast<double>(cands.size() - direct);
      for (std::size_t k = direct; k < cands.size(); ++k) {
        for (std::size_t j = 0; j < window.length; ++j) mean[j] = mean[j] + cands[k].pts[j];
        slot.sources.push_back(cands[k].id);
      }
      for (auto& p : mean) p = inv * p;
      slot.trajectory = std::move(mean);
      slot.weights = hardwired_weights(tpts, slot.trajectory, min_distance);
      slot.is_dummy = false;
    }
  }
  return out;
}

struct TrainingInstance {
  std::int64_t pedestrian_id = 0;
  std::int64_t start_frame = 0;
  PointSeq observed;  // T_obs points
  PointSeq future;    // T_pred - T_obs points
  NeighborhoodTensor neighborhood;
  std::optional<int> cluster_id;
};

enum class WindowPolicy {
  sliding,  // every stride-th window
  first,    // only the window starting at each track's first frame
};

struct InstanceOptions {
  std::size_t t_obs = 20;
  std::size_t t_pred = 40;
  std::size_t stride = 1;
  WindowPolicy policy = WindowPolicy::sliding;
  double min_distance = kDefaultMinDistance;
};

inline void validate(const InstanceOptions& o) {
  if (o.t_obs < 2) throw ArgumentError("T_obs must be at least 2");
  if (o.t_pred <= o.t_obs) throw ArgumentError("T_pred must exceed T_obs");
  if (o.stride < 1) throw ArgumentError("stride must be at least 1");
}

// Windows of T_pred frames that stay inside a contiguous run of frames.
inline std::vector<FrameWindow> instance_windows(const Trajectory& t, const InstanceOptions& opts) {
  std::vector<FrameWindow> out;
  std::size_t run_start = 0;
  for (std::size_t i = 1; i <= t.frames.size(); ++i) {
    if (i < t.frames.size() && t.frames[i].frame - t.frames[i - 1].frame == 1) continue;
    const std::size_t run_len = i - run_start;
    if (run_len >= opts.t_pred) {
      for (std::size_t s = run_start; s + opts.t_pred <= i; s += opts.stride) {
        out.push_back({t.frames[s].frame, opts.t_pred});
        if (opts.policy == WindowPolicy::first) return out;
      }
    }
    if (opts.policy == WindowPolicy::first && !out.empty()) return out;
    run_start = i;
  }
  return out;
}

inline TrainingInstance make_instance(const Scene& scene, const Trajectory& t, FrameWindow window,
                                      const InstanceOptions& opts) {
  const PointSeq pts = window_points(t, window);
  TrainingInstance inst;
  inst.pedestrian_id = t.pedestrian_id;
  inst.start_frame = window.first_frame;
  inst.observed.assign(pts.begin(), pts.begin() + static_cast<std::ptrdiff_t>(opts.t_obs));
  inst.future.assign(pts.begin() + static_cast<std::ptrdiff_t>(opts.t_obs), pts.end());
  inst.neighborhood = build_neighborhood(scene, t, {window.first_frame, opts.t_obs}, opts.min_distance);
  return inst;
}

inline std::vector<TrainingInstance> make_instances(const Scene& scene, const InstanceOptions& opts) {
  validate(opts);
  std::vector<TrainingInstance> out;
  for (const auto& t : scene.trajectories) {
    for (const auto& w : instance_windows(t, opts)) out.push_back(make_instance(scene, t, w, opts));
  }
  return out;
}

inline std::vector<TrainingInstance> make_instances(const Scene& scene, std::size_t t_obs, std::size_t t_pred,
                                                    std::size_t stride) {
  return make_instances(scene, InstanceOptions{t_obs, t_pred, stride});
}

}  // namespace trajattn
