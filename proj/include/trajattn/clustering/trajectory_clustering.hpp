// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "trajattn/clustering/dbscan.hpp"
#include "trajattn/data/trajectory.hpp"
#include "trajattn/errors.hpp"

namespace trajattn {

enum class ClusterFeatures {
  entry_exit,  // first and last position
  resampled,   // whole track resampled to a fixed number of points
};

inline constexpr std::size_t kResamplePoints = 8;

struct ClusterDescriptor {
  int cluster_id = 0;
  PointSeq centroid_observed;
  std::size_t member_count = 0;

  friend bool operator==(const ClusterDescriptor&, const ClusterDescriptor&) = default;
};

inline Vector entry_exit_features(const Trajectory& traj) {
  if (traj.length() < 2) throw ArgumentError("entry_exit_features: trajectory needs at least 2 points");
  const Point a = traj.frames.front().pos, b = traj.frames.back().pos;
  return {a.x, a.y, b.x, b.y};
}

// k points spaced evenly in frame index, linearly interpolated. Scaled by
// sqrt(2/k) so distances are on the same footing as entry/exit features.
inline Vector resampled_features(const Trajectory& traj, std::size_t k = kResamplePoints) {
  if (traj.length() < 2) throw ArgumentError("resampled_features: trajectory needs at least 2 points");
  if (k < 2) throw ArgumentError("resampled_features: need at least 2 samples");
  const double w = std::sqrt(2.0 / static_cast<double>(k));
  const double last = static_cast<double>(traj.length() - 1);
  Vector out;
  out.reserve(2 * k);
  for (std::size_t i = 0; i < k; ++i) {
    const double u = last * static_cast<double>(i) / static_cast<double>(k - 1);
    const auto lo = static_cast<std::size_t>(std::floor(u));
    const std::size_t hi = std::min(lo + 1, traj.length() - 1);
    const double f = u - static_cast<double>(lo);
    const Point p = traj.frames[lo].pos + f * (traj.frames[hi].pos - traj.frames[lo].pos);
    out.push_back(w * p.x);
    out.push_back(w * p.y);
  }
  return out;
}

inline Vector trajectory_features(const Trajectory& traj, ClusterFeatures mode) {
  return mode == ClusterFeatures::entry_exit ? entry_exit_features(traj) : resampled_features(traj);
}

struct TrajectoryClustering {
  std::vector<std::int64_t> pedestrian_ids;  // scene order
  ClusterAssignment assignment;              // parallel to pedestrian_ids
  std::vector<ClusterDescriptor> descriptors;

  int label_of(std::int64_t id) const {
    for (std::size_t i = 0; i < pedestrian_ids.size(); ++i) {
      if (pedestrian_ids[i] == id) return assignment.labels[i];
    }
    throw ArgumentError("unknown pedestrian id " + std::to_string(id));
  }
};

// Clusters the scene's tracks and builds one descriptor per cluster whose
// centroid is the pointwise mean of the members' first t_obs points.
inline TrajectoryClustering cluster_training_set(const Scene& scene, const DbscanConfig& config, std::size_t t_obs,
                                                 ClusterFeatures mode = ClusterFeatures::entry_exit) {
  if (t_obs == 0) throw ArgumentError("cluster_training_set: t_obs must be positive");
  TrajectoryClustering out;
  std::vector<Vector> feats;
  for (const auto& t : scene.trajectories) {
    if (t.length() < t_obs) throw DataError("cluster_training_set: track " + std::to_string(t.pedestrian_id) +
                                            " is shorter than T_obs");
    out.pedestrian_ids.push_back(t.pedestrian_id);
    feats.push_back(trajectory_features(t, mode));
  }
  out.assignment = dbscan(feats, config);
  if (out.assignment.cluster_count == 0) {
    throw ConfigError("clustering found no clusters; try a larger dbscan eps or a smaller min_pts");
  }
  out.descriptors.resize(static_cast<std::size_t>(out.assignment.cluster_count));
  for (int k = 0; k < out.assignment.cluster_count; ++k) {
    auto& d = out.descriptors[static_cast<std::size_t>(k)];
    d.cluster_id = k;
    d.centroid_observed.assign(t_obs, Point{});
  }
  for (std::size_t i = 0; i < scene.trajectories.size(); ++i) {
    const int k = out.assignment.labels[i];
    if (k == kNoise) continue;
    auto& d = out.descriptors[static_cast<std::size_t>(k)];
    for (std::size_t j = 0; j < t_obs; ++j) {
      d.centroid_observed[j] = d.centroid_observed[j] + scene.trajectories[i].frames[j].pos;
    }
    ++d.member_count;
  }
  for (auto& d : out.descriptors) {
    const double inv = 1.0 / static_cast<double>(d.member_count);
    for (auto& p : d.centroid_observed) p = inv * p;
  }
  return out;
}

// Closest descriptor by summed pointwise distance; ties go to the lower id.
inline int assign_cluster(std::span<const Point> observed, std::span<const ClusterDescriptor> descriptors) {
  if (descriptors.empty()) throw ArgumentError("assign_cluster: no cluster descriptors");
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  bool found = false;
  for (const auto& d : descriptors) {
    if (d.centroid_observed.size() != observed.size()) {
      throw ShapeError("assign_cluster: centroid length differs from observed length");
    }
    double s = 0.0;
    for (std::size_t j = 0; j < observed.size(); ++j) s += distance(observed[j], d.centroid_observed[j]);
    if (!found || s < best_d || (s == best_d && d.cluster_id < best)) {
      best = d.cluster_id;
      best_d = s;
      found = true;
    }
  }
  return best;
}

inline void write_cluster_csv(std::ostream& os, const TrajectoryClustering& c) {
  os << "pedestrian_id,cluster_id\n";
  for (std::size_t i = 0; i < c.pedestrian_ids.size(); ++i) {
    os << c.pedestrian_ids[i] << ',' << c.assignment.labels[i] << '\n';
  }
}

}  // namespace trajattn
