// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <deque>
#include <span>
#include <vector>

#include "trajattn/errors.hpp"
#include "trajattn/numerics/linalg.hpp"

namespace trajattn {

struct DbscanConfig {
  double eps = 0.08;
  std::size_t min_pts = 5;
};

inline void validate(const DbscanConfig& c) {
  if (!(c.eps > 0.0) || !std::isfinite(c.eps)) throw ConfigError("dbscan eps must be positive");
  if (c.min_pts == 0) throw ConfigError("dbscan min_pts must be positive");
}

inline constexpr int kNoise = -1;

struct ClusterAssignment {
  std::vector<int> labels;  // kNoise or 0..cluster_count-1
  int cluster_count = 0;
};

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

// Classic DBSCAN with Euclidean distance. A point is core when at least
// min_pts points (itself included) lie within eps. Points are scanned in
// input order; each unlabelled core seeds a cluster that is expanded
// breadth-first, so a border point reachable from several clusters joins the
// one discovered first.
inline ClusterAssignment dbscan(std::span<const Vector> points, const DbscanConfig& config) {
  validate(config);
  const std::size_t n = points.size();
  if (n > 0) {
    const std::size_t dim = points[0].size();
    for (const auto& p : points) {
      if (p.size() != dim) throw ArgumentError("dbscan: points have different dimensions");
    }
  }
  const double eps2 = config.eps * config.eps;
  // Pairwise neighbour lists; n is small at the scales this is used for.
  std::vector<std::vector<std::size_t>> neighbors(n);
  for (std::size_t i = 0; i < n; ++i) {
    neighbors[i].push_back(i);
    for (std::size_t j = i + 1; j < n; ++j) {
      if (squared_distance(points[i], points[j]) <= eps2) {
        neighbors[i].push_back(j);
        neighbors[j].push_back(i);
      }
    }
  }
  constexpr int kUnvisited = -2;
  ClusterAssignment out;
  out.labels.assign(n, kUnvisited);
  for (std::size_t i = 0; i < n; ++i) {
    if (out.labels[i] != kUnvisited) continue;
    if (neighbors[i].size() < config.min_pts) {
      out.labels[i] = kNoise;
      continue;
    }
    const int cluster = out.cluster_count++;
    out.labels[i] = cluster;
    std::deque<std::size_t> frontier(neighbors[i].begin(), neighbors[i].end());
    while (!frontier.empty()) {
      const std::size_t q = frontier.front();
      frontier.pop_front();
      if (out.labels[q] == kNoise) out.labels[q] = cluster;  // border point
      if (out.labels[q] != kUnvisited) continue;
      out.labels[q] = cluster;
      if (neighbors[q].size() >= config.min_pts) {
        frontier.insert(frontier.end(), neighbors[q].begin(), neighbors[q].end());
      }
    }
  }
  return out;
}

// Distance from each point to its k-th nearest other point.
inline std::vector<double> kth_neighbor_distances(std::span<const Vector> points, std::size_t k) {
  const std::size_t n = points.size();
  std::vector<double> out(n, 0.0);
  if (n < 2 || k == 0) return out;
  std::vector<double> d;
  for (std::size_t i = 0; i < n; ++i) {
    d.clear();
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) d.push_back(squared_distance(points[i], points[j]));
    }
    const std::size_t kk = std::min(k, d.size()) - 1;
    std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(kk), d.end());
    out[i] = std::sqrt(d[kk]);
  }
  return out;
}

}  // namespace trajattn
