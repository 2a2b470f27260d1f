// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <span>
#include <vector>

#include "trajattn/data/trajectory.hpp"
#include "trajattn/errors.hpp"

namespace trajattn {

// Distance floor for the inverse-distance weights, in normalized units.
inline constexpr double kDefaultMinDistance = 0.01;

// w_j = 1 / max(dist_j, min_distance) where dist_j is the distance between
// the two tracks at step j.
inline std::vector<double> hardwired_weights(std::span<const Point> target, std::span<const Point> neighbor,
                                             double min_distance = kDefaultMinDistance) {
  if (target.size() != neighbor.size()) throw ShapeError("hardwired_weights: sequence lengths differ");
  if (!(min_distance > 0.0)) throw ArgumentError("hardwired_weights: min_distance must be positive");
  std::vector<double> w(target.size());
  for (std::size_t j = 0; j < target.size(); ++j) {
    w[j] = 1.0 / std::max(distance(target[j], neighbor[j]), min_distance);
  }
  return w;
}

}  // namespace trajattn
