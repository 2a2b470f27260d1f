// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "trajattn/data/trajectory.hpp"
#include "trajattn/errors.hpp"

namespace trajattn {

enum class AdeMode {
  literal,  // squared displacements over n * (T_pred - (T_obs + 1))
  terms,    // squared displacements over the number of summed terms
  root,     // mean Euclidean displacement
};

inline const char* to_string(AdeMode m) {
  switch (m) {
    case AdeMode::literal: return "literal";
    case AdeMode::terms: return "terms";
    case AdeMode::root: return "root";
  }
  return "?";
}

inline AdeMode parse_ade_mode(std::string_view s) {
  if (s == "literal") return AdeMode::literal;
  if (s == "terms") return AdeMode::terms;
  if (s == "root") return AdeMode::root;
  throw ConfigError("unknown metric denominator '" + std::string(s) + "' (expected literal, terms or root)");
}

inline constexpr double kDefaultCurvatureThreshold = 1e-2;

namespace detail {

inline std::size_t check_metric_inputs(std::span<const PointSeq> predicted, std::span<const PointSeq> truth) {
  if (predicted.empty()) throw ArgumentError("metric: no instances");
  if (predicted.size() != truth.size()) throw ArgumentError("metric: instance counts differ");
  const std::size_t len = predicted[0].size();
  if (len == 0) throw ArgumentError("metric: empty prediction");
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    if (predicted[i].size() != len || truth[i].size() != len) {
      throw ArgumentError("metric: all sequences must have T_pred - T_obs points");
    }
  }
  return len;
}

inline double squared(Point d) { return d.x * d.x + d.y * d.y; }

}  // namespace detail

// Average displacement error. With AdeMode::literal the denominator is
// n * (T_pred - (T_obs + 1)), one less than the number of summed terms per
// instance; a horizon of one step is rejected in that mode.
inline double ade(std::span<const PointSeq> predicted, std::span<const PointSeq> truth,
                  AdeMode mode = AdeMode::literal) {
  const std::size_t len = detail::check_metric_inputs(predicted, truth);
  double s = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    for (std::size_t t = 0; t < len; ++t) {
      const double sq = detail::squared(predicted[i][t] - truth[i][t]);
      s += mode == AdeMode::root ? std::sqrt(sq) : sq;
    }
  }
  const double n = static_cast<double>(predicted.size());
  if (mode == AdeMode::literal) {
    if (len < 2) throw ArgumentError("ade: literal denominator is zero for a one-step horizon");
    return s / (n * static_cast<double>(len - 1));
  }
  return s / (n * static_cast<double>(len));
}

// Mean Euclidean distance at the final predicted step.
inline double fde(std::span<const PointSeq> predicted, std::span<const PointSeq> truth) {
  const std::size_t len = detail::check_metric_inputs(predicted, truth);
  double s = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) s += distance(predicted[i][len - 1], truth[i][len - 1]);
  return s / static_cast<double>(predicted.size());
}

// Curvature of a polyline at each point from central differences in the
// step index: |x'y'' - y'x''| / |p'|^3. End points and points with no
// motion get 0.
inline std::vector<double> curvature(std::span<const Point> pts) {
  std::vector<double> k(pts.size(), 0.0);
  for (std::size_t t = 1; t + 1 < pts.size(); ++t) {
    const Point d1 = 0.5 * (pts[t + 1] - pts[t - 1]);
    const Point d2 = pts[t + 1] - 2.0 * pts[t] + pts[t - 1];
    const double speed = norm(d1);
    if (!(speed > 0.0)) continue;
    k[t] = std::abs(cross(d1, d2)) / (speed * speed * speed);
  }
  return k;
}

inline std::vector<bool> nonlinear_indicator(std::span<const Point> pts,
                                             double threshold = kDefaultCurvatureThreshold) {
  const auto k = curvature(pts);
  std::vector<bool> out(k.size());
  for (std::size_t t = 0; t < k.size(); ++t) out[t] = k[t] > threshold;
  return out;
}

// Squared-displacement average over predicted points flagged as nonlinear.
// Empty when no point is flagged.
inline std::optional<double> nade(std::span<const PointSeq> predicted, std::span<const PointSeq> truth,
                                  double curvature_threshold = kDefaultCurvatureThreshold) {
  const std::size_t len = detail::check_metric_inputs(predicted, truth);
  double s = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const auto ind = nonlinear_indicator(predicted[i], curvature_threshold);
    for (std::size_t t = 0; t < len; ++t) {
      if (!ind[t]) continue;
      s += detail::squared(predicted[i][t] - truth[i][t]);
      ++count;
    }
  }
  if (count == 0) return std::nullopt;
  return s / static_cast<double>(count);
}

// Extrapolates the last observed step.
inline PointSeq constant_velocity(std::span<const Point> observed, std::size_t horizon) {
  if (observed.size() < 2) throw ArgumentError("constant_velocity: need at least 2 observed points");
  const Point v = observed.back() - observed[observed.size() - 2];
  PointSeq out;
  out.reserve(horizon);
  Point p = observed.back();
  for (std::size_t t = 0; t < horizon; ++t) {
    p = p + v;
    out.push_back(p);
  }
  return out;
}

}  // namespace trajattn
