// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "trajattn/data/trajectory.hpp"
#include "trajattn/errors.hpp"
#include "trajattn/numerics/random.hpp"

namespace trajattn {

// Entry point, optional intermediate waypoints, exit point (scene units).
struct Route {
  Point entry;
  std::vector<Point> waypoints;
  Point exit;
};

struct SynthConfig {
  std::size_t n_pedestrians = 200;
  std::size_t n_frames = 1200;
  // Preset name (corridor, crossing, junction) or explicit routes
  // "x,y>x,y[>x,y...];..." listing entry, waypoints and exit.
  std::string zone_layout = "crossing";
  double interaction_strength = 1.0;
  std::uint64_t seed = 1;
  double frame_rate = 4.0;
  double scene_width = 30.0;
  double scene_height = 20.0;
  double zone_radius = 1.0;
  double speed_mean = 1.3;
  double speed_std = 0.15;
  double anomaly_rate = 0.0;
  double anomaly_speed_factor = 2.5;
  double anomaly_turn_share = 0.5;  // fraction of anomalies that are sudden turns
  std::size_t anomaly_onset_min = 5;
  std::size_t anomaly_onset_max = 30;
};

enum class AnomalyKind { none, velocity, turn };

struct PedestrianLabel {
  std::int64_t pedestrian_id = 0;
  bool abnormal = false;
  AnomalyKind kind = AnomalyKind::none;
  std::size_t route = 0;

  friend bool operator==(const PedestrianLabel&, const PedestrianLabel&) = default;
};

struct SynthResult {
  Scene scene;
  std::vector<PedestrianLabel> labels;  // one per pedestrian, id order
  std::vector<Route> routes;
};

namespace detail {

inline std::vector<Route> preset_routes(const std::string& name, double w, double h) {
  const Point left{0.05 * w, 0.5 * h}, right{0.95 * w, 0.5 * h};
  const Point bottom{0.5 * w, 0.05 * h}, top{0.5 * w, 0.95 * h};
  if (name == "corridor") return {{left, {}, right}, {right, {}, left}};
  if (name == "crossing") return {{left, {}, right}, {right, {}, left}, {bottom, {}, top}, {top, {}, bottom}};
  if (name == "junction") {
    // Two straight flows plus two turning flows through the centre region.
    const Point c1{0.5 * w, 0.5 * h};
    return {{left, {}, right}, {right, {}, left}, {left, {c1}, top}, {bottom, {c1}, right}};
  }
  throw ConfigError("unknown zone_layout preset '" + name + "'");
}

inline Point parse_point(const std::string& s, const std::string& layout) {
  const auto comma = s.find(',');
  double x = 0, y = 0;
  if (comma == std::string::npos || !csv::parse_double(std::string_view(s).substr(0, comma), x) ||
      !csv::parse_double(std::string_view(s).substr(comma + 1), y)) {
    throw ConfigError("invalid zone_layout '" + layout + "': bad point '" + s + "'");
  }
  return {x, y};
}

inline std::vector<Route> parse_routes(const std::string& layout, double w, double h) {
  if (layout.find('>') == std::string::npos) return preset_routes(layout, w, h);
  std::vector<Route> routes;
  for (auto part : csv::split(layout, ';')) {
    const std::string route_text(csv::trim(part));
    if (route_text.empty()) continue;
    std::vector<Point> pts;
    for (auto p : csv::split(route_text, '>')) pts.push_back(parse_point(std::string(csv::trim(p)), layout));
    if (pts.size() < 2) throw ConfigError("invalid zone_layout '" + layout + "': route needs entry and exit");
    Route r;
    r.entry = pts.front();
    r.exit = pts.back();
    r.waypoints.assign(pts.begin() + 1, pts.end() - 1);
    routes.push_back(std::move(r));
  }
  if (routes.empty()) throw ConfigError("invalid zone_layout '" + layout + "': no routes");
  return routes;
}

inline void validate_routes(const std::vector<Route>& routes, const SynthConfig& c) {
  auto inside = [&](Point p) { return p.x >= 0 && p.y >= 0 && p.x <= c.scene_width && p.y <= c.scene_height; };
  for (const auto& r : routes) {
    if (!inside(r.entry) || !inside(r.exit)) throw ConfigError("invalid zone_layout: zone outside the scene");
    for (Point p : r.waypoints) {
      if (!inside(p)) throw ConfigError("invalid zone_layout: waypoint outside the scene");
    }
    if (distance(r.entry, r.exit) <= 2.0 * c.zone_radius) {
      throw ConfigError("invalid zone_layout: entry and exit zones overlap");
    }
  }
}

inline Point jitter_in_disc(Point c, double radius, Rng& rng) {
  const double r = radius * std::sqrt(rng.uniform());
  const double a = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
  return {c.x + r * std::cos(a), c.y + r * std::sin(a)};
}

}  // namespace detail

inline void validate(const SynthConfig& c) {
  if (c.n_pedestrians == 0) throw ConfigError("n_pedestrians must be positive");
  if (c.n_frames < 2) throw ConfigError("n_frames must be at least 2");
  if (!(c.frame_rate > 0)) throw ConfigError("frame_rate must be positive");
  if (!(c.scene_width > 0) || !(c.scene_height > 0)) throw ConfigError("scene size must be positive");
  if (!(c.zone_radius >= 0)) throw ConfigError("zone_radius must be non-negative");
  if (!(c.speed_mean > 0) || !(c.speed_std >= 0)) throw ConfigError("invalid walking speed distribution");
  if (!(c.interaction_strength >= 0)) throw ConfigError("interaction_strength must be non-negative");
  if (!(c.anomaly_rate >= 0 && c.anomaly_rate <= 1)) throw ConfigError("anomaly_rate must lie in [0, 1]");
  if (!(c.anomaly_speed_factor > 0)) throw ConfigError("anomaly_speed_factor must be positive");
  if (!(c.anomaly_turn_share >= 0 && c.anomaly_turn_share <= 1)) throw ConfigError("anomaly_turn_share must lie in [0, 1]");
  if (c.anomaly_onset_min > c.anomaly_onset_max) throw ConfigError("anomaly_onset_min exceeds anomaly_onset_max");
  detail::validate_routes(detail::parse_routes(c.zone_layout, c.scene_width, c.scene_height), c);
}

// Goal-directed walkers with exponential pairwise repulsion, integrated at
// four substeps per frame. With interaction_strength 0 each walker moves on a
// straight line at constant velocity until the next waypoint.
inline SynthResult synth_generate(const SynthConfig& cfg) {
  validate(cfg);
  const auto routes = detail::parse_routes(cfg.zone_layout, cfg.scene_width, cfg.scene_height);
  Rng rng(cfg.seed);

  constexpr double kRelaxation = 0.5;     // s
  constexpr double kRepulsion = 6.0;      // m/s^2
  constexpr double kRange = 0.6;          // m
  constexpr double kBodyDiameter = 0.6;   // m
  constexpr double kAnisotropy = 0.4;
  constexpr double kArrivalRadius = 0.5;  // m
  constexpr double kWaypointRadius = 1.5; // m
  constexpr int kSubsteps = 4;

  struct Walker {
    std::int64_t id;
    std::size_t route;
    std::size_t spawn_frame;
    Point pos, vel;
    std::vector<Point> targets;
    std::size_t next_target = 0;
    double speed;
    AnomalyKind anomaly = AnomalyKind::none;
    std::size_t onset = 0;  // frames after spawn
    bool anomaly_applied = false;
    bool active = false;
    bool done = false;
    std::vector<Observation> track;
  };

  const std::size_t spawn_window = std::max<std::size_t>(1, cfg.n_frames * 3 / 4);
  std::vector<Walker> walkers;
  walkers.reserve(cfg.n_pedestrians);
  for (std::size_t i = 0; i < cfg.n_pedestrians; ++i) {
    Walker w;
    w.id = static_cast<std::int64_t>(i + 1);
    w.route = static_cast<std::size_t>(rng.below(routes.size()));
    w.spawn_frame = static_cast<std::size_t>(rng.below(spawn_window));
    const Route& r = routes[w.route];
    w.pos = detail::jitter_in_disc(r.entry, cfg.zone_radius, rng);
    for (Point p : r.waypoints) w.targets.push_back(detail::jitter_in_disc(p, cfg.zone_radius, rng));
    w.targets.push_back(detail::jitter_in_disc(r.exit, cfg.zone_radius, rng));
    w.speed = std::clamp(rng.normal(cfg.speed_mean, cfg.speed_std), 0.3 * cfg.speed_mean, 2.0 * cfg.speed_mean);
    if (rng.bernoulli(cfg.anomaly_rate)) {
      w.anomaly = rng.bernoulli(cfg.anomaly_turn_share) ? AnomalyKind::turn : AnomalyKind::velocity;
      w.onset = cfg.anomaly_onset_min +
                static_cast<std::size_t>(rng.below(cfg.anomaly_onset_max - cfg.anomaly_onset_min + 1));
    }
    walkers.push_back(std::move(w));
  }
  // Turn targets drawn up front so the stream does not depend on dynamics.
  std::vector<Point> turn_goal(walkers.size());
  for (std::size_t i = 0; i < walkers.size(); ++i) {
    if (walkers[i].anomaly != AnomalyKind::turn) continue;
    std::size_t other = static_cast<std::size_t>(rng.below(routes.size()));
    if (routes.size() > 1 && other == walkers[i].route) other = (other + 1) % routes.size();
    Point g = routes[other].exit;
    if (routes.size() == 1 || distance(g, routes[walkers[i].route].exit) < 1e-9) g = routes[other].entry;
    turn_goal[i] = detail::jitter_in_disc(g, cfg.zone_radius, rng);
  }

  const double dt = 1.0 / cfg.frame_rate / kSubsteps;
  auto desired = [&](const Walker& w) {
    const Point d = w.targets[w.next_target] - w.pos;
    const double n = norm(d);
    return n > 1e-12 ? (1.0 / n) * d : Point{0.0, 0.0};
  };

  for (std::size_t frame = 0; frame < cfg.n_frames; ++frame) {
    for (std::size_t i = 0; i < walkers.size(); ++i) {
      auto& w = walkers[i];
      if (w.done || w.active || w.spawn_frame != frame) continue;
      w.active = true;
      w.vel = w.speed * desired(w);
    }
    for (std::size_t i = 0; i < walkers.size(); ++i) {
      auto& w = walkers[i];
      if (!w.active) continue;
      const std::size_t age = frame - w.spawn_frame;
      if (w.anomaly != AnomalyKind::none && age == w.onset) {
        w.anomaly_applied = true;
        if (w.anomaly == AnomalyKind::velocity) {
          w.speed *= cfg.anomaly_speed_factor;
        } else {
          w.targets = {turn_goal[i]};
          w.next_target = 0;
        }
        w.vel = w.speed * desired(w);
      }
    }
    for (int sub = 0; sub < kSubsteps; ++sub) {
      std::vector<Point> accel(walkers.size());
      for (std::size_t i = 0; i < walkers.size(); ++i) {
        const auto& w = walkers[i];
        if (!w.active) continue;
        Point a = (1.0 / kRelaxation) * (w.speed * desired(w) - w.vel);
        if (cfg.interaction_strength > 0) {
          const double vn = norm(w.vel);
          for (std::size_t j = 0; j < walkers.size(); ++j) {
            if (j == i || !walkers[j].active) continue;
            const Point diff = w.pos - walkers[j].pos;
            const double d = norm(diff);
            if (d < 1e-9 || d > 8.0) continue;
            const Point n = (1.0 / d) * diff;
            const double cos_phi = vn > 1e-9 ? -dot(n, w.vel) / vn : 0.0;
            const double aniso = kAnisotropy + (1.0 - kAnisotropy) * 0.5 * (1.0 + cos_phi);
            const double mag = cfg.interaction_strength * kRepulsion * std::exp((kBodyDiameter - d) / kRange) * aniso;
            a = a + mag * n;
          }
        }
        accel[i] = a;
      }
      for (std::size_t i = 0; i < walkers.size(); ++i) {
        auto& w = walkers[i];
        if (!w.active) continue;
        w.vel = w.vel + dt * accel[i];
        const double vn = norm(w.vel);
        const double cap = 1.5 * w.speed;
        if (vn > cap) w.vel = (cap / vn) * w.vel;
        w.pos = w.pos + dt * w.vel;
      }
    }
    for (auto& w : walkers) {
      if (!w.active) continue;
      w.pos.x = std::clamp(w.pos.x, 0.0, cfg.scene_width);
      w.pos.y = std::clamp(w.pos.y, 0.0, cfg.scene_height);
      w.track.push_back({static_cast<std::int64_t>(frame), w.pos});
      const bool last = w.next_target + 1 == w.targets.size();
      const double reach = last ? kArrivalRadius : kWaypointRadius;
      if (distance(w.pos, w.targets[w.next_target]) < reach) {
        if (last) {
          w.active = false;
          w.done = true;
        } else {
          ++w.next_target;
        }
      }
    }
  }

  SynthResult out;
  std::vector<Trajectory> trajs;
  for (auto& w : walkers) {
    // A walker that left the scene before its onset is labelled normal.
    const AnomalyKind kind = w.anomaly_applied ? w.anomaly : AnomalyKind::none;
    out.labels.push_back({w.id, kind != AnomalyKind::none, kind, w.route});
    if (w.track.empty()) continue;
    trajs.push_back({w.id, std::move(w.track)});
  }
  out.scene = make_scene(std::move(trajs), cfg.frame_rate);
  out.routes = routes;
  return out;
}

inline const char* to_string(AnomalyKind k) {
  switch (k) {
    case AnomalyKind::none: return "none";
    case AnomalyKind::velocity: return "velocity";
    case AnomalyKind::turn: return "turn";
  }
  return "?";
}

}  // namespace trajattn
