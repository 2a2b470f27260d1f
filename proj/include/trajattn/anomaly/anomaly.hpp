// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "trajattn/clustering/dbscan.hpp"
#include "trajattn/data/labels.hpp"
#include "trajattn/data/neighborhood.hpp"
#include "trajattn/errors.hpp"
#include "trajattn/evaluation/metrics.hpp"
#include "trajattn/model/attention_model.hpp"

namespace trajattn {

struct HiddenStateFeature {
  std::int64_t pedestrian_id = 0;
  Vector vector;  // h_1..h_Tobs then s_Tobs+1..s_Tpred
};

inline HiddenStateFeature collect_hidden_states(const ParameterStore& params, const ModelConfig& config,
                                                std::span<const Point> observed,
                                                const NeighborhoodTensor& neighborhood,
                                                std::int64_t pedestrian_id = 0) {
  const auto tr = predict_trace(params, config, observed, neighborhood);
  HiddenStateFeature f{pedestrian_id, {}};
  f.vector.reserve(config.t_pred * config.hidden_size);
  for (const auto& h : tr.encoder_states) f.vector.insert(f.vector.end(), h.begin(), h.end());
  for (const auto& s : tr.decoder_states) f.vector.insert(f.vector.end(), s.begin(), s.end());
  return f;
}

// Zero mean, unit variance per dimension; constant dimensions become 0.
inline std::vector<Vector> standardize(std::span<const HiddenStateFeature> features) {
  std::vector<Vector> out;
  if (features.empty()) return out;
  const std::size_t dim = features[0].vector.size();
  for (const auto& f : features) {
    if (f.vector.size() != dim) throw ShapeError("standardize: features have different lengths");
  }
  const double n = static_cast<double>(features.size());
  Vector mean(dim, 0.0), sd(dim, 0.0);
  for (const auto& f : features) {
    for (std::size_t d = 0; d < dim; ++d) mean[d] += f.vector[d];
  }
  for (double& m : mean) m /= n;
  for (const auto& f : features) {
    for (std::size_t d = 0; d < dim; ++d) sd[d] += (f.vector[d] - mean[d]) * (f.vector[d] - mean[d]);
  }
  for (double& s : sd) s = std::sqrt(s / n);
  for (const auto& f : features) {
    Vector z(dim);
    for (std::size_t d = 0; d < dim; ++d) z[d] = sd[d] > 1e-12 ? (f.vector[d] - mean[d]) / sd[d] : 0.0;
    out.push_back(std::move(z));
  }
  return out;
}

struct OutlierConfig {
  double eps = 0.0;  // 0 = median k-th neighbour distance times eps_scale
  double eps_scale = 1.0;
  std::size_t min_pts = 5;
};

inline void validate(const OutlierConfig& c) {
  if (!(c.eps >= 0.0) || !std::isfinite(c.eps)) throw ConfigError("anomaly eps must be non-negative (0 = automatic)");
  if (!(c.eps_scale > 0.0)) throw ConfigError("anomaly eps_scale must be positive");
  if (c.min_pts == 0) throw ConfigError("anomaly min_pts must be positive");
}

struct OutlierResult {
  std::vector<std::int64_t> pedestrian_ids;
  std::vector<bool> abnormal;
  std::vector<double> scores;  // distance to the min_pts-th nearest neighbour, standardized space
  double eps = 0.0;

  LabelMap labels() const {
    LabelMap m;
    for (std::size_t i = 0; i < pedestrian_ids.size(); ++i) m[pedestrian_ids[i]] = abnormal[i];
    return m;
  }
};

inline double median(std::vector<double> v) {
  if (v.empty()) throw ArgumentError("median of empty set");
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double hi = v[mid];
  if (v.size() % 2 == 1) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lo + hi);
}

// DBSCAN on standardized features; noise is abnormal.
inline OutlierResult detect_outliers(std::span<const HiddenStateFeature> features, const OutlierConfig& config) {
  validate(config);
  if (features.size() < config.min_pts) {
    throw ArgumentError("detect_outliers: need at least min_pts features");
  }
  const auto z = standardize(features);
  OutlierResult r;
  r.scores = kth_neighbor_distances(z, config.min_pts);
  r.eps = config.eps > 0.0 ? config.eps : config.eps_scale * median(r.scores);
  if (!(r.eps > 0.0)) {
    // All features coincide with at least min_pts others: one cluster.
    r.eps = 1e-12;
  }
  const auto a = dbscan(z, DbscanConfig{r.eps, config.min_pts});
  if (a.cluster_count == 0) throw ConfigError("every feature is an outlier; try a larger anomaly eps");
  for (std::size_t i = 0; i < features.size(); ++i) {
    r.pedestrian_ids.push_back(features[i].pedestrian_id);
    r.abnormal.push_back(a.labels[i] == kNoise);
  }
  return r;
}

// ADE between the prediction from the first T_obs points and the observed
// continuation.
inline double naive_score(const ParameterStore& params, const ModelConfig& config, std::span<const Point> observed_full,
                          const NeighborhoodTensor& neighborhood) {
  if (observed_full.size() != config.t_pred) throw ArgumentError("naive_score: trajectory must have T_pred points");
  const auto obs = observed_full.first(config.t_obs);
  const PointSeq pred = predict(params, config, obs, neighborhood);
  const std::vector<PointSeq> p{pred};
  const std::vector<PointSeq> t{PointSeq(observed_full.begin() + static_cast<std::ptrdiff_t>(config.t_obs),
                                         observed_full.end())};
  return ade(p, t, config.horizon() > 1 ? AdeMode::literal : AdeMode::terms);
}

// Abnormal iff the score is strictly above the threshold.
inline bool naive_detect(const ParameterStore& params, const ModelConfig& config, std::span<const Point> observed_full,
                         const NeighborhoodTensor& neighborhood, double threshold) {
  return naive_score(params, config, observed_full, neighborhood) > threshold;
}

// Linear-interpolated quantile, q in [0, 1].
inline double quantile(std::vector<double> v, double q) {
  if (v.empty()) throw ArgumentError("quantile of empty set");
  if (!(q >= 0.0 && q <= 1.0)) throw ArgumentError("quantile must lie in [0, 1]");
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

struct ConfusionMatrix {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;

  std::size_t total() const { return tp + fp + fn + tn; }
  double recall() const { return tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn); }
  double precision() const { return tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp); }

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

inline ConfusionMatrix confusion(const LabelMap& predicted, const LabelMap& truth) {
  if (predicted.size() != truth.size()) throw ArgumentError("confusion: label sets differ in size");
  ConfusionMatrix m;
  for (const auto& [id, p] : predicted) {
    auto it = truth.find(id);
    if (it == truth.end()) throw ArgumentError("confusion: no ground truth for pedestrian " + std::to_string(id));
    const bool t = it->second;
    if (p && t) ++m.tp;
    else if (p && !t) ++m.fp;
    else if (!p && t) ++m.fn;
    else ++m.tn;
  }
  return m;
}

// Ground truth across, prediction down; abnormal first.
inline void write_confusion(std::ostream& os, const ConfusionMatrix& m, const std::string& title = {}) {
  char buf[256];
  if (!title.empty()) os << title << '\n';
  std::snprintf(buf, sizeof buf, "%-20s%-12s%12s\n", "", "", "Ground Truth");
  os << buf;
  std::snprintf(buf, sizeof buf, "%-20s%12s%12s\n", "", "Abnormal", "Normal");
  os << buf;
  std::snprintf(buf, sizeof buf, "%-10s%-10s%12zu%12zu\n", "Predicted", "Abnormal", m.tp, m.fp);
  os << buf;
  std::snprintf(buf, sizeof buf, "%-10s%-10s%12zu%12zu\n", "", "Normal", m.fn, m.tn);
  os << buf;
}

inline void write_detections(std::ostream& os, std::span<const std::int64_t> ids, const std::vector<bool>& abnormal,
                             std::span<const double> scores) {
  os << "pedestrian_id,label,score\n";
  char buf[64];
  for (std::size_t i = 0; i < ids.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", scores[i]);
    os << ids[i] << ',' << (abnormal[i] ? "abnormal" : "normal") << ',' << buf << '\n';
  }
}

}  // namespace trajattn
