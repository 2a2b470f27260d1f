// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "trajattn/anomaly/anomaly.hpp"
#include "trajattn/data/neighborhood.hpp"
#include "trajattn/training/trainer.hpp"

namespace trajattn {

// Detection over instances whose window spans all T_pred frames. Features
// from different cluster models live in different spaces, so outliers are
// searched separately within each model's group. Groups with fewer than
// min_pts + 1 members are left unlabelled (normal) and reported.
struct SetDetection {
  std::vector<std::int64_t> pedestrian_ids;
  std::vector<bool> abnormal;
  std::vector<double> scores;
  std::vector<int> groups;  // cluster id, -1 for the single model
  std::vector<std::string> warnings;

  LabelMap labels() const {
    LabelMap m;
    for (std::size_t i = 0; i < pedestrian_ids.size(); ++i) m[pedestrian_ids[i]] = abnormal[i];
    return m;
  }
};

inline int model_key(const ClusterModelSet& set, std::span<const Point> observed) {
  return set.single_model ? -1 : assign_cluster(observed, set.descriptors);
}

inline const TrainedModel& model_for_key(const ClusterModelSet& set, int key) {
  if (key < 0) {
    if (!set.single_model) throw ProtocolError("model set has no single model");
    return *set.single_model;
  }
  auto it = set.models.find(key);
  if (it == set.models.end()) throw ProtocolError("no model for cluster " + std::to_string(key));
  return it->second;
}

inline SetDetection detect_hidden_state_outliers(const ClusterModelSet& set, std::span<const TrainingInstance> instances,
                                                 const OutlierConfig& config) {
  SetDetection out;
  std::map<int, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    const int k = model_key(set, instances[i].observed);
    groups[k].push_back(i);
    out.pedestrian_ids.push_back(instances[i].pedestrian_id);
    out.groups.push_back(k);
  }
  out.abnormal.assign(instances.size(), false);
  out.scores.assign(instances.size(), 0.0);
  for (const auto& [k, members] : groups) {
    if (members.size() <= config.min_pts) {
      out.warnings.push_back("cluster " + std::to_string(k) + " has only " + std::to_string(members.size()) +
                             " instances; left unlabelled");
      continue;
    }
    const auto& m = model_for_key(set, k);
    std::vector<HiddenStateFeature> feats;
    for (std::size_t i : members) {
      feats.push_back(collect_hidden_states(m.params, m.config, instances[i].observed, instances[i].neighborhood,
                                            instances[i].pedestrian_id));
    }
    const auto r = detect_outliers(feats, config);
    for (std::size_t j = 0; j < members.size(); ++j) {
      out.abnormal[members[j]] = r.abnormal[j];
      out.scores[members[j]] = r.scores[j];
    }
  }
  return out;
}

inline std::vector<double> naive_scores(const ClusterModelSet& set, std::span<const TrainingInstance> instances) {
  std::vector<double> s;
  s.reserve(instances.size());
  for (const auto& inst : instances) {
    const auto& m = model_for_key(set, model_key(set, inst.observed));
    PointSeq full = inst.observed;
    full.insert(full.end(), inst.future.begin(), inst.future.end());
    s.push_back(naive_score(m.params, m.config, full, inst.neighborhood));
  }
  return s;
}

}  // namespace trajattn
