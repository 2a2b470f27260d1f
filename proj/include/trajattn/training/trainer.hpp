// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "trajattn/clustering/trajectory_clustering.hpp"
#include "trajattn/data/neighborhood.hpp"
#include "trajattn/data/trajectory.hpp"
#include "trajattn/errors.hpp"
#include "trajattn/model/attention_model.hpp"
#include "trajattn/numerics/linalg.hpp"
#include "trajattn/numerics/random.hpp"
#include "trajattn/numerics/tape.hpp"

namespace trajattn {

enum class OptimizerKind { sgd, adam };

inline const char* to_string(OptimizerKind k) { return k == OptimizerKind::sgd ? "sgd" : "adam"; }

struct TrainConfig {
  std::size_t epochs = 200;
  double learning_rate = 1e-3;
  std::size_t batch_size = 16;
  bool teacher_forcing = true;
  std::uint64_t seed = 1;
  OptimizerKind optimizer = OptimizerKind::adam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double clip_norm = 5.0;  // 0 disables clipping
};

// A zero learning rate is accepted so that a run can be used to check that
// parameters stay at their initial values.
inline void validate(const TrainConfig& c) {
  if (c.epochs < 1) throw ConfigError("epochs must be at least 1");
  if (!(c.learning_rate >= 0.0) || !std::isfinite(c.learning_rate)) {
    throw ConfigError("learning_rate must be finite and non-negative");
  }
  if (c.batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (!(c.beta1 >= 0.0 && c.beta1 < 1.0) || !(c.beta2 >= 0.0 && c.beta2 < 1.0)) {
    throw ConfigError("adam betas must lie in [0, 1)");
  }
  if (!(c.adam_eps > 0.0)) throw ConfigError("adam_eps must be positive");
  if (!(c.clip_norm >= 0.0)) throw ConfigError("clip_norm must be non-negative");
}

// (1/T) sum_t |p_t - q_t|^2
inline double loss(std::span<const Point> predicted, std::span<const Point> truth) {
  if (predicted.size() != truth.size()) throw ArgumentError("loss: sequence lengths differ");
  if (predicted.empty()) throw ArgumentError("loss: empty sequences");
  double s = 0.0;
  for (std::size_t t = 0; t < predicted.size(); ++t) {
    const Point d = predicted[t] - truth[t];
    s += d.x * d.x + d.y * d.y;
  }
  return s / static_cast<double>(predicted.size());
}

class Optimizer {
 public:
  explicit Optimizer(const TrainConfig& c) : config_(c) {}

  void step(ParameterStore& params) {
    ++steps_;
    if (config_.optimizer == OptimizerKind::sgd) {
      for (auto& [name, p] : params) {
        auto v = p.value.values();
        auto g = p.grad.values();
        for (std::size_t i = 0; i < v.size(); ++i) v[i] -= config_.learning_rate * g[i];
      }
      return;
    }
    const double b1 = config_.beta1, b2 = config_.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
    for (auto& [name, p] : params) {
      auto [it, inserted] = moments_.try_emplace(name);
      if (inserted) {
        it->second.m.assign(p.value.size(), 0.0);
        it->second.v.assign(p.value.size(), 0.0);
      }
      auto& mo = it->second;
      auto v = p.value.values();
      auto g = p.grad.values();
      for (std::size_t i = 0; i < v.size(); ++i) {
        mo.m[i] = b1 * mo.m[i] + (1.0 - b1) * g[i];
        mo.v[i] = b2 * mo.v[i] + (1.0 - b2) * g[i] * g[i];
        const double mh = mo.m[i] / c1, vh = mo.v[i] / c2;
        v[i] -= config_.learning_rate * mh / (std::sqrt(vh) + config_.adam_eps);
      }
    }
  }

  std::size_t steps() const { return steps_; }

 private:
  struct Moments {
    std::vector<double> m, v;
  };
  TrainConfig config_;
  std::map<std::string, Moments, std::less<>> moments_;
  std::size_t steps_ = 0;
};

// Rescales all gradients so their joint norm is at most max_norm. Returns
// the norm before clipping.
inline double clip_gradients(ParameterStore& params, double max_norm) {
  const double n = params.grad_norm();
  if (max_norm > 0.0 && n > max_norm) {
    const double f = max_norm / n;
    for (auto& [name, p] : params) {
      for (double& g : p.grad.values()) g *= f;
    }
  }
  return n;
}

struct EpochRecord {
  std::size_t epoch = 0;
  double mean_loss = 0.0;
  double wall_ms = 0.0;
};

struct TrainLog {
  std::vector<EpochRecord> epochs;
  std::vector<std::string> warnings;
};

inline void write_training_log(std::ostream& os, const TrainLog& log) {
  os << "epoch,mean_loss,wall_ms\n";
  char buf[64];
  for (const auto& r : log.epochs) {
    std::snprintf(buf, sizeof buf, "%.17g", r.mean_loss);
    os << r.epoch << ',' << buf << ',';
    std::snprintf(buf, sizeof buf, "%.3f", r.wall_ms);
    os << buf << '\n';
  }
}

// Per-frame displacements are scaled by 1 / RMS(step length) so that the
// network sees velocity features of order one.
inline double calibrate_velocity_scale(std::span<const TrainingInstance> instances) {
  double ss = 0.0;
  std::size_t n = 0;
  for (const auto& inst : instances) {
    PointSeq all = inst.observed;
    all.insert(all.end(), inst.future.begin(), inst.future.end());
    for (std::size_t t = 1; t < all.size(); ++t) {
      const Point d = all[t] - all[t - 1];
      ss += d.x * d.x + d.y * d.y;
      ++n;
    }
  }
  if (n == 0 || !(ss > 0.0)) return 1.0;
  return 1.0 / std::sqrt(ss / static_cast<double>(n));
}

struct TrainedModel {
  ModelConfig config;
  ParameterStore params;
};

// Teacher-forced (or free-running) loss and gradient of one instance. The
// gradient is accumulated into params scaled by `weight`.
inline double instance_loss_and_grad(ParameterStore& params, const ModelConfig& c, const TrainingInstance& inst,
                                     bool teacher_forcing, double weight) {
  Tape tape(true);
  const auto g = build_forward(tape, bind_parameters(params), c, inst.observed, inst.neighborhood,
                               teacher_forcing ? std::span<const Point>(inst.future) : std::span<const Point>{});
  std::vector<Vector> target;
  target.reserve(inst.future.size());
  for (Point p : inst.future) target.push_back({p.x, p.y});
  Var l = ops::mean_squared_error(tape, g.predictions, target);
  const double value = tape.value(l)[0];
  backward(tape, l, weight);
  return value;
}

inline void check_instances(std::span<const TrainingInstance> instances, const ModelConfig& c) {
  if (instances.empty()) throw ArgumentError("train_model: no training instances");
  for (const auto& inst : instances) {
    if (inst.observed.size() != c.t_obs || inst.future.size() != c.horizon()) {
      throw ArgumentError("train_model: instance lengths do not match T_obs / T_pred");
    }
  }
}

// Minibatch training on the unrolled graph. A zero velocity_scale in the
// model config is calibrated from the instances; the returned config holds
// the value used.
inline TrainedModel train_model(std::span<const TrainingInstance> instances, ModelConfig model_config,
                                const TrainConfig& train_config, TrainLog* log = nullptr) {
  validate(train_config);
  validate(model_config, false);
  check_instances(instances, model_config);
  if (!(model_config.velocity_scale > 0.0)) model_config.velocity_scale = calibrate_velocity_scale(instances);

  TrainedModel out{model_config, make_parameters(model_config, train_config.seed)};
  Optimizer opt(train_config);
  Rng rng(train_config.seed ^ 0x9e3779b97f4a7c15ULL);
  std::size_t batch = train_config.batch_size;
  if (batch > instances.size()) {
    if (log) {
      log->warnings.push_back("only " + std::to_string(instances.size()) + " instances; batch size reduced from " +
                              std::to_string(batch));
    }
    batch = instances.size();
  }
  std::vector<std::size_t> order(instances.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (std::size_t epoch = 1; epoch <= train_config.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    rng.shuffle(order);
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(order.size(), start + batch);
      const double w = 1.0 / static_cast<double>(end - start);
      out.params.zero_grad();
      for (std::size_t k = start; k < end; ++k) {
        total += instance_loss_and_grad(out.params, out.config, instances[order[k]], train_config.teacher_forcing, w);
      }
      if (!std::isfinite(total)) {
        throw TrainingError("training diverged (non-finite loss) in epoch " + std::to_string(epoch));
      }
      clip_gradients(out.params, train_config.clip_norm);
      opt.step(out.params);
    }
    const double mean = total / static_cast<double>(instances.size());
    const auto t1 = std::chrono::steady_clock::now();
    if (log) {
      log->epochs.push_back({epoch, mean, std::chrono::duration<double, std::milli>(t1 - t0).count()});
    }
  }
  return out;
}

enum class Ablation {
  cmb,  // per-cluster models, combined attention
  sc,   // one model for all trajectories, combined attention
  sft,  // per-cluster models, soft attention only
};

inline const char* to_string(Ablation a) {
  switch (a) {
    case Ablation::cmb: return "cmb";
    case Ablation::sc: return "sc";
    case Ablation::sft: return "sft";
  }
  return "?";
}

inline Ablation parse_ablation(std::string_view s) {
  if (s == "cmb") return Ablation::cmb;
  if (s == "sc") return Ablation::sc;
  if (s == "sft") return Ablation::sft;
  throw ConfigError("unknown ablation '" + std::string(s) + "' (expected cmb, sc or sft)");
}

struct ClusterModelSet {
  Ablation ablation = Ablation::cmb;
  NormalizationTransform transform;
  std::vector<ClusterDescriptor> descriptors;
  std::map<int, TrainedModel> models;
  std::optional<TrainedModel> single_model;

  // Model used for an observed (normalized) track.
  const TrainedModel& select(std::span<const Point> observed) const {
    if (single_model) return *single_model;
    const int k = assign_cluster(observed, descriptors);
    auto it = models.find(k);
    if (it == models.end()) throw ProtocolError("no model for cluster " + std::to_string(k));
    return it->second;
  }

  const ModelConfig& config() const {
    if (single_model) return single_model->config;
    if (models.empty()) throw StateError("model set is empty");
    return models.begin()->second.config;
  }
};

struct ClusterTrainOptions {
  std::size_t stride = 1;
  ClusterFeatures features = ClusterFeatures::entry_exit;
};

inline std::uint64_t cluster_seed(std::uint64_t seed, int cluster) {
  return seed + 0x100000001b3ULL * static_cast<std::uint64_t>(cluster + 1);
}

// Per-cluster protocol. The scene must already be filtered and normalized.
// `logs` receives one entry per trained model, keyed by cluster id (-1 for
// the single model).
inline ClusterModelSet train_per_cluster(const NormalizedScene& data, const DbscanConfig& dbscan_config,
                                         ModelConfig model_config, const TrainConfig& train_config, Ablation ablation,
                                         const ClusterTrainOptions& options = {},
                                         std::map<int, TrainLog>* logs = nullptr,
                                         TrajectoryClustering* clustering_out = nullptr) {
  validate(train_config);
  validate(model_config, false);
  if (data.scene.trajectories.empty()) throw DataError("train_per_cluster: scene has no trajectories");
  InstanceOptions iopts{model_config.t_obs, model_config.t_pred, options.stride, WindowPolicy::sliding,
                        model_config.min_distance};

  ClusterModelSet set;
  set.ablation = ablation;
  set.transform = data.transform;

  auto all = make_instances(data.scene, iopts);
  if (all.empty()) throw DataError("train_per_cluster: no training windows of T_pred frames");
  if (!(model_config.velocity_scale > 0.0)) model_config.velocity_scale = calibrate_velocity_scale(all);

  auto train_one = [&](std::span<const TrainingInstance> inst, ModelConfig cfg, int key) {
    TrainConfig tc = train_config;
    tc.seed = key < 0 ? train_config.seed : cluster_seed(train_config.seed, key);
    TrainLog local;
    auto m = train_model(inst, cfg, tc, &local);
    if (logs) (*logs)[key] = std::move(local);
    return m;
  };

  if (ablation == Ablation::sc) {
    set.single_model = train_one(all, model_config, -1);
    return set;
  }

  const auto clustering = cluster_training_set(data.scene, dbscan_config, model_config.t_obs, options.features);
  set.descriptors = clustering.descriptors;
  std::map<std::int64_t, int> label;
  for (std::size_t i = 0; i < clustering.pedestrian_ids.size(); ++i) {
    label[clustering.pedestrian_ids[i]] = clustering.assignment.labels[i];
  }
  if (ablation == Ablation::sft) model_config.mode = AttentionMode::soft_only;
  for (const auto& d : set.descriptors) {
    std::vector<TrainingInstance> members;
    for (const auto& inst : all) {
      if (label.at(inst.pedestrian_id) == d.cluster_id) {
        members.push_back(inst);
        members.back().cluster_id = d.cluster_id;
      }
    }
    if (members.empty()) {
      throw DataError("cluster " + std::to_string(d.cluster_id) + " has no training windows");
    }
    set.models.emplace(d.cluster_id, train_one(members, model_config, d.cluster_id));
  }
  if (clustering_out) *clustering_out = clustering;
  return set;
}

}  // namespace trajattn
