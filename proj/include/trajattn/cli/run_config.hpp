// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "trajattn/anomaly/anomaly.hpp"
#include "trajattn/clustering/trajectory_clustering.hpp"
#include "trajattn/data/neighborhood.hpp"
#include "trajattn/data/synth.hpp"
#include "trajattn/errors.hpp"
#include "trajattn/evaluation/report.hpp"
#include "trajattn/model/attention_model.hpp"
#include "trajattn/training/trainer.hpp"

namespace trajattn {

struct ConfigKey {
  const char* name;
  const char* default_value;
  const char* help;
};

// Every tunable, with its default. Keys use underscores; the command line
// also accepts them with dashes (--hidden-size 16).
inline const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = {
      // files
      {"scene", "scene.csv", "input scene CSV (frame_id,pedestrian_id,x,y)"},
      {"test_scene", "", "scene CSV used for evaluation; empty = scene"},
      {"reference_scene", "", "normal-only scene used to set the naive threshold"},
      {"output", "scene.csv", "synth: scene CSV to write"},
      {"labels", "", "anomaly labels CSV (pedestrian_id,label); synth writes it when set"},
      {"model", "model.tjf", "model file"},
      {"log", "train_log.csv", "training log CSV; per-cluster logs get a _c<k> suffix"},
      {"clusters", "", "train: cluster assignment CSV to write"},
      {"report", "report.csv", "eval: report CSV"},
      {"predictions", "predictions.csv", "predict: predicted points CSV"},
      {"detections", "detections.csv", "detect: detection CSV"},
      {"plot_dir", "plots", "plot: output directory"},
      // synthetic scenes
      {"n_pedestrians", "200", "synth: number of pedestrians"},
      {"n_frames", "1200", "synth: number of frames"},
      {"zone_layout", "crossing", "synth: corridor | crossing | junction | explicit routes"},
      {"interaction_strength", "1.0", "synth: pairwise repulsion strength"},
      {"seed", "1", "synth: random seed"},
      {"frame_rate", "4", "synth: frames per second"},
      {"scene_width", "30", "synth: scene width (m)"},
      {"scene_height", "20", "synth: scene height (m)"},
      {"zone_radius", "1", "synth: entry/exit zone radius (m)"},
      {"speed_mean", "1.3", "synth: mean preferred speed (m/s)"},
      {"speed_std", "0.15", "synth: preferred speed spread (m/s)"},
      {"anomaly_rate", "0", "synth: fraction of pedestrians given an anomaly"},
      {"anomaly_speed_factor", "2.5", "synth: speed multiplier of velocity anomalies"},
      {"anomaly_turn_share", "0.5", "synth: share of anomalies that are sudden turns"},
      {"anomaly_onset_min", "5", "synth: earliest anomaly onset (frames after spawn)"},
      {"anomaly_onset_max", "30", "synth: latest anomaly onset (frames after spawn)"},
      // windows and neighbourhoods
      {"t_obs", "20", "observed frames"},
      {"t_pred", "40", "observed plus predicted frames"},
      {"min_length", "40", "drop tracks shorter than this"},
      {"stride", "1", "training window stride"},
      {"min_distance", "0.01", "distance floor of hardwired weights (normalized units)"},
      // clustering
      {"dbscan_eps", "0.08", "trajectory clustering eps (normalized units)"},
      {"dbscan_min_pts", "5", "trajectory clustering min_pts"},
      {"cluster_features", "entry_exit", "entry_exit | resampled"},
      // model
      {"hidden_size", "32", "LSTM hidden units"},
      {"embedding_size", "16", "input embedding width"},
      {"velocity_scale", "0", "displacement feature scale; 0 = calibrate from training data"},
      {"neighbor_scale", "5", "scale of neighbour offsets"},
      {"normalize_hardwired", "false", "normalize hardwired weights per step"},
      {"velocity_prior", "false", "predict corrections to the last observed step"},
      // training
      {"ablation", "cmb", "cmb | sc | sft"},
      {"epochs", "200", "training epochs"},
      {"learning_rate", "0.001", "learning rate"},
      {"batch_size", "16", "minibatch size"},
      {"teacher_forcing", "true", "feed ground truth to the decoder while training"},
      {"train_seed", "1", "training seed (initialization and shuffling)"},
      {"optimizer", "adam", "adam | sgd"},
      {"beta1", "0.9", "adam beta1"},
      {"beta2", "0.999", "adam beta2"},
      {"adam_eps", "1e-8", "adam epsilon"},
      {"clip_norm", "5", "gradient norm clip; 0 disables"},
      // evaluation
      {"dataset", "synthetic", "dataset name in reports"},
      {"metric_denominator", "literal", "ADE variant: literal | terms | root"},
      {"curvature_threshold", "0.01", "n-ADE curvature threshold"},
      {"baseline", "true", "include the constant-velocity row"},
      // anomaly detection
      {"method", "hidden", "detect: hidden | naive"},
      {"confusion", "false", "detect: print the confusion matrix (needs labels)"},
      {"anomaly_eps", "0", "detect: DBSCAN eps on standardized features; 0 = automatic"},
      {"anomaly_eps_scale", "1", "detect: multiplier on the automatic eps"},
      {"anomaly_min_pts", "5", "detect: DBSCAN min_pts"},
      {"naive_threshold", "0", "detect: naive ADE threshold; 0 = 95th percentile of normal scores"},
      {"naive_quantile", "0.95", "detect: quantile used for the automatic naive threshold"},
      // plots and prediction
      {"instances", "", "plot/predict: comma-separated pedestrian ids; empty = all (plot: first plot_count)"},
      {"plot_count", "5", "plot: number of instances when none are listed"},
  };
  return keys;
}

inline const ConfigKey* find_config_key(std::string_view name) {
  for (const auto& k : config_keys()) {
    if (name == k.name) return &k;
  }
  return nullptr;
}

class RunConfig {
 public:
  RunConfig() {
    for (const auto& k : config_keys()) values_[k.name] = k.default_value;
  }

  void set(std::string_view key, std::string_view value) {
    std::string k(key);
    for (char& c : k) {
      if (c == '-') c = '_';
    }
    if (!find_config_key(k)) throw ConfigError("unknown config key '" + std::string(key) + "'");
    values_[k] = std::string(value);
  }

  // "key=value"
  void set_assignment(std::string_view kv) {
    const auto eq = kv.find('=');
    if (eq == std::string_view::npos) throw ConfigError("expected key=value, got '" + std::string(kv) + "'");
    set(csv::trim(kv.substr(0, eq)), csv::trim(kv.substr(eq + 1)));
  }

  // key = value lines; '#' starts a comment.
  void load_text(std::string_view text) {
    std::size_t lineno = 0, pos = 0;
    while (pos <= text.size()) {
      const auto nl = text.find('\n', pos);
      std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
      pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
      ++lineno;
      if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
      line = csv::trim(line);
      if (line.empty()) continue;
      try {
        set_assignment(line);
      } catch (const ConfigError& e) {
        throw ConfigError("config line " + std::to_string(lineno) + ": " + e.what());
      }
    }
  }

  void load_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    load_text(text);
  }

  const std::string& str(std::string_view key) const {
    auto it = values_.find(std::string(key));
    if (it == values_.end()) throw ConfigError("unknown config key '" + std::string(key) + "'");
    return it->second;
  }

  double real(std::string_view key) const {
    const auto& s = str(key);
    double v = 0.0;
    if (!csv::parse_double(s, v)) throw ConfigError("config key '" + std::string(key) + "': not a number: '" + s + "'");
    return v;
  }

  std::int64_t integer(std::string_view key) const {
    const auto& s = str(key);
    std::int64_t v = 0;
    if (!csv::parse_int(s, v)) throw ConfigError("config key '" + std::string(key) + "': not an integer: '" + s + "'");
    return v;
  }

  std::size_t count(std::string_view key) const {
    const auto v = integer(key);
    if (v < 0) throw ConfigError("config key '" + std::string(key) + "' must be non-negative");
    return static_cast<std::size_t>(v);
  }

  std::uint64_t u64(std::string_view key) const {
    const auto& s = str(key);
    std::uint64_t v = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size()) {
      throw ConfigError("config key '" + std::string(key) + "': not an unsigned integer: '" + s + "'");
    }
    return v;
  }

  bool flag(std::string_view key) const {
    const auto& s = str(key);
    if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
    if (s == "false" || s == "0" || s == "no" || s == "off") return false;
    throw ConfigError("config key '" + std::string(key) + "': expected true or false, got '" + s + "'");
  }

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

inline SynthConfig synth_config(const RunConfig& rc) {
  SynthConfig c;
  c.n_pedestrians = rc.count("n_pedestrians");
  c.n_frames = rc.count("n_frames");
  c.zone_layout = rc.str("zone_layout");
  c.interaction_strength = rc.real("interaction_strength");
  c.seed = rc.u64("seed");
  c.frame_rate = rc.real("frame_rate");
  c.scene_width = rc.real("scene_width");
  c.scene_height = rc.real("scene_height");
  c.zone_radius = rc.real("zone_radius");
  c.speed_mean = rc.real("speed_mean");
  c.speed_std = rc.real("speed_std");
  c.anomaly_rate = rc.real("anomaly_rate");
  c.anomaly_speed_factor = rc.real("anomaly_speed_factor");
  c.anomaly_turn_share = rc.real("anomaly_turn_share");
  c.anomaly_onset_min = rc.count("anomaly_onset_min");
  c.anomaly_onset_max = rc.count("anomaly_onset_max");
  validate(c);
  return c;
}

inline ModelConfig model_config(const RunConfig& rc) {
  ModelConfig c;
  c.hidden_size = rc.count("hidden_size");
  c.embedding_size = rc.count("embedding_size");
  c.t_obs = rc.count("t_obs");
  c.t_pred = rc.count("t_pred");
  c.velocity_scale = rc.real("velocity_scale");
  c.neighbor_scale = rc.real("neighbor_scale");
  c.normalize_hardwired = rc.flag("normalize_hardwired");
  c.velocity_prior = rc.flag("velocity_prior");
  c.min_distance = rc.real("min_distance");
  if (c.velocity_scale < 0.0) throw ConfigError("velocity_scale must be non-negative");
  validate(c, false);
  return c;
}

inline TrainConfig train_config(const RunConfig& rc) {
  TrainConfig c;
  c.epochs = rc.count("epochs");
  c.learning_rate = rc.real("learning_rate");
  c.batch_size = rc.count("batch_size");
  c.teacher_forcing = rc.flag("teacher_forcing");
  c.seed = rc.u64("train_seed");
  const auto& opt = rc.str("optimizer");
  if (opt == "adam") {
    c.optimizer = OptimizerKind::adam;
  } else if (opt == "sgd") {
    c.optimizer = OptimizerKind::sgd;
  } else {
    throw ConfigError("optimizer must be adam or sgd, got '" + opt + "'");
  }
  c.beta1 = rc.real("beta1");
  c.beta2 = rc.real("beta2");
  c.adam_eps = rc.real("adam_eps");
  c.clip_norm = rc.real("clip_norm");
  validate(c);
  return c;
}

inline DbscanConfig dbscan_config(const RunConfig& rc) {
  DbscanConfig c{rc.real("dbscan_eps"), rc.count("dbscan_min_pts")};
  validate(c);
  return c;
}

inline ClusterFeatures cluster_features(const RunConfig& rc) {
  const auto& s = rc.str("cluster_features");
  if (s == "entry_exit") return ClusterFeatures::entry_exit;
  if (s == "resampled") return ClusterFeatures::resampled;
  throw ConfigError("cluster_features must be entry_exit or resampled, got '" + s + "'");
}

inline InstanceOptions instance_options(const RunConfig& rc, WindowPolicy policy) {
  InstanceOptions o{rc.count("t_obs"), rc.count("t_pred"), rc.count("stride"), policy, rc.real("min_distance")};
  try {
    validate(o);
  } catch (const ArgumentError& e) {
    throw ConfigError(e.what());
  }
  return o;
}

inline EvalOptions eval_options(const RunConfig& rc) {
  EvalOptions o;
  o.dataset = rc.str("dataset");
  o.ade_mode = parse_ade_mode(rc.str("metric_denominator"));
  o.curvature_threshold = rc.real("curvature_threshold");
  if (!(o.curvature_threshold >= 0.0)) throw ConfigError("curvature_threshold must be non-negative");
  return o;
}

inline OutlierConfig outlier_config(const RunConfig& rc) {
  OutlierConfig c{rc.real("anomaly_eps"), rc.real("anomaly_eps_scale"), rc.count("anomaly_min_pts")};
  validate(c);
  return c;
}

}  // namespace trajattn
