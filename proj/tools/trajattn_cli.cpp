// SPDX-License-Identifier: Apache-2.0
// trajattn: synth | train | predict | eval | detect | plot
//
// Exit codes: 0 success, 2 usage or configuration error, 3 data or model
// error.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "trajattn/anomaly/pipeline.hpp"
#include "trajattn/trajattn.hpp"

namespace fs = std::filesystem;
using namespace trajattn;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;

Scene read_scene(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read scene file '" + path + "'");
  return parse_trajectories(in);
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw DataError("cannot write '" + path.string() + "'");
  return os;
}

// Scene filtered and mapped into the model's normalized frame.
Scene prepared_scene(const RunConfig& rc, const std::string& path, const ClusterModelSet& set) {
  Scene s = filter_trajectories(read_scene(path), rc.count("min_length"));
  if (s.trajectories.empty()) throw DataError("no trajectories left in '" + path + "' after filtering");
  return apply_normalization(s, set.transform);
}

std::set<std::int64_t> requested_ids(const RunConfig& rc) {
  std::set<std::int64_t> ids;
  for (auto part : csv::split(rc.str("instances"))) {
    part = csv::trim(part);
    if (part.empty()) continue;
    std::int64_t id = 0;
    if (!csv::parse_int(part, id)) throw ConfigError("instances: bad pedestrian id '" + std::string(part) + "'");
    ids.insert(id);
  }
  return ids;
}

// First full T_pred window of every track (or of the requested ones).
std::vector<TrainingInstance> first_windows(const RunConfig& rc, const Scene& scene, const ModelConfig& mc) {
  auto opts = instance_options(rc, WindowPolicy::first);
  opts.t_obs = mc.t_obs;
  opts.t_pred = mc.t_pred;
  opts.min_distance = mc.min_distance;
  const auto ids = requested_ids(rc);
  std::vector<TrainingInstance> out;
  for (const auto& inst : make_instances(scene, opts)) {
    if (ids.empty() || ids.contains(inst.pedestrian_id)) out.push_back(inst);
  }
  for (auto id : ids) {
    const bool found = std::any_of(out.begin(), out.end(), [&](const auto& i) { return i.pedestrian_id == id; });
    if (!found) throw ConfigError("instance " + std::to_string(id) + " not found (or shorter than T_pred)");
  }
  return out;
}

std::string log_path(const std::string& base, int key) {
  if (key < 0) return base;
  fs::path p(base);
  return (p.parent_path() / (p.stem().string() + "_c" + std::to_string(key) + p.extension().string())).string();
}

int cmd_synth(const RunConfig& rc) {
  const auto cfg = synth_config(rc);
  const auto result = synth_generate(cfg);
  {
    auto os = open_out(rc.str("output"));
    write_trajectories(os, result.scene);
  }
  std::size_t abnormal = 0;
  if (!rc.str("labels").empty()) {
    LabelMap labels;
    for (const auto& l : result.labels) {
      if (result.scene.find(l.pedestrian_id)) labels[l.pedestrian_id] = l.abnormal;
    }
    for (const auto& [id, a] : labels) abnormal += a ? 1 : 0;
    auto os = open_out(rc.str("labels"));
    write_labels(os, labels);
  }
  std::cout << "wrote " << result.scene.trajectories.size() << " trajectories to " << rc.str("output");
  if (!rc.str("labels").empty()) std::cout << " (" << abnormal << " abnormal, labels in " << rc.str("labels") << ")";
  std::cout << '\n';
  return kExitOk;
}

int cmd_train(const RunConfig& rc) {
  const auto mc = model_config(rc);
  const auto tc = train_config(rc);
  const auto db = dbscan_config(rc);
  const auto ablation = parse_ablation(rc.str("ablation"));
  const auto opts = instance_options(rc, WindowPolicy::sliding);
  const auto features = cluster_features(rc);

  Scene scene = filter_trajectories(read_scene(rc.str("scene")), rc.count("min_length"));
  if (scene.trajectories.empty()) throw DataError("no trajectories left after filtering");
  const auto data = normalize(scene);

  std::map<int, TrainLog> logs;
  TrajectoryClustering clustering;
  const auto set = train_per_cluster(data, db, mc, tc, ablation, {opts.stride, features}, &logs, &clustering);
  save_model(set, rc.str("model"));
  for (const auto& [key, log] : logs) {
    for (const auto& w : log.warnings) std::cerr << "warning: model " << key << ": " << w << '\n';
    auto os = open_out(log_path(rc.str("log"), key));
    write_training_log(os, log);
  }
  if (!rc.str("clusters").empty() && ablation != Ablation::sc) {
    auto os = open_out(rc.str("clusters"));
    write_cluster_csv(os, clustering);
  }
  std::cout << "trained " << (set.single_model ? 1 : set.models.size()) << " model(s), ablation "
            << to_string(ablation) << ", saved to " << rc.str("model") << '\n';
  for (const auto& [key, log] : logs) {
    std::cout << "  model " << key << ": final mean loss " << log.epochs.back().mean_loss << '\n';
  }
  return kExitOk;
}

int cmd_predict(const RunConfig& rc) {
  const auto set = load_model(rc.str("model"));
  const auto& path = rc.str("test_scene").empty() ? rc.str("scene") : rc.str("test_scene");
  const Scene scene = prepared_scene(rc, path, set);
  const auto instances = first_windows(rc, scene, set.config());
  auto os = open_out(rc.str("predictions"));
  os << "pedestrian_id,step,x,y\n";
  char buf[96];
  for (const auto& inst : instances) {
    const auto& m = set.select(inst.observed);
    const auto pred = set.transform.invert(predict(m.params, m.config, inst.observed, inst.neighborhood));
    for (std::size_t t = 0; t < pred.size(); ++t) {
      std::snprintf(buf, sizeof buf, "%.17g,%.17g", pred[t].x, pred[t].y);
      os << inst.pedestrian_id << ',' << (m.config.t_obs + t + 1) << ',' << buf << '\n';
    }
  }
  std::cout << "predicted " << instances.size() << " instance(s) into " << rc.str("predictions") << '\n';
  return kExitOk;
}

int cmd_eval(const RunConfig& rc) {
  const auto eo = eval_options(rc);
  const auto set = load_model(rc.str("model"));
  const auto& path = rc.str("test_scene").empty() ? rc.str("scene") : rc.str("test_scene");
  const Scene scene = prepared_scene(rc, path, set);
  const auto instances = first_windows(rc, scene, set.config());
  if (instances.empty()) throw DataError("no test instances of T_pred frames");
  auto report = evaluate(set, instances, eo);
  if (rc.flag("baseline")) report.append(evaluate_constant_velocity(instances, set.transform, eo));
  write_report_text(std::cout, report);
  auto os = open_out(rc.str("report"));
  write_report_csv(os, report);
  return kExitOk;
}

int cmd_detect(const RunConfig& rc) {
  const auto oc = outlier_config(rc);
  const auto& method = rc.str("method");
  if (method != "hidden" && method != "naive") throw ConfigError("method must be hidden or naive, got '" + method + "'");
  const bool want_confusion = rc.flag("confusion");
  if (want_confusion && rc.str("labels").empty()) throw ConfigError("--confusion needs a labels file (labels=...)");

  const auto set = load_model(rc.str("model"));
  const Scene scene = prepared_scene(rc, rc.str("scene"), set);
  const auto instances = first_windows(rc, scene, set.config());
  if (instances.empty()) throw DataError("no instances of T_pred frames to examine");

  std::vector<std::int64_t> ids;
  std::vector<bool> abnormal;
  std::vector<double> scores;
  if (method == "hidden") {
    const auto d = detect_hidden_state_outliers(set, instances, oc);
    for (const auto& w : d.warnings) std::cerr << "warning: " << w << '\n';
    ids = d.pedestrian_ids;
    abnormal = d.abnormal;
    scores = d.scores;
  } else {
    scores = naive_scores(set, instances);
    double threshold = rc.real("naive_threshold");
    if (!(threshold > 0.0)) {
      std::vector<double> reference = scores;
      if (!rc.str("reference_scene").empty()) {
        const Scene ref = prepared_scene(rc, rc.str("reference_scene"), set);
        reference = naive_scores(set, first_windows(rc, ref, set.config()));
      }
      threshold = quantile(reference, rc.real("naive_quantile"));
      std::cout << "naive threshold " << threshold << '\n';
    }
    for (const auto& inst : instances) ids.push_back(inst.pedestrian_id);
    for (double s : scores) abnormal.push_back(s > threshold);
  }
  {
    auto os = open_out(rc.str("detections"));
    write_detections(os, ids, abnormal, scores);
  }
  std::size_t flagged = 0;
  for (bool a : abnormal) flagged += a ? 1 : 0;
  std::cout << method << ": " << flagged << " of " << ids.size() << " flagged abnormal, written to "
            << rc.str("detections") << '\n';
  if (want_confusion) {
    std::ifstream in(rc.str("labels"));
    if (!in) throw DataError("cannot read labels file '" + rc.str("labels") + "'");
    const auto truth_all = parse_labels(in);
    LabelMap predicted, truth;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      auto it = truth_all.find(ids[i]);
      if (it == truth_all.end()) throw DataError("no label for pedestrian " + std::to_string(ids[i]));
      predicted[ids[i]] = abnormal[i];
      truth[ids[i]] = it->second;
    }
    const auto m = confusion(predicted, truth);
    write_confusion(std::cout, m, method == "hidden" ? "hidden-state DBSCAN" : "naive deviation");
    std::cout << "recall " << m.recall() << ", false positives " << m.fp << '\n';
  }
  return kExitOk;
}

int cmd_plot(const RunConfig& rc) {
  const auto set = load_model(rc.str("model"));
  const auto& path = rc.str("test_scene").empty() ? rc.str("scene") : rc.str("test_scene");
  const Scene scene = prepared_scene(rc, path, set);
  auto instances = first_windows(rc, scene, set.config());
  if (requested_ids(rc).empty() && instances.size() > rc.count("plot_count")) {
    instances.resize(rc.count("plot_count"));
  }
  const fs::path dir = rc.str("plot_dir");
  fs::create_directories(dir);
  for (const auto& inst : instances) {
    const auto& m = set.select(inst.observed);
    PlotData d;
    d.pedestrian_id = inst.pedestrian_id;
    d.observed = set.transform.invert(inst.observed);
    d.truth = set.transform.invert(inst.future);
    d.predicted = set.transform.invert(predict(m.params, m.config, inst.observed, inst.neighborhood));
    for (const auto& slot : inst.neighborhood.slots) {
      if (!slot.is_dummy) d.neighbors.push_back(set.transform.invert(slot.trajectory));
    }
    const std::string stem = "pedestrian_" + std::to_string(inst.pedestrian_id);
    auto svg = open_out(dir / (stem + ".svg"));
    write_plot_svg(svg, d);
    auto csv_out = open_out(dir / (stem + ".csv"));
    write_plot_csv(csv_out, d);
  }
  std::cout << "wrote " << instances.size() << " plot(s) to " << dir.string() << '\n';
  return kExitOk;
}

struct Command {
  const char* name;
  const char* help;
  int (*run)(const RunConfig&);
};

const Command kCommands[] = {
    {"synth", "generate a synthetic scene (and anomaly labels)", cmd_synth},
    {"train", "cluster a scene and train prediction models", cmd_train},
    {"predict", "predict the continuation of each track's first window", cmd_predict},
    {"eval", "ADE / FDE / n-ADE report against ground truth", cmd_eval},
    {"detect", "flag abnormal trajectories", cmd_detect},
    {"plot", "SVG and CSV plots of predictions", cmd_plot},
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Trajectory prediction with soft and hardwired attention"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "show help for every subcommand");

  struct Args {
    std::string config_file;
    std::vector<std::string> assignments;
    std::map<std::string, std::string> flags;
  };
  std::map<std::string, Args> args;
  std::map<CLI::App*, const Command*> commands;
  for (const auto& c : kCommands) {
    auto* sub = app.add_subcommand(c.name, c.help);
    auto& a = args[c.name];
    sub->add_option("--config", a.config_file, "key = value config file");
    sub->add_option("--set", a.assignments, "override one setting, key=value (repeatable)");
    for (const auto& k : config_keys()) {
      std::string flag = k.name;
      std::replace(flag.begin(), flag.end(), '_', '-');
      std::string help = std::string(k.help) + " [default: " + k.default_value + "]";
      sub->add_option("--" + flag, a.flags[k.name], help);
    }
    commands[sub] = &c;
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  for (auto* sub : app.get_subcommands()) {
    const Command& cmd = *commands.at(sub);
    const auto& a = args.at(cmd.name);
    try {
      RunConfig rc;
      if (!a.config_file.empty()) rc.load_file(a.config_file);
      for (const auto& kv : a.assignments) rc.set_assignment(kv);
      for (const auto& k : config_keys()) {
        auto* opt = sub->get_option("--" + [&] {
          std::string f = k.name;
          std::replace(f.begin(), f.end(), '_', '-');
          return f;
        }());
        if (opt->count() > 0) rc.set(k.name, a.flags.at(k.name));
      }
      return cmd.run(rc);
    } catch (const ConfigError& e) {
      std::cerr << "error: " << e.what() << '\n';
      return kExitUsage;
    } catch (const ArgumentError& e) {
      std::cerr << "error: " << e.what() << '\n';
      return kExitUsage;
    } catch (const ParseError& e) {
      std::cerr << "error: " << e.what() << '\n';
      return kExitData;
    } catch (const std::runtime_error& e) {
      // DataError, LoadError, TrainingError, ProtocolError
      std::cerr << "error: " << e.what() << '\n';
      return kExitData;
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << '\n';
      return kExitData;
    }
  }
  return kExitOk;
}
