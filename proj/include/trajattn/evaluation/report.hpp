// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstdio>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "trajattn/data/neighborhood.hpp"
#include "trajattn/errors.hpp"
#include "trajattn/evaluation/metrics.hpp"
#include "trajattn/model/attention_model.hpp"
#include "trajattn/training/trainer.hpp"

namespace trajattn {

struct ReportRow {
  std::string metric;  // ADE, FDE, n-ADE
  std::string dataset;
  std::string method;
  double value = 0.0;
  std::size_t count = 0;  // instances evaluated
};

struct EvaluationReport {
  std::vector<ReportRow> rows;
  // (dataset, method) pairs whose predictions had no nonlinear points.
  std::vector<std::pair<std::string, std::string>> no_nonlinear;

  const ReportRow* find(std::string_view metric, std::string_view method) const {
    for (const auto& r : rows) {
      if (r.metric == metric && r.method == method) return &r;
    }
    return nullptr;
  }

  void append(const EvaluationReport& other) {
    rows.insert(rows.end(), other.rows.begin(), other.rows.end());
    no_nonlinear.insert(no_nonlinear.end(), other.no_nonlinear.begin(), other.no_nonlinear.end());
  }
};

struct EvalOptions {
  std::string dataset = "synthetic";
  AdeMode ade_mode = AdeMode::literal;
  double curvature_threshold = kDefaultCurvatureThreshold;
};

inline std::string method_name(Ablation a) { return std::string("OUR_") + to_string(a); }

// Metrics for one method over predictions and ground truth in scene units.
inline EvaluationReport score_predictions(const std::vector<PointSeq>& predicted, const std::vector<PointSeq>& truth,
                                          const std::string& method, const EvalOptions& opts) {
  EvaluationReport r;
  const std::size_t n = predicted.size();
  r.rows.push_back({"ADE", opts.dataset, method, ade(predicted, truth, opts.ade_mode), n});
  r.rows.push_back({"FDE", opts.dataset, method, fde(predicted, truth), n});
  if (auto v = nade(predicted, truth, opts.curvature_threshold)) {
    r.rows.push_back({"n-ADE", opts.dataset, method, *v, n});
  } else {
    r.no_nonlinear.emplace_back(opts.dataset, method);
  }
  return r;
}

struct EvaluationRun {
  EvaluationReport report;
  std::vector<PointSeq> predicted;  // scene units, per test instance
  std::vector<int> clusters;        // assigned cluster (-1 for the single model)
};

// Test instances are in the model set's normalized coordinates. Each one is
// routed to its nearest cluster model (or the single model) and scored in
// scene units.
inline EvaluationRun evaluate_run(const ClusterModelSet& models, std::span<const TrainingInstance> test,
                                  const EvalOptions& opts = {}) {
  if (test.empty()) throw ArgumentError("evaluate: no test instances");
  EvaluationRun run;
  std::vector<PointSeq> truth;
  for (const auto& inst : test) {
    int k = -1;
    const TrainedModel* m = nullptr;
    if (models.single_model) {
      m = &*models.single_model;
    } else {
      k = assign_cluster(inst.observed, models.descriptors);
      auto it = models.models.find(k);
      if (it == models.models.end()) throw ProtocolError("test instance assigned to cluster " + std::to_string(k) +
                                                         " which has no model");
      m = &it->second;
    }
    run.predicted.push_back(models.transform.invert(predict(m->params, m->config, inst.observed, inst.neighborhood)));
    truth.push_back(models.transform.invert(inst.future));
    run.clusters.push_back(k);
  }
  run.report = score_predictions(run.predicted, truth, method_name(models.ablation), opts);
  return run;
}

inline EvaluationReport evaluate(const ClusterModelSet& models, std::span<const TrainingInstance> test,
                                 const EvalOptions& opts = {}) {
  return evaluate_run(models, test, opts).report;
}

// Constant-velocity reference on the same instances.
inline EvaluationReport evaluate_constant_velocity(std::span<const TrainingInstance> test,
                                                   const NormalizationTransform& transform,
                                                   const EvalOptions& opts = {}) {
  if (test.empty()) throw ArgumentError("evaluate: no test instances");
  std::vector<PointSeq> pred, truth;
  for (const auto& inst : test) {
    pred.push_back(constant_velocity(transform.invert(inst.observed), inst.future.size()));
    truth.push_back(transform.invert(inst.future));
  }
  return score_predictions(pred, truth, "CV", opts);
}

inline std::string format_value(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

inline void write_report_csv(std::ostream& os, const EvaluationReport& r) {
  os << "metric,dataset,method,value,count\n";
  char buf[64];
  for (const auto& row : r.rows) {
    std::snprintf(buf, sizeof buf, "%.17g", row.value);
    os << row.metric << ',' << row.dataset << ',' << row.method << ',' << buf << ',' << row.count << '\n';
  }
}

// Metrics down, methods across, one block per dataset.
inline void write_report_text(std::ostream& os, const EvaluationReport& r) {
  std::vector<std::string> datasets, methods;
  auto add_unique = [](std::vector<std::string>& v, const std::string& s) {
    if (std::find(v.begin(), v.end(), s) == v.end()) v.push_back(s);
  };
  for (const auto& row : r.rows) {
    add_unique(datasets, row.dataset);
    add_unique(methods, row.method);
  }
  for (const auto& [d, m] : r.no_nonlinear) {
    add_unique(datasets, d);
    add_unique(methods, m);
  }
  std::size_t width = 10;
  for (const auto& m : methods) width = std::max(width, m.size() + 2);
  auto pad = [](std::string s, std::size_t w) {
    if (s.size() < w) s.insert(0, w - s.size(), ' ');
    return s;
  };
  os << pad("metric", 8) << pad("dataset", 12);
  for (const auto& m : methods) os << pad(m, width);
  os << '\n';
  for (const char* metric : {"ADE", "FDE", "n-ADE"}) {
    for (const auto& d : datasets) {
      os << pad(metric, 8) << pad(d, 12);
      for (const auto& m : methods) {
        std::string cell = "-";
        for (const auto& row : r.rows) {
          if (row.metric == metric && row.dataset == d && row.method == m) cell = format_value(row.value);
        }
        if (std::string_view(metric) == "n-ADE") {
          for (const auto& [dd, mm] : r.no_nonlinear) {
            if (dd == d && mm == m) cell = "none";
          }
        }
        os << pad(cell, width);
      }
      os << '\n';
    }
  }
  if (!r.no_nonlinear.empty()) os << "n-ADE 'none': no nonlinear predicted points for that method\n";
}

}  // namespace trajattn
