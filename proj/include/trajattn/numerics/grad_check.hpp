// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <string>

#include "trajattn/errors.hpp"
#include "trajattn/numerics/linalg.hpp"

namespace trajattn {

using LossFn = std::function<double(const ParameterStore&)>;

struct GradCheckResult {
  std::map<std::string, double> max_relative_error;  // per parameter name

  double worst() const {
    double w = 0.0;
    for (const auto& [_, e] : max_relative_error) w = std::max(w, e);
    return w;
  }
};

// Compares the analytic gradients already stored in params against central
// differences (f(p+h) - f(p-h)) / 2h. Relative error uses the denominator
// max(|analytic|, |numeric|, 1e-8). Parameter values are restored on exit.
inline GradCheckResult finite_diff_check(const LossFn& loss_fn, ParameterStore& params, double step = 1e-5) {
  if (!(step > 0.0)) throw ArgumentError("finite_diff_check: step must be positive");
  const double base = loss_fn(params);
  if (loss_fn(params) != base) {
    throw DiagnosticError("finite_diff_check: loss function is not deterministic");
  }
  GradCheckResult result;
  for (auto& [name, p] : params) {
    double worst = 0.0;
    auto values = p.value.values();
    const auto grads = p.grad.values();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + step;
      const double up = loss_fn(params);
      values[i] = saved - step;
      const double down = loss_fn(params);
      values[i] = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double analytic = grads[i];
      const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
      worst = std::max(worst, std::abs(analytic - numeric) / denom);
    }
    result.max_relative_error[name] = worst;
  }
  return result;
}

}  // namespace trajattn
