#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

#include "imgsmac/numerics/param_set.hpp"

namespace imgsmac::numerics {

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t checked = 0;
};

/// |a - n| / max(|a| + |n|, floor). The floor keeps near-zero gradients from dividing by ~0.
inline double relative_error(double analytic, double numeric, double floor = 1e-5) {
  return std::abs(analytic - numeric) / std::max(std::abs(analytic) + std::abs(numeric), floor);
}

/// Compares analytic gradients against central differences over every parameter scalar.
/// `f(params, grads)` returns the loss and, when `grads` is non-null, accumulates dL/dparams into it.
/// f must be deterministic. When `include` is set, only parameters it accepts by name are compared.
template <typename F>
GradCheckResult finite_diff_check(ParamSet<double>& params, F&& f, double step = 1e-5, std::size_t stride = 1,
                                  const std::function<bool(const std::string&)>& include = {}) {
  auto analytic = params.make_gradients();
  f(static_cast<const ParamSet<double>&>(params), &analytic);
  GradCheckResult res;
  for (ParamId id = 0; id < params.size(); ++id) {
    if (include && !include(params[id].name)) continue;
    auto& values = params.value(id).values();
    for (std::size_t k = 0; k < values.size(); k += stride) {
      const double orig = values[k];
      values[k] = orig + step;
      const double up = f(static_cast<const ParamSet<double>&>(params), nullptr);
      values[k] = orig - step;
      const double down = f(static_cast<const ParamSet<double>&>(params), nullptr);
      values[k] = orig;
      const double numeric = (up - down) / (2.0 * step);
      const double a = analytic[id][k];
      const double err = relative_error(a, numeric);
      ++res.checked;
      if (err > res.max_relative_error) {
        res.max_relative_error = err;
        res.worst_param = params[id].name;
        res.worst_index = k;
        res.analytic = a;
        res.numeric = numeric;
      }
    }
  }
  return res;
}

}  // namespace imgsmac::numerics
