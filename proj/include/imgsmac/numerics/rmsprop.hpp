#pragma once

#include <cmath>
#include <string>

#include "imgsmac/numerics/param_set.hpp"

namespace imgsmac::numerics {

struct RmsPropConfig {
  double lr = 0.003;
  double decay = 0.99;
  double eps = 1e-8;
};

/// v <- decay*v + (1-decay)*g^2;  p <- p - lr*g/sqrt(v + eps);  g <- 0.
/// A non-finite gradient aborts the whole step before anything is modified.
template <Real Scalar>
void rmsprop_step(ParamSet<Scalar>& params, const RmsPropConfig& cfg) {
  for (const auto& p : params) {
    if (!p.grad.all_finite()) throw NumericError("non-finite gradient in parameter '" + p.name + "'; step aborted");
  }
  const Scalar lr = static_cast<Scalar>(cfg.lr);
  const Scalar decay = static_cast<Scalar>(cfg.decay);
  const Scalar eps = static_cast<Scalar>(cfg.eps);
  for (auto& p : params) {
    auto& value = p.value.values();
    auto& grad = p.grad.values();
    auto& v = p.second_moment.values();
    for (std::size_t k = 0; k < value.size(); ++k) {
      const Scalar g = grad[k];
      v[k] = decay * v[k] + (Scalar{1} - decay) * g * g;
      if (g != Scalar{0}) value[k] -= lr * g / std::sqrt(v[k] + eps);
      grad[k] = Scalar{0};
    }
  }
}

}  // namespace imgsmac::numerics
