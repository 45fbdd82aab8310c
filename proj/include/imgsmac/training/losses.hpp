#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "imgsmac/numerics/loss.hpp"

namespace imgsmac::training {

/// -sum log_pi * A + value_coef * sum A^2 - entropy_coef * sum H  (summed, not averaged)
inline double reinforce_loss(std::span<const double> log_probs, std::span<const double> advantages,
                             std::span<const double> entropies, double value_coef, double entropy_coef) {
  require(log_probs.size() == advantages.size() && entropies.size() == advantages.size(),
          "reinforce_loss: length mismatch");
  double loss = 0.0;
  for (std::size_t k = 0; k < log_probs.size(); ++k) {
    loss += -log_probs[k] * advantages[k] + value_coef * advantages[k] * advantages[k] - entropy_coef * entropies[k];
  }
  return loss;
}

/// lambda1 * mean over agent-steps of the squared error between decoded and true joint observation.
template <Real Scalar>
double autoencoder_loss(const std::vector<std::vector<Scalar>>& decoded,
                        const std::vector<std::vector<Scalar>>& full_state, double lambda1) {
  require(decoded.size() == full_state.size(), "autoencoder_loss: agent-step count mismatch");
  if (decoded.empty() || lambda1 == 0.0) return 0.0;
  double sum = 0.0;
  for (std::size_t k = 0; k < decoded.size(); ++k)
    sum += static_cast<double>(numerics::l2_loss<Scalar>(decoded[k], full_state[k]));
  return lambda1 * sum / static_cast<double>(decoded.size());
}

/// b + (1 - b*), clamped to [0, 1].
inline double budget_target(double b, double bstar) { return std::clamp(b + (1.0 - bstar), 0.0, 1.0); }

inline bool budget_penalized(double m_avg, double b, double bstar, bool strict) {
  if (strict) return m_avg > b && m_avg < bstar;
  return m_avg > b;
}

/// lambda2 * (m_avg - target)^2 when m_avg exceeds the budget, else 0.
inline double budget_penalty(double m_avg, double b, double bstar, double lambda2, bool strict = false) {
  if (!budget_penalized(m_avg, b, bstar, strict)) return 0.0;
  const double d = m_avg - budget_target(b, bstar);
  return lambda2 * d * d;
}

/// d penalty / d m_avg.
inline double budget_penalty_slope(double m_avg, double b, double bstar, double lambda2, bool strict = false) {
  if (!budget_penalized(m_avg, b, bstar, strict)) return 0.0;
  return 2.0 * lambda2 * (m_avg - budget_target(b, bstar));
}

/// Categorical entropy.
template <Real Scalar>
double entropy(std::span<const Scalar> p) {
  double h = 0.0;
  for (Scalar v : p)
    if (v > Scalar{0}) h -= static_cast<double>(v) * std::log(static_cast<double>(v));
  return h;
}

}  // namespace imgsmac::training
