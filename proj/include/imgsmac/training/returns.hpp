#pragma once

#include <span>
#include <vector>

#include "imgsmac/common.hpp"

namespace imgsmac::training {

/// G_t = r_t + gamma * G_{t+1}, G_T = r_T.
inline std::vector<double> compute_returns(std::span<const double> rewards, double gamma) {
  std::vector<double> g(rewards.size(), 0.0);
  double acc = 0.0;
  for (std::size_t k = rewards.size(); k-- > 0;) {
    acc = rewards[k] + gamma * acc;
    g[k] = acc;
  }
  return g;
}

/// Per-agent returns over lifetime segments. rewards[t][i] is agent i's reward for acting at t.
/// A segment ends when the agent is inactive or the next step starts a new lifetime.
/// Entries for inactive steps are 0.
inline std::vector<std::vector<double>> segment_returns(const std::vector<std::vector<double>>& rewards,
                                                        const std::vector<std::vector<bool>>& active,
                                                        const std::vector<std::vector<bool>>& fresh, double gamma) {
  const std::size_t T = rewards.size();
  std::vector<std::vector<double>> g(T);
  if (T == 0) return g;
  const std::size_t N = rewards.front().size();
  for (auto& row : g) row.assign(N, 0.0);
  for (std::size_t i = 0; i < N; ++i) {
    double acc = 0.0;
    for (std::size_t t = T; t-- > 0;) {
      if (!active[t][i]) {
        acc = 0.0;
        continue;
      }
      const bool boundary = t + 1 >= T || !active[t + 1][i] || fresh[t + 1][i];
      acc = rewards[t][i] + (boundary ? 0.0 : gamma * acc);
      g[t][i] = acc;
    }
  }
  return g;
}

}  // namespace imgsmac::training
