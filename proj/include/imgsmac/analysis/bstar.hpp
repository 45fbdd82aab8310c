#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include "imgsmac/analysis/token_stats.hpp"

namespace imgsmac::analysis {

struct BStarEstimate {
  bool defined = false;
  double b_star = 1.0;
  double std_dev = 0.0;        // across seeds (single estimate: across episodes)
  std::size_t episodes = 0;    // episodes with a non-zero unmasked baseline
};

/// Mean over evaluation episodes of (emissions under the mask) / (emissions with open gate and no mask).
template <Real Scalar>
BStarEstimate estimate_bstar(const agents::Network<Scalar>& net, const envs::EnvConfig& env_cfg,
                             const agents::VocabMask& mask, EvalOptions opts) {
  opts.gate_forced_open = true;
  opts.suppress = nullptr;
  opts.mask = nullptr;
  const auto open = eval_records(net, env_cfg, opts);
  EvalOptions masked = opts;
  masked.mask = &mask;
  const auto closed = mask.empty() ? open : eval_records(net, env_cfg, masked);
  std::vector<double> ratios;
  for (std::size_t e = 0; e < open.size(); ++e) {
    std::size_t a = 0, b = 0;
    for (auto v : open[e].emitted) a += v;
    for (auto v : closed[e].emitted) b += v;
    if (a == 0) continue;
    ratios.push_back(static_cast<double>(b) / static_cast<double>(a));
  }
  BStarEstimate est;
  est.episodes = ratios.size();
  if (ratios.empty()) return est;
  est.defined = true;
  double sum = 0.0;
  for (double r : ratios) sum += r;
  est.b_star = sum / static_cast<double>(ratios.size());
  double var = 0.0;
  for (double r : ratios) var += (r - est.b_star) * (r - est.b_star);
  est.std_dev = ratios.size() > 1 ? std::sqrt(var / static_cast<double>(ratios.size() - 1)) : 0.0;
  return est;
}

/// Fraction of tallied emissions that the mask leaves in place.
inline BStarEstimate estimate_bstar_from_stats(const TokenStatsReport& stats, const agents::VocabMask& mask) {
  BStarEstimate est;
  est.episodes = stats.episodes;
  if (stats.total_emissions == 0) return est;
  std::size_t suppressed = 0;
  for (const auto& ts : stats.tokens)
    for (std::size_t j = 0; j < ts.recipient_counts.size(); ++j)
      if (mask.suppresses(ts.token_id, static_cast<int>(j))) suppressed += ts.recipient_counts[j];
  est.defined = true;
  est.b_star = 1.0 - static_cast<double>(suppressed) / static_cast<double>(stats.total_emissions);
  return est;
}

/// Mean and sample standard deviation of per-seed estimates.
inline BStarEstimate combine_bstar(const std::vector<BStarEstimate>& per_seed) {
  BStarEstimate out;
  std::vector<double> v;
  for (const auto& e : per_seed) {
    if (!e.defined) continue;
    v.push_back(e.b_star);
    out.episodes += e.episodes;
  }
  if (v.empty()) return out;
  out.defined = true;
  double sum = 0.0;
  for (double x : v) sum += x;
  out.b_star = sum / static_cast<double>(v.size());
  double var = 0.0;
  for (double x : v) var += (x - out.b_star) * (x - out.b_star);
  out.std_dev = v.size() > 1 ? std::sqrt(var / static_cast<double>(v.size() - 1)) : 0.0;
  return out;
}

}  // namespace imgsmac::analysis
