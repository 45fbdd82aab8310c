#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "imgsmac/analysis/token_stats.hpp"

namespace imgsmac::analysis {

struct PairEffect {
  int token = -1;
  int recipient = agents::kAllRecipients;
  std::size_t emissions = 0;         // in the baseline episodes
  std::size_t episodes_emitted = 0;  // baseline episodes in which the pair occurred
  bool defined = false;              // false when the pair never occurred
  double delta = 0.0;                // mean episodic team reward, baseline minus suppressed
};

namespace detail {

inline bool pair_occurs(const training::EpisodeRecord& r, int token, int recipient, std::size_t* count = nullptr) {
  std::size_t n = 0;
  for (const auto& s : r.log.steps) {
    for (std::size_t i = 0; i < s.tokens.size(); ++i) {
      if (s.tokens[i] != token) continue;
      for (std::size_t j = 0; j < s.gates[i].size(); ++j)
        if (s.gates[i][j] && (recipient == agents::kAllRecipients || static_cast<int>(j) == recipient)) ++n;
    }
  }
  if (count) *count = n;
  return n > 0;
}

template <Real Scalar>
PairEffect pair_effect(const agents::Network<Scalar>& net, const envs::EnvConfig& env_cfg, const EvalOptions& opts,
                       const std::vector<training::EpisodeRecord>& baseline, int token, int recipient) {
  PairEffect pe;
  pe.token = token;
  pe.recipient = recipient;
  if (baseline.empty()) return pe;
  agents::VocabMask suppress(recipient == agents::kAllRecipients ? agents::MaskMode::global
                                                                  : agents::MaskMode::per_recipient);
  suppress.add(token, recipient);
  EvalOptions cf = opts;
  cf.suppress = &suppress;
  std::vector<double> diff(baseline.size(), 0.0);
  std::vector<std::size_t> counts(baseline.size(), 0);
  training::parallel_for(baseline.size(), opts.threads, [&](std::size_t e) {
    // An edge absent from the baseline cannot change anything when suppressed: the difference is exactly 0.
    if (!pair_occurs(baseline[e], token, recipient, &counts[e])) return;
    auto env = envs::make_environment(env_cfg);
    const auto alt = eval_episode(net, *env, cf, e);
    diff[e] = baseline[e].team_reward() - alt.team_reward();
  });
  double sum = 0.0;
  for (std::size_t e = 0; e < baseline.size(); ++e) {
    sum += diff[e];
    pe.emissions += counts[e];
    pe.episodes_emitted += counts[e] ? 1 : 0;
  }
  pe.defined = pe.episodes_emitted > 0;
  pe.delta = pe.defined ? sum / static_cast<double>(baseline.size()) : 0.0;
  return pe;
}

}  // namespace detail

/// Per-episode reward differences between paired runs with identical randomness, the second run
/// suppressing the edges in `suppress`. Both runs are always executed.
template <Real Scalar>
std::vector<double> paired_differences(const agents::Network<Scalar>& net, const envs::EnvConfig& env_cfg,
                                       const EvalOptions& opts, const agents::VocabMask& suppress) {
  EvalOptions cf = opts;
  cf.suppress = &suppress;
  std::vector<double> diff(opts.episodes, 0.0);
  training::parallel_for(opts.episodes, opts.threads, [&](std::size_t e) {
    auto env = envs::make_environment(env_cfg);
    const auto a = eval_episode(net, *env, opts, e);
    auto env2 = envs::make_environment(env_cfg);
    const auto b = eval_episode(net, *env2, cf, e);
    diff[e] = a.team_reward() - b.team_reward();
  });
  return diff;
}

/// Mean change in episodic team reward when edges carrying `token` to `recipient` are suppressed
/// (kAllRecipients: towards anyone). Undefined when the pair never occurs in the sample.
template <Real Scalar>
std::optional<double> causal_token_effect(const agents::Network<Scalar>& net, const envs::EnvConfig& env_cfg,
                                          int token, int recipient, EvalOptions opts) {
  opts.gate_forced_open = true;
  opts.suppress = nullptr;
  const auto baseline = eval_records(net, env_cfg, opts);
  const auto pe = detail::pair_effect(net, env_cfg, opts, baseline, token, recipient);
  if (!pe.defined) return std::nullopt;
  return pe.delta;
}

/// Effects of every (token, recipient) pair seen in `stats` (one pair per token in global mode),
/// measured against greedy open-gate baseline episodes.
template <Real Scalar>
std::vector<PairEffect> causal_effects(const agents::Network<Scalar>& net, const envs::EnvConfig& env_cfg,
                                       const TokenStatsReport& stats, EvalOptions opts,
                                       agents::MaskMode mode = agents::MaskMode::per_recipient) {
  opts.gate_forced_open = true;
  opts.suppress = nullptr;
  const auto baseline = eval_records(net, env_cfg, opts);
  std::vector<PairEffect> out;
  for (const auto& ts : stats.tokens) {
    if (mode == agents::MaskMode::global) {
      out.push_back(detail::pair_effect(net, env_cfg, opts, baseline, ts.token_id, agents::kAllRecipients));
      continue;
    }
    for (std::size_t j = 0; j < ts.recipient_counts.size(); ++j)
      if (ts.recipient_counts[j] > 0)
        out.push_back(detail::pair_effect(net, env_cfg, opts, baseline, ts.token_id, static_cast<int>(j)));
  }
  return out;
}

/// Pairs whose measured |delta| is below epsilon. Undefined pairs are never masked.
inline agents::VocabMask build_null_mask(const std::vector<PairEffect>& effects, double epsilon,
                                         agents::MaskMode mode = agents::MaskMode::per_recipient,
                                         const std::string& checkpoint_hash = "") {
  agents::VocabMask mask(mode);
  mask.set_checkpoint_hash(checkpoint_hash);
  for (const auto& pe : effects) {
    if (!pe.defined || !std::isfinite(pe.delta)) continue;
    if (std::abs(pe.delta) < epsilon) mask.add(pe.token, pe.recipient);
  }
  return mask;
}

}  // namespace imgsmac::analysis
