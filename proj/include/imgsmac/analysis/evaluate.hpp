#pragma once

#include <cstdint>
#include <vector>

#include "imgsmac/training/parallel.hpp"
#include "imgsmac/training/rollout.hpp"
#include "imgsmac/training/trainer.hpp"

namespace imgsmac::analysis {

/// Greedy evaluation settings. Episode e of a run uses streams derived from (seed, e), so two runs
/// with the same seed face identical environment randomness.
struct EvalOptions {
  std::size_t episodes = 500;
  std::uint64_t seed = 0;
  bool gate_forced_open = true;
  const agents::VocabMask* mask = nullptr;
  const agents::VocabMask* suppress = nullptr;
  const agents::ClusterTable* clusters = nullptr;
  std::size_t threads = 1;

  agents::StepControl control() const {
    agents::StepControl ctl;
    ctl.sample = false;
    ctl.gate_forced_open = gate_forced_open;
    ctl.mask = mask;
    ctl.suppress = suppress;
    ctl.clusters = clusters;
    return ctl;
  }
};

struct EvalSummary {
  double success = 0.0;
  double mean_reward = 0.0;
  double m_avg = 0.0;
  std::size_t emitted = 0;
  std::size_t opportunities = 0;
  std::vector<double> rewards;
  std::vector<std::uint8_t> successes;
};

template <Real Scalar>
training::EpisodeRecord eval_episode(const agents::Network<Scalar>& net, envs::Environment& env,
                                     const EvalOptions& opts, std::size_t e, bool record_hidden = false) {
  return training::run_episode(net, env, derive_seed(opts.seed, e, training::kStreamEnv),
                               derive_seed(opts.seed, e, training::kStreamPolicy), opts.control(), record_hidden);
}

template <Real Scalar>
std::vector<training::EpisodeRecord> eval_records(const agents::Network<Scalar>& net, const envs::EnvConfig& env_cfg,
                                                  const EvalOptions& opts) {
  std::vector<training::EpisodeRecord> recs(opts.episodes);
  training::parallel_for(opts.episodes, opts.threads, [&](std::size_t e) {
    auto env = envs::make_environment(env_cfg);
    recs[e] = eval_episode(net, *env, opts, e);
  });
  return recs;
}

inline EvalSummary summarize(const std::vector<training::EpisodeRecord>& recs) {
  EvalSummary s;
  for (const auto& r : recs) {
    const bool ok = r.success();
    s.successes.push_back(ok ? 1 : 0);
    s.rewards.push_back(r.team_reward());
    s.success += ok ? 1.0 : 0.0;
    s.mean_reward += r.team_reward();
    for (std::size_t i = 0; i < r.emitted.size(); ++i) {
      s.emitted += r.emitted[i];
      s.opportunities += r.opportunities[i];
    }
  }
  if (!recs.empty()) {
    s.success /= static_cast<double>(recs.size());
    s.mean_reward /= static_cast<double>(recs.size());
  }
  s.m_avg = s.opportunities ? static_cast<double>(s.emitted) / static_cast<double>(s.opportunities) : 0.0;
  return s;
}

template <Real Scalar>
EvalSummary evaluate(const agents::Network<Scalar>& net, const envs::EnvConfig& env_cfg, const EvalOptions& opts) {
  return summarize(eval_records(net, env_cfg, opts));
}

}  // namespace imgsmac::analysis
