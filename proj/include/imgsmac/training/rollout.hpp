#pragma once

#include <cstdint>
#include <vector>

#include "imgsmac/agents/team.hpp"
#include "imgsmac/envs/episode_log.hpp"

namespace imgsmac::training {

/// One played episode plus everything needed to replay it deterministically for the update.
struct EpisodeRecord {
  envs::EpisodeLog log;
  std::vector<std::vector<bool>> fresh;                            // [t][i] state reset before step t
  std::vector<std::vector<std::vector<std::uint8_t>>> gate_bits;   // [t][sender][recipient] decisions before masking
  std::vector<std::vector<double>> values;                         // [t][i] value estimate at rollout time
  std::vector<std::size_t> emitted;                                // per agent, whole episode, after the mask
  std::vector<std::size_t> gated;                                  // per agent, gate decisions before the mask
  std::vector<std::size_t> opportunities;
  std::uint64_t env_seed = 0;
  std::uint64_t policy_seed = 0;

  std::size_t steps() const { return log.steps.size(); }
  std::size_t active_agent_steps() const {
    std::size_t n = 0;
    for (const auto& s : log.steps)
      for (bool a : s.active) n += a ? 1 : 0;
    return n;
  }
  bool success() const { return envs::episode_success(log); }
  double team_reward() const { return log.team_reward(); }

  /// Realized messaging fraction of agent i; -1 when it never had an opportunity.
  double m_avg(std::size_t i) const {
    return opportunities[i] == 0 ? -1.0 : static_cast<double>(emitted[i]) / static_cast<double>(opportunities[i]);
  }
  /// Fraction of opportunities on which the gate of agent i fired, before any mask.
  double gate_rate(std::size_t i) const {
    return opportunities[i] == 0 ? -1.0 : static_cast<double>(gated[i]) / static_cast<double>(opportunities[i]);
  }
};

/// Plays one episode. The environment is seeded with env_seed and the policy sampler with policy_seed,
/// so two calls with equal seeds and controls replay bit-identically.
template <Real Scalar>
EpisodeRecord run_episode(const agents::Network<Scalar>& net, envs::Environment& env, std::uint64_t env_seed,
                          std::uint64_t policy_seed, agents::StepControl ctl, bool record_hidden = false) {
  const std::size_t N = env.agent_count();
  require(N == net.config().agents, "network agent count does not match environment");
  Rng rng(policy_seed);
  ctl.rng = &rng;
  ctl.forced_actions = nullptr;
  ctl.forced_gate_bits = nullptr;

  EpisodeRecord rec;
  rec.env_seed = env_seed;
  rec.policy_seed = policy_seed;
  rec.log.kind = env.config().kind;
  rec.log.agents = N;
  rec.log.seed = env_seed;
  rec.emitted.assign(N, 0);
  rec.gated.assign(N, 0);
  rec.opportunities.assign(N, 0);

  std::vector<agents::AgentState<Scalar>> states(N, net.initial_state());
  std::vector<bool> was_active(N, false);
  auto res = env.reset(env_seed);
  for (std::size_t t = 0; t < env.max_steps(); ++t) {
    std::vector<bool> fresh(N, false);
    for (std::size_t i = 0; i < N; ++i) {
      if (res.active[i] && (!was_active[i] || res.new_lifetime[i])) {
        states[i].reset(net.config().hidden);
        fresh[i] = true;
      }
    }
    envs::StepRecord step;
    step.t = t;
    step.observations = res.observations;
    step.active = res.active;
    step.rng_state_id = mix64(policy_seed + t);
    auto out = agents::team_step(net, states, res.observations, res.active, ctl);

    step.actions = out.actions;
    step.tokens.assign(N, -1);
    step.messages.assign(N, {});
    std::vector<double> values(N, 0.0);
    std::vector<std::vector<std::uint8_t>> bits(N, std::vector<std::uint8_t>(N, 0));
    for (std::size_t i = 0; i < N; ++i) {
      if (!res.active[i]) continue;
      values[i] = static_cast<double>(out.outputs[i].value);
      bits[i] = out.gates[i].bits;
      rec.emitted[i] += out.emitted[i];
      rec.gated[i] += out.gated[i];
      rec.opportunities[i] += out.opportunities[i];
      bool sent = false;
      for (auto d : out.delivered[i]) sent |= d != 0;
      if (sent) {
        step.tokens[i] = out.messages[i].token_id;
        step.messages[i].assign(out.messages[i].vector.begin(), out.messages[i].vector.end());
      }
      if (record_hidden) step.hidden.emplace_back(states[i].hidden.begin(), states[i].hidden.end());
    }
    if (record_hidden) {
      // keep one row per agent slot
      std::vector<std::vector<double>> rows(N);
      for (std::size_t i = 0, k = 0; i < N; ++i)
        if (res.active[i]) rows[i] = std::move(step.hidden[k++]);
      step.hidden = std::move(rows);
    }
    step.gates = out.delivered;

    auto next = env.step(out.actions);
    step.rewards = next.rewards;
    step.info = next.info;
    rec.log.steps.push_back(std::move(step));
    rec.fresh.push_back(std::move(fresh));
    rec.gate_bits.push_back(std::move(bits));
    rec.values.push_back(std::move(values));
    was_active = res.active;
    res = std::move(next);
    if (res.done) break;
  }
  return rec;
}

}  // namespace imgsmac::training
