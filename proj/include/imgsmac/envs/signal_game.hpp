#pragma once

#include <utility>
#include <vector>

#include "imgsmac/envs/environment.hpp"

namespace imgsmac::envs {

/// Two-agent signaling game. Each step the speaker (agent 0) sees a binary context, or is absent
/// with probability idle_prob. The listener (agent 1) sees nothing but its role and must choose:
///   speaker absent      -> action 0 is correct
///   context 0           -> action 0 is correct (any action when free_context is set)
///   context 1           -> action 1 is correct
/// Both present agents receive correct_reward when the listener is right, 0 otherwise.
/// Observation: [present, is_listener, context==0, context==1].
class SignalGame final : public Environment {
 public:
  explicit SignalGame(EnvConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    require(cfg_.kind == EnvKind::signal_game, "SignalGame needs kind signal_game");
  }

  std::size_t agent_count() const override { return 2; }
  std::size_t observation_dim() const override { return 4; }
  std::size_t action_count() const override { return 2; }
  std::size_t max_steps() const override { return cfg_.max_steps; }
  std::pair<double, double> reward_bounds() const override { return {0.0, cfg_.correct_reward}; }
  const EnvConfig& config() const override { return cfg_; }

  bool speaker_present() const { return present_; }
  int context() const { return context_; }

  /// Test hook.
  void set_state(bool present, int context) {
    present_ = present;
    context_ = context;
  }

  /// Whether listener action `a` is rewarded in the given situation.
  static bool correct(const EnvConfig& cfg, bool present, int context, int a) {
    if (!present) return a == 0;
    if (context == 0) return cfg.free_context || a == 0;
    return a == 1;
  }

  StepResult reset(std::uint64_t seed) override {
    rng_.seed(seed);
    t_ = 0;
    draw();
    StepResult res = blank_result();
    res.new_lifetime = {true, true};
    fill_observations(res);
    return res;
  }

  StepResult step(std::span<const int> actions) override {
    require(actions.size() == 2, "expected one action per agent");
    StepResult res = blank_result();
    if (!present_ && actions[0] != kNoAction) ++res.info.ignored_actions;
    const bool ok = correct(cfg_, present_, context_, actions[1]);
    if (!ok) ++res.info.failures;
    const double r = ok ? cfg_.correct_reward : 0.0;
    res.rewards[1] = r;
    if (present_) res.rewards[0] = r;
    ++t_;
    res.done = t_ >= cfg_.max_steps;
    draw();
    fill_observations(res);
    return res;
  }

 private:
  void draw() {
    const double u = uniform01(rng_);
    const double v = uniform01(rng_);
    present_ = u >= cfg_.idle_prob;
    context_ = v < 0.5 ? 0 : 1;
  }

  StepResult blank_result() const {
    StepResult r;
    r.rewards.assign(2, 0.0);
    r.active.assign(2, true);
    r.new_lifetime.assign(2, false);
    r.observations.assign(2, Observation(4, 0.0));
    return r;
  }

  void fill_observations(StepResult& res) const {
    res.active[0] = present_;
    if (present_) {
      res.observations[0][0] = 1.0;
      res.observations[0][2 + context_] = 1.0;
    }
    res.observations[1][0] = 1.0;
    res.observations[1][1] = 1.0;
  }

  EnvConfig cfg_;
  Rng rng_;
  bool present_ = true;
  int context_ = 0;
  std::size_t t_ = 0;
};

}  // namespace imgsmac::envs
