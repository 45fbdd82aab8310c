#pragma once

#include <algorithm>
#include <utility>
#include <vector>

#include "imgsmac/envs/environment.hpp"

namespace imgsmac::envs {

/// Cooperative predator-prey on a square grid with a stationary prey. Predators see a
/// (2v+1)^2 window (outside-grid / other predator / prey per cell), their normalized position,
/// and whether they have reached the prey. A predator that reaches the prey stays there.
class PredatorPrey final : public Environment {
 public:
  enum Action : int { kUp = 0, kDown = 1, kLeft = 2, kRight = 3, kStay = 4 };

  struct Pos {
    int row, col;
    friend bool operator==(const Pos&, const Pos&) = default;
  };

  explicit PredatorPrey(EnvConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    require(cfg_.kind == EnvKind::predator_prey, "PredatorPrey needs kind predator_prey");
    predators_.resize(cfg_.agents);
    reached_.assign(cfg_.agents, false);
  }

  std::size_t agent_count() const override { return cfg_.agents; }
  std::size_t observation_dim() const override {
    const std::size_t w = 2 * cfg_.vision + 1;
    return 3 * w * w + 3;
  }
  std::size_t action_count() const override { return 5; }
  std::size_t max_steps() const override { return cfg_.max_steps; }
  std::pair<double, double> reward_bounds() const override {
    return {std::min(cfg_.step_reward, 0.0), std::max(0.0, cfg_.prey_reward * static_cast<double>(cfg_.agents))};
  }
  const EnvConfig& config() const override { return cfg_; }

  Pos predator(std::size_t i) const { return predators_[i]; }
  Pos prey() const { return prey_; }
  bool reached(std::size_t i) const { return reached_[i]; }

  /// Test hook: sets positions directly.
  void place(std::vector<Pos> predators, Pos prey) {
    require(predators.size() == cfg_.agents, "place: one position per predator");
    predators_ = std::move(predators);
    prey_ = prey;
    for (std::size_t i = 0; i < cfg_.agents; ++i) reached_[i] = predators_[i] == prey_;
    t_ = 0;
  }

  StepResult reset(std::uint64_t seed) override {
    rng_.seed(seed);
    t_ = 0;
    const std::size_t cells = cfg_.grid * cfg_.grid;
    // distinct cells: partial Fisher-Yates over cell indices
    std::vector<std::size_t> idx(cells);
    for (std::size_t k = 0; k < cells; ++k) idx[k] = k;
    for (std::size_t k = 0; k <= cfg_.agents; ++k) std::swap(idx[k], idx[k + uniform_index(rng_, cells - k)]);
    auto to_pos = [&](std::size_t k) { return Pos{static_cast<int>(k / cfg_.grid), static_cast<int>(k % cfg_.grid)}; };
    prey_ = to_pos(idx[0]);
    for (std::size_t i = 0; i < cfg_.agents; ++i) predators_[i] = to_pos(idx[i + 1]);
    reached_.assign(cfg_.agents, false);
    StepResult res = blank_result();
    res.new_lifetime.assign(cfg_.agents, true);
    fill_observations(res);
    return res;
  }

  StepResult step(std::span<const int> actions) override {
    require(actions.size() == cfg_.agents, "expected one action per predator");
    StepResult res = blank_result();
    const int n = static_cast<int>(cfg_.grid);
    for (std::size_t i = 0; i < cfg_.agents; ++i) {
      if (reached_[i]) continue;
      Pos& p = predators_[i];
      switch (actions[i]) {
        case kUp: p.row -= 1; break;
        case kDown: p.row += 1; break;
        case kLeft: p.col -= 1; break;
        case kRight: p.col += 1; break;
        default: break;
      }
      p.row = std::clamp(p.row, 0, n - 1);
      p.col = std::clamp(p.col, 0, n - 1);
      if (p == prey_) reached_[i] = true;
    }
    const auto on_prey = static_cast<std::size_t>(std::count(reached_.begin(), reached_.end(), true));
    for (std::size_t i = 0; i < cfg_.agents; ++i)
      res.rewards[i] = reached_[i] ? cfg_.prey_reward * static_cast<double>(on_prey) : cfg_.step_reward;
    ++t_;
    res.info.prey_reached = on_prey;
    res.done = on_prey == cfg_.agents || t_ >= cfg_.max_steps;
    fill_observations(res);
    return res;
  }

 private:
  StepResult blank_result() const {
    StepResult r;
    r.rewards.assign(cfg_.agents, 0.0);
    r.active.assign(cfg_.agents, true);
    r.new_lifetime.assign(cfg_.agents, false);
    r.observations.assign(cfg_.agents, Observation(observation_dim(), 0.0));
    return r;
  }

  void fill_observations(StepResult& res) const {
    const int v = static_cast<int>(cfg_.vision);
    const int n = static_cast<int>(cfg_.grid);
    const int w = 2 * v + 1;
    for (std::size_t i = 0; i < cfg_.agents; ++i) {
      auto& o = res.observations[i];
      const Pos me = predators_[i];
      for (int dr = -v; dr <= v; ++dr) {
        for (int dc = -v; dc <= v; ++dc) {
          const std::size_t base = 3 * static_cast<std::size_t>((dr + v) * w + (dc + v));
          const Pos q{me.row + dr, me.col + dc};
          if (q.row < 0 || q.col < 0 || q.row >= n || q.col >= n) {
            o[base] = 1.0;
            continue;
          }
          for (std::size_t j = 0; j < cfg_.agents; ++j)
            if (j != i && predators_[j] == q) o[base + 1] = 1.0;
          if (prey_ == q) o[base + 2] = 1.0;
        }
      }
      const std::size_t tail = 3 * static_cast<std::size_t>(w * w);
      const double scale = n > 1 ? 1.0 / (n - 1) : 0.0;
      o[tail] = me.row * scale;
      o[tail + 1] = me.col * scale;
      o[tail + 2] = reached_[i] ? 1.0 : 0.0;
    }
  }

  EnvConfig cfg_;
  std::vector<Pos> predators_;
  std::vector<bool> reached_;
  Pos prey_{0, 0};
  Rng rng_;
  std::size_t t_ = 0;
};

}  // namespace imgsmac::envs
