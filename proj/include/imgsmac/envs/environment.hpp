#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <utility>
#include <vector>

#include "imgsmac/envs/config.hpp"

namespace imgsmac::envs {

using Observation = std::vector<double>;

inline constexpr int kNoAction = -1;

struct StepInfo {
  std::size_t collisions = 0;       // traffic junction: cells holding 2+ cars
  std::size_t prey_reached = 0;     // predator-prey: predators locked on the prey
  std::size_t failures = 0;         // signal game: wrong listener actions
  std::size_t ignored_actions = 0;  // actions submitted for inactive agents
};

/// Observations are for the state after the step (or after reset). `new_lifetime[i]` marks an agent
/// slot that now holds a fresh entity, so recurrent state and returns must not carry over.
struct StepResult {
  std::vector<Observation> observations;
  std::vector<double> rewards;
  std::vector<bool> active;
  std::vector<bool> new_lifetime;
  bool done = false;
  StepInfo info;
};

class Environment {
 public:
  virtual ~Environment() = default;

  virtual StepResult reset(std::uint64_t seed) = 0;
  /// One action per agent slot; kNoAction (or any value) for inactive slots is ignored.
  virtual StepResult step(std::span<const int> actions) = 0;

  virtual std::size_t agent_count() const = 0;
  virtual std::size_t observation_dim() const = 0;
  virtual std::size_t action_count() const = 0;
  virtual std::size_t max_steps() const = 0;
  virtual std::pair<double, double> reward_bounds() const = 0;
  virtual const EnvConfig& config() const = 0;
};

}  // namespace imgsmac::envs
