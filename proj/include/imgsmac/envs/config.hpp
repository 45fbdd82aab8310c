#pragma once

#include <cstddef>
#include <string>

#include "imgsmac/common.hpp"

namespace imgsmac::envs {

enum class EnvKind { traffic_junction, predator_prey, signal_game };
enum class Difficulty { easy, medium, hard };

inline std::string to_string(EnvKind k) {
  switch (k) {
    case EnvKind::traffic_junction: return "traffic_junction";
    case EnvKind::predator_prey: return "predator_prey";
    case EnvKind::signal_game: return "signal_game";
  }
  return "?";
}

inline std::string to_string(Difficulty d) {
  switch (d) {
    case Difficulty::easy: return "easy";
    case Difficulty::medium: return "medium";
    case Difficulty::hard: return "hard";
  }
  return "?";
}

inline EnvKind parse_env_kind(const std::string& s) {
  if (s == "traffic_junction") return EnvKind::traffic_junction;
  if (s == "predator_prey") return EnvKind::predator_prey;
  if (s == "signal_game") return EnvKind::signal_game;
  throw ConfigError("unknown env kind '" + s + "' (expected traffic_junction | predator_prey | signal_game)");
}

inline Difficulty parse_difficulty(const std::string& s) {
  if (s == "easy") return Difficulty::easy;
  if (s == "medium") return Difficulty::medium;
  if (s == "hard") return Difficulty::hard;
  throw ConfigError("unknown difficulty '" + s + "' (expected easy | medium | hard)");
}

struct EnvConfig {
  EnvKind kind = EnvKind::traffic_junction;
  Difficulty difficulty = Difficulty::easy;
  std::size_t grid = 7;
  std::size_t max_steps = 20;
  std::size_t agents = 5;

  // traffic junction
  double arrival_prob = 0.3;
  double collision_reward = -10.0;
  double delay_coef = 0.01;  // per-step reward -delay_coef * steps_since_spawn

  // predator-prey
  std::size_t vision = 1;
  double step_reward = -0.05;
  double prey_reward = 0.05;  // per co-located predator, per step

  // signal game: agent 0 sees a binary context, agent 1 must act on it
  double idle_prob = 0.0;     // probability the speaker is absent for a step
  bool free_context = false;  // context 0 rewards any listener action
  double correct_reward = 1.0;

  void validate() const {
    require(agents >= 2, "env.agents must be >= 2");
    require(max_steps >= 1, "env.max_steps must be >= 1");
    require(grid >= 1, "env.grid must be positive");
    require(arrival_prob >= 0.0 && arrival_prob <= 1.0, "env.arrival_prob must lie in [0,1]");
    require(idle_prob >= 0.0 && idle_prob < 1.0, "env.idle_prob must lie in [0,1)");
    if (kind == EnvKind::signal_game) require(agents == 2, "signal_game requires exactly 2 agents");
    if (kind == EnvKind::predator_prey) require(grid * grid > agents, "predator_prey grid too small for agents");
    if (kind == EnvKind::traffic_junction) {
      const std::size_t min_grid = difficulty == Difficulty::easy ? 7 : difficulty == Difficulty::medium ? 14 : 18;
      require(grid >= min_grid, "traffic_junction " + to_string(difficulty) + " needs grid >= " + std::to_string(min_grid));
    }
  }
};

/// Defaults per environment and difficulty.
inline EnvConfig preset(EnvKind kind, Difficulty difficulty) {
  EnvConfig c;
  c.kind = kind;
  c.difficulty = difficulty;
  switch (kind) {
    case EnvKind::traffic_junction:
      c.grid = difficulty == Difficulty::easy ? 7 : difficulty == Difficulty::medium ? 14 : 18;
      c.max_steps = difficulty == Difficulty::easy ? 20 : difficulty == Difficulty::medium ? 40 : 60;
      c.agents = difficulty == Difficulty::easy ? 5 : difficulty == Difficulty::medium ? 10 : 20;
      c.arrival_prob = difficulty == Difficulty::easy ? 0.3 : 0.2;
      break;
    case EnvKind::predator_prey:
      c.grid = difficulty == Difficulty::easy ? 5 : difficulty == Difficulty::medium ? 10 : 20;
      c.agents = difficulty == Difficulty::easy ? 3 : difficulty == Difficulty::medium ? 5 : 10;
      c.max_steps = 80;
      break;
    case EnvKind::signal_game:
      c.grid = 1;
      c.agents = 2;
      c.max_steps = 1;
      break;
  }
  return c;
}

}  // namespace imgsmac::envs
