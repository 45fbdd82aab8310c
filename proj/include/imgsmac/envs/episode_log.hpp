#pragma once

#include <cstdint>
#include <istream>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "imgsmac/envs/environment.hpp"
#include "imgsmac/envs/predator_prey.hpp"
#include "imgsmac/envs/signal_game.hpp"
#include "imgsmac/envs/traffic_junction.hpp"

namespace imgsmac::envs {

/// One timestep: inputs the agents saw at t and what happened.
/// gates[i][j] == 1 iff a message from i was delivered to j at t.
struct StepRecord {
  std::size_t t = 0;
  std::vector<Observation> observations;
  std::vector<bool> active;
  std::vector<int> actions;
  std::vector<int> tokens;  // -1: nothing emitted (or continuous message without a cluster table)
  std::vector<std::vector<double>> messages;
  std::vector<std::vector<std::uint8_t>> gates;
  std::vector<double> rewards;
  std::vector<std::vector<double>> hidden;  // optional; empty unless recorded
  StepInfo info;
  std::uint64_t rng_state_id = 0;
};

struct EpisodeLog {
  EnvKind kind = EnvKind::traffic_junction;
  std::size_t agents = 0;
  std::uint64_t seed = 0;
  std::vector<StepRecord> steps;

  double team_reward() const {
    double r = 0.0;
    for (const auto& s : steps)
      for (double x : s.rewards) r += x;
    return r;
  }
};

/// TJ: no collision in the episode. PP: every predator reached the prey. Signal game: no wrong action.
inline bool episode_success(const EpisodeLog& log) {
  switch (log.kind) {
    case EnvKind::traffic_junction:
      for (const auto& s : log.steps)
        if (s.info.collisions > 0) return false;
      return true;
    case EnvKind::predator_prey:
      return !log.steps.empty() && log.steps.back().info.prey_reached == log.agents;
    case EnvKind::signal_game:
      for (const auto& s : log.steps)
        if (s.info.failures > 0) return false;
      return true;
  }
  return false;
}

inline std::unique_ptr<Environment> make_environment(const EnvConfig& cfg) {
  cfg.validate();
  switch (cfg.kind) {
    case EnvKind::traffic_junction: return std::make_unique<TrafficJunction>(cfg);
    case EnvKind::predator_prey: return std::make_unique<PredatorPrey>(cfg);
    case EnvKind::signal_game: return std::make_unique<SignalGame>(cfg);
  }
  throw ConfigError("unknown environment kind");
}

// Line-delimited episode log. Field order per line:
//   t, observation, active, action, token, message, gate, reward, info, rng
inline nlohmann::ordered_json to_json(const StepRecord& s) {
  nlohmann::ordered_json j;
  j["t"] = s.t;
  j["observation"] = s.observations;
  j["active"] = s.active;
  j["action"] = s.actions;
  j["token"] = s.tokens;
  j["message"] = s.messages;
  j["gate"] = s.gates;
  j["reward"] = s.rewards;
  j["info"] = {{"collisions", s.info.collisions},
               {"prey_reached", s.info.prey_reached},
               {"failures", s.info.failures},
               {"ignored_actions", s.info.ignored_actions}};
  j["rng"] = s.rng_state_id;
  return j;
}

inline StepRecord step_from_json(const nlohmann::ordered_json& j) {
  StepRecord s;
  s.t = j.at("t").get<std::size_t>();
  s.observations = j.at("observation").get<std::vector<Observation>>();
  s.active = j.at("active").get<std::vector<bool>>();
  s.actions = j.at("action").get<std::vector<int>>();
  s.tokens = j.at("token").get<std::vector<int>>();
  s.messages = j.at("message").get<std::vector<std::vector<double>>>();
  s.gates = j.at("gate").get<std::vector<std::vector<std::uint8_t>>>();
  s.rewards = j.at("reward").get<std::vector<double>>();
  const auto& info = j.at("info");
  s.info.collisions = info.at("collisions").get<std::size_t>();
  s.info.prey_reached = info.at("prey_reached").get<std::size_t>();
  s.info.failures = info.at("failures").get<std::size_t>();
  s.info.ignored_actions = info.at("ignored_actions").get<std::size_t>();
  s.rng_state_id = j.at("rng").get<std::uint64_t>();
  return s;
}

inline void write_episode_log(std::ostream& out, const EpisodeLog& log) {
  for (const auto& s : log.steps) out << to_json(s).dump() << '\n';
}

inline std::vector<StepRecord> read_episode_steps(std::istream& in) {
  std::vector<StepRecord> steps;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    steps.push_back(step_from_json(nlohmann::ordered_json::parse(line)));
  }
  return steps;
}

}  // namespace imgsmac::envs
