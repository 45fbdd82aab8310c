#pragma once

#include <cstdint>
#include <string>

#include "imgsmac/common.hpp"
#include "imgsmac/numerics/rmsprop.hpp"

namespace imgsmac::training {

enum class Phase { pretrain, finetune, tri_objective };

inline std::string to_string(Phase p) {
  switch (p) {
    case Phase::pretrain: return "pretrain";
    case Phase::finetune: return "finetune";
    case Phase::tri_objective: return "tri_objective";
  }
  return "?";
}

inline Phase parse_phase(const std::string& s) {
  if (s == "pretrain") return Phase::pretrain;
  if (s == "finetune") return Phase::finetune;
  if (s == "tri_objective") return Phase::tri_objective;
  throw ConfigError("unknown schedule '" + s + "' (pretrain|finetune|tri_objective)");
}

struct TrainConfig {
  double gamma = 0.99;
  double lambda1 = 0.1;   // autoencoder weight
  double lambda2 = 10.0;  // budget penalty weight
  double budget = 1.0;
  double bstar = 1.0;
  bool strict_penalty = false;  // penalize only for budget < m_avg < bstar
  Phase schedule = Phase::pretrain;
  std::size_t epochs = 100;
  std::size_t finetune_epochs = 10;
  std::size_t samples_per_epoch = 5000;
  std::size_t seeds = 10;
  double learning_rate = 0.003;
  double rms_decay = 0.99;
  double rms_eps = 1e-8;
  double value_coef = 0.5;
  double entropy_coef = 0.01;
  std::size_t threads = 1;  // 0: hardware concurrency
  std::size_t block_episodes = 8;

  void validate() const {
    require(budget > 0.0 && budget <= 1.0, "train.budget must be in (0, 1]");
    require(bstar >= 0.0 && bstar <= 1.0, "train.bstar must be in [0, 1]");
    require(gamma >= 0.0 && gamma <= 1.0, "train.gamma must be in [0, 1]");
    require(lambda1 >= 0.0, "train.lambda1 must be >= 0");
    require(lambda2 >= 0.0, "train.lambda2 must be >= 0");
    require(epochs >= 1, "train.epochs must be >= 1");
    require(samples_per_epoch >= 1, "train.samples_per_epoch must be >= 1");
    require(seeds >= 1, "train.seeds must be >= 1");
    require(learning_rate > 0.0, "train.learning_rate must be positive");
    require(rms_decay > 0.0 && rms_decay < 1.0, "train.rms_decay must be in (0, 1)");
    require(rms_eps > 0.0, "train.rms_eps must be positive");
    require(value_coef >= 0.0 && entropy_coef >= 0.0, "train.value_coef and train.entropy_coef must be >= 0");
    require(block_episodes >= 1, "train.block_episodes must be >= 1");
  }

  numerics::RmsPropConfig optimizer() const { return {learning_rate, rms_decay, rms_eps}; }
};

}  // namespace imgsmac::training
