#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "imgsmac/agents/network.hpp"
#include "imgsmac/envs/config.hpp"
#include "imgsmac/training/config.hpp"
#include "imgsmac/training/metrics.hpp"

namespace imgsmac::cli {

enum class Precision { f64, f32 };

struct AnalysisConfig {
  double epsilon = 1e-3;
  std::size_t episodes = 500;
  std::size_t clusters = 64;
  std::size_t restarts = 10;
  agents::MaskMode mask_mode = agents::MaskMode::per_recipient;
  std::uint64_t eval_seed = 1000003;
  std::vector<double> budgets = {1.0, 0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2, 0.1};

  void validate() const {
    require(epsilon >= 0.0, "analysis.epsilon must be >= 0");
    require(episodes >= 1, "analysis.episodes must be >= 1");
    require(clusters >= 1, "analysis.clusters must be >= 1");
    require(restarts >= 1, "analysis.restarts must be >= 1");
    for (double b : budgets) require(b >= 0.0 && b <= 1.0, "analysis.budgets entries must lie in [0, 1]");
  }
};

struct ExperimentConfig {
  envs::EnvConfig env = envs::preset(envs::EnvKind::traffic_junction, envs::Difficulty::easy);
  agents::ModelConfig model;
  training::TrainConfig train;
  AnalysisConfig analysis;
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  std::string out = "runs/default";
  Precision precision = Precision::f64;

  void validate() const {
    env.validate();
    train.validate();
    analysis.validate();
    require(model.hidden > 0, "model.hidden must be positive");
    require(model.message_dim > 0, "model.message_dim must be positive");
    if (model.message_mode == agents::MessageMode::discrete) require(model.prototypes >= 2, "model.prototypes must be >= 2");
    require(!seeds.empty(), "run.seeds must list at least one seed");
    require(!out.empty(), "run.out must not be empty");
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline double to_double(const std::string& key, const std::string& v) {
  double d = 0.0;
  const auto* end = v.data() + v.size();
  const auto res = std::from_chars(v.data(), end, d);
  if (res.ec != std::errc() || res.ptr != end) throw ConfigError(key + ": expected a number, got '" + v + "'");
  return d;
}

inline std::uint64_t to_u64(const std::string& key, const std::string& v) {
  std::uint64_t x = 0;
  const auto* end = v.data() + v.size();
  const auto res = std::from_chars(v.data(), end, x);
  if (res.ec != std::errc() || res.ptr != end) throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  return x;
}

inline bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

inline std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

inline std::string fmt(double v) { return training::format_double(v); }
inline std::string fmt(bool v) { return v ? "true" : "false"; }

struct Field {
  std::string key;
  std::string doc;
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, const std::string&)> set;
};

inline std::vector<Field> fields() {
  std::vector<Field> f;
  auto num = [&f](std::string key, std::string doc, auto member) {
    f.push_back({key, std::move(doc), [member](const ExperimentConfig& c) { return fmt(member(const_cast<ExperimentConfig&>(c))); },
                 [member, key](ExperimentConfig& c, const std::string& v) { member(c) = to_double(key, v); }});
  };
  auto count = [&f](std::string key, std::string doc, auto member) {
    f.push_back({key, std::move(doc),
                 [member](const ExperimentConfig& c) { return std::to_string(member(const_cast<ExperimentConfig&>(c))); },
                 [member, key](ExperimentConfig& c, const std::string& v) {
                   member(c) = static_cast<std::remove_reference_t<decltype(member(c))>>(to_u64(key, v));
                 }});
  };
  auto flag = [&f](std::string key, std::string doc, auto member) {
    f.push_back({key, std::move(doc), [member](const ExperimentConfig& c) { return fmt(member(const_cast<ExperimentConfig&>(c))); },
                 [member, key](ExperimentConfig& c, const std::string& v) { member(c) = to_bool(key, v); }});
  };

  // env.kind and env.difficulty are applied first and reset the remaining env keys to their preset.
  f.push_back({"env.kind", "traffic_junction | predator_prey | signal_game",
               [](const ExperimentConfig& c) { return envs::to_string(c.env.kind); },
               [](ExperimentConfig& c, const std::string& v) { c.env.kind = envs::parse_env_kind(v); }});
  f.push_back({"env.difficulty", "easy | medium | hard",
               [](const ExperimentConfig& c) { return envs::to_string(c.env.difficulty); },
               [](ExperimentConfig& c, const std::string& v) { c.env.difficulty = envs::parse_difficulty(v); }});
  count("env.grid", "grid side length", [](ExperimentConfig& c) -> std::size_t& { return c.env.grid; });
  count("env.max_steps", "episode length T", [](ExperimentConfig& c) -> std::size_t& { return c.env.max_steps; });
  count("env.agents", "number of agents N", [](ExperimentConfig& c) -> std::size_t& { return c.env.agents; });
  num("env.arrival_prob", "traffic junction: car arrival probability per entry and step",
      [](ExperimentConfig& c) -> double& { return c.env.arrival_prob; });
  num("env.collision_reward", "traffic junction: reward per car involved in a collision",
      [](ExperimentConfig& c) -> double& { return c.env.collision_reward; });
  num("env.delay_coef", "traffic junction: time penalty coefficient",
      [](ExperimentConfig& c) -> double& { return c.env.delay_coef; });
  count("env.vision", "predator-prey: observation radius", [](ExperimentConfig& c) -> std::size_t& { return c.env.vision; });
  num("env.step_reward", "predator-prey: reward per step before reaching the prey",
      [](ExperimentConfig& c) -> double& { return c.env.step_reward; });
  num("env.prey_reward", "predator-prey: reward per predator on the prey",
      [](ExperimentConfig& c) -> double& { return c.env.prey_reward; });
  num("env.idle_prob", "signal game: probability the speaker is absent",
      [](ExperimentConfig& c) -> double& { return c.env.idle_prob; });
  flag("env.free_context", "signal game: context 0 accepts any listener action",
       [](ExperimentConfig& c) -> bool& { return c.env.free_context; });
  num("env.correct_reward", "signal game: reward for a correct listener action",
      [](ExperimentConfig& c) -> double& { return c.env.correct_reward; });

  count("model.hidden", "hidden units of both recurrent cells", [](ExperimentConfig& c) -> std::size_t& { return c.model.hidden; });
  count("model.message_dim", "message dimension d_m", [](ExperimentConfig& c) -> std::size_t& { return c.model.message_dim; });
  count("model.prototypes", "discrete vocabulary size K", [](ExperimentConfig& c) -> std::size_t& { return c.model.prototypes; });
  f.push_back({"model.message_mode", "continuous | discrete",
               [](const ExperimentConfig& c) { return agents::to_string(c.model.message_mode); },
               [](ExperimentConfig& c, const std::string& v) {
                 require(v == "continuous" || v == "discrete", "model.message_mode: expected continuous or discrete, got '" + v + "'");
                 c.model.message_mode = v == "discrete" ? agents::MessageMode::discrete : agents::MessageMode::continuous;
               }});
  f.push_back({"model.gate_mode", "targeting | broadcast",
               [](const ExperimentConfig& c) { return agents::to_string(c.model.gate_mode); },
               [](ExperimentConfig& c, const std::string& v) {
                 require(v == "targeting" || v == "broadcast", "model.gate_mode: expected targeting or broadcast, got '" + v + "'");
                 c.model.gate_mode = v == "broadcast" ? agents::GateMode::broadcast : agents::GateMode::targeting;
               }});
  f.push_back({"model.decoder_input", "comm_hidden | hidden_plus_message",
               [](const ExperimentConfig& c) { return agents::to_string(c.model.decoder_input); },
               [](ExperimentConfig& c, const std::string& v) {
                 require(v == "comm_hidden" || v == "hidden_plus_message",
                         "model.decoder_input: expected comm_hidden or hidden_plus_message, got '" + v + "'");
                 c.model.decoder_input =
                     v == "hidden_plus_message" ? agents::DecoderInput::hidden_plus_message : agents::DecoderInput::comm_hidden;
               }});
  num("model.gate_bias_init", "initial gate bias", [](ExperimentConfig& c) -> double& { return c.model.gate_bias_init; });
  num("model.commitment", "prototype commitment weight", [](ExperimentConfig& c) -> double& { return c.model.commitment; });

  num("train.gamma", "discount", [](ExperimentConfig& c) -> double& { return c.train.gamma; });
  num("train.lambda1", "autoencoder loss weight", [](ExperimentConfig& c) -> double& { return c.train.lambda1; });
  num("train.lambda2", "budget penalty weight", [](ExperimentConfig& c) -> double& { return c.train.lambda2; });
  num("train.budget", "target budget b in (0, 1]", [](ExperimentConfig& c) -> double& { return c.train.budget; });
  num("train.bstar", "lossless budget estimate b*", [](ExperimentConfig& c) -> double& { return c.train.bstar; });
  flag("train.strict_penalty", "penalize only for b < m_avg < b*", [](ExperimentConfig& c) -> bool& { return c.train.strict_penalty; });
  f.push_back({"train.schedule", "pretrain | finetune | tri_objective",
               [](const ExperimentConfig& c) { return training::to_string(c.train.schedule); },
               [](ExperimentConfig& c, const std::string& v) { c.train.schedule = training::parse_phase(v); }});
  count("train.epochs", "training epochs", [](ExperimentConfig& c) -> std::size_t& { return c.train.epochs; });
  count("train.finetune_epochs", "finetune epochs", [](ExperimentConfig& c) -> std::size_t& { return c.train.finetune_epochs; });
  count("train.samples_per_epoch", "environment steps per epoch",
        [](ExperimentConfig& c) -> std::size_t& { return c.train.samples_per_epoch; });
  num("train.learning_rate", "RMSProp learning rate", [](ExperimentConfig& c) -> double& { return c.train.learning_rate; });
  num("train.rms_decay", "RMSProp decay", [](ExperimentConfig& c) -> double& { return c.train.rms_decay; });
  num("train.rms_eps", "RMSProp epsilon", [](ExperimentConfig& c) -> double& { return c.train.rms_eps; });
  num("train.value_coef", "value loss coefficient", [](ExperimentConfig& c) -> double& { return c.train.value_coef; });
  num("train.entropy_coef", "entropy bonus coefficient", [](ExperimentConfig& c) -> double& { return c.train.entropy_coef; });
  count("train.threads", "worker threads, 0 = all cores", [](ExperimentConfig& c) -> std::size_t& { return c.train.threads; });
  count("train.block_episodes", "episodes per gradient block", [](ExperimentConfig& c) -> std::size_t& { return c.train.block_episodes; });

  num("analysis.epsilon", "null threshold on |delta reward|", [](ExperimentConfig& c) -> double& { return c.analysis.epsilon; });
  count("analysis.episodes", "evaluation episodes", [](ExperimentConfig& c) -> std::size_t& { return c.analysis.episodes; });
  count("analysis.clusters", "k-means vocabulary size for continuous messages",
        [](ExperimentConfig& c) -> std::size_t& { return c.analysis.clusters; });
  count("analysis.restarts", "k-means restarts", [](ExperimentConfig& c) -> std::size_t& { return c.analysis.restarts; });
  f.push_back({"analysis.mask_mode", "per_recipient | global",
               [](const ExperimentConfig& c) { return std::string(c.analysis.mask_mode == agents::MaskMode::global ? "global" : "per_recipient"); },
               [](ExperimentConfig& c, const std::string& v) {
                 require(v == "per_recipient" || v == "global", "analysis.mask_mode: expected per_recipient or global, got '" + v + "'");
                 c.analysis.mask_mode = v == "global" ? agents::MaskMode::global : agents::MaskMode::per_recipient;
               }});
  f.push_back({"analysis.eval_seed", "seed of the evaluation episode streams",
               [](const ExperimentConfig& c) { return std::to_string(c.analysis.eval_seed); },
               [](ExperimentConfig& c, const std::string& v) { c.analysis.eval_seed = to_u64("analysis.eval_seed", v); }});
  f.push_back({"analysis.budgets", "comma separated sweep budgets",
               [](const ExperimentConfig& c) {
                 std::string s;
                 for (std::size_t k = 0; k < c.analysis.budgets.size(); ++k) s += (k ? "," : "") + fmt(c.analysis.budgets[k]);
                 return s;
               },
               [](ExperimentConfig& c, const std::string& v) {
                 c.analysis.budgets.clear();
                 for (const auto& item : split_list(v)) c.analysis.budgets.push_back(to_double("analysis.budgets", item));
               }});

  f.push_back({"run.seeds", "comma separated training seeds",
               [](const ExperimentConfig& c) {
                 std::string s;
                 for (std::size_t k = 0; k < c.seeds.size(); ++k) s += (k ? "," : "") + std::to_string(c.seeds[k]);
                 return s;
               },
               [](ExperimentConfig& c, const std::string& v) {
                 c.seeds.clear();
                 for (const auto& item : split_list(v)) c.seeds.push_back(to_u64("run.seeds", item));
               }});
  f.push_back({"run.out", "output directory", [](const ExperimentConfig& c) { return c.out; },
               [](ExperimentConfig& c, const std::string& v) { c.out = v; }});
  f.push_back({"run.precision", "f64 | f32 (training arithmetic)",
               [](const ExperimentConfig& c) { return std::string(c.precision == Precision::f32 ? "f32" : "f64"); },
               [](ExperimentConfig& c, const std::string& v) {
                 require(v == "f64" || v == "f32", "run.precision: expected f64 or f32, got '" + v + "'");
                 c.precision = v == "f32" ? Precision::f32 : Precision::f64;
               }});
  return f;
}

}  // namespace detail

/// Parses `key = value` lines; '#' starts a comment. Unknown or repeated keys are errors.
inline ExperimentConfig parse_config(std::istream& in) {
  std::map<std::string, std::pair<std::string, std::size_t>> kv;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (kv.contains(key)) throw ConfigError("config line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
    kv[key] = {value, lineno};
  }
  const auto fs = detail::fields();
  for (const auto& [key, v] : kv) {
    bool known = false;
    for (const auto& f : fs) known |= f.key == key;
    if (!known) throw ConfigError("config line " + std::to_string(v.second) + ": unknown key '" + key + "'");
  }

  ExperimentConfig cfg;
  auto apply = [&](const detail::Field& f) {
    auto it = kv.find(f.key);
    if (it == kv.end()) return;
    try {
      f.set(cfg, it->second.first);
    } catch (const ConfigError& e) {
      const std::string msg = e.what();
      throw ConfigError("config line " + std::to_string(it->second.second) + ": " +
                        (msg.rfind(f.key, 0) == 0 ? msg : f.key + ": " + msg));
    }
  };
  apply(fs[0]);
  apply(fs[1]);
  cfg.env = envs::preset(cfg.env.kind, cfg.env.difficulty);
  for (std::size_t k = 2; k < fs.size(); ++k) apply(fs[k]);
  cfg.train.seeds = cfg.seeds.size();
  cfg.validate();
  return cfg;
}

inline ExperimentConfig parse_config_string(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), "cannot open config file '" + path + "'");
  return parse_config(in);
}

/// Every key with its current value; parse_config(serialize_config(c)) reproduces c.
inline std::string serialize_config(const ExperimentConfig& cfg, bool with_docs = false) {
  std::string out;
  for (const auto& f : detail::fields()) {
    if (with_docs) out += "# " + f.doc + "\n";
    out += f.key + " = " + f.get(cfg) + "\n";
  }
  return out;
}

inline std::vector<std::pair<std::string, std::string>> documented_keys() {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& f : detail::fields()) out.emplace_back(f.key, f.doc);
  return out;
}

}  // namespace imgsmac::cli
