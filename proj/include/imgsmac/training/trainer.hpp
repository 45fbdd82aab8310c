#pragma once

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "imgsmac/numerics/checkpoint.hpp"
#include "imgsmac/numerics/rmsprop.hpp"
#include "imgsmac/training/config.hpp"
#include "imgsmac/training/metrics.hpp"
#include "imgsmac/training/objective.hpp"
#include "imgsmac/training/parallel.hpp"

namespace imgsmac::training {

// RNG stream ids under a master seed.
inline constexpr std::uint64_t kStreamEnv = 1;
inline constexpr std::uint64_t kStreamPolicy = 2;
inline constexpr std::uint64_t kStreamInit = 3;

struct PhaseSpec {
  Phase phase;
  std::size_t epochs;
};

/// Phase sequence for a configured schedule. finetune needs an existing checkpoint.
inline std::vector<PhaseSpec> schedule(const TrainConfig& cfg, bool have_checkpoint) {
  cfg.validate();
  switch (cfg.schedule) {
    case Phase::pretrain: return {{Phase::pretrain, cfg.epochs}};
    case Phase::tri_objective: return {{Phase::tri_objective, cfg.epochs}};
    case Phase::finetune:
      require(have_checkpoint, "finetune needs a pretrained checkpoint");
      return {{Phase::finetune, cfg.finetune_epochs}};
  }
  return {};
}

/// What a phase switches on.
struct PhaseSettings {
  bool gate_forced_open = true;
  bool train_gate = false;
  double lambda2 = 0.0;
  double budget = 1.0;
};

inline PhaseSettings phase_settings(const TrainConfig& cfg, Phase p) {
  if (p == Phase::pretrain) return {true, false, 0.0, 1.0};
  return {false, true, cfg.lambda2, cfg.budget};
}

/// Fills environment-derived fields of a model config.
inline agents::ModelConfig bind_model(agents::ModelConfig model, const envs::Environment& env) {
  model.observation_dim = env.observation_dim();
  model.action_count = env.action_count();
  model.agents = env.agent_count();
  return model;
}

inline std::string model_fingerprint(const agents::ModelConfig& m) {
  nlohmann::ordered_json j;
  j["observation_dim"] = m.observation_dim;
  j["action_count"] = m.action_count;
  j["agents"] = m.agents;
  j["hidden"] = m.hidden;
  j["message_dim"] = m.message_dim;
  j["prototypes"] = m.message_mode == agents::MessageMode::discrete ? m.prototypes : 0;
  j["message_mode"] = agents::to_string(m.message_mode);
  j["gate_mode"] = agents::to_string(m.gate_mode);
  j["decoder_input"] = agents::to_string(m.decoder_input);
  return j.dump();
}

struct CheckpointInfo {
  std::string model;
  Phase phase = Phase::pretrain;
  double budget = 1.0;
};

inline CheckpointInfo checkpoint_info(const numerics::Checkpoint& ck) {
  CheckpointInfo info;
  try {
    const auto j = nlohmann::ordered_json::parse(ck.metadata);
    info.model = j.at("model").dump();
    info.phase = parse_phase(j.at("phase").get<std::string>());
    info.budget = j.at("budget").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("checkpoint metadata is malformed: ") + e.what());
  }
  return info;
}

inline void check_model(const numerics::Checkpoint& ck, const agents::ModelConfig& model) {
  const auto info = checkpoint_info(ck);
  require(info.model == model_fingerprint(model),
          "checkpoint model " + info.model + " does not match configuration " + model_fingerprint(model));
}

template <Real Scalar>
class Trainer {
 public:
  Trainer(envs::EnvConfig env_cfg, const agents::ModelConfig& model, TrainConfig train, Phase phase,
          std::uint64_t master_seed)
      : env_cfg_(std::move(env_cfg)),
        train_(std::move(train)),
        phase_(phase),
        seed_(master_seed),
        net_(bind_model(model, *envs::make_environment(env_cfg_))) {
    train_.validate();
    net_.init(derive_seed(seed_, 0, kStreamInit));
  }

  agents::Network<Scalar>& network() { return net_; }
  const agents::Network<Scalar>& network() const { return net_; }
  const TrainConfig& config() const { return train_; }
  const envs::EnvConfig& env_config() const { return env_cfg_; }
  Phase phase() const { return phase_; }
  std::uint64_t seed() const { return seed_; }
  std::size_t epoch() const { return epoch_; }
  std::uint64_t episode_cursor() const { return cursor_; }

  void set_phase(Phase p) { phase_ = p; }
  void set_budget(double b) {
    train_.budget = b;
    train_.validate();
  }
  void set_bstar(double bs) {
    train_.bstar = bs;
    train_.validate();
  }
  /// Mask applied at emission during rollouts (and the cluster table for continuous messages).
  void set_mask(const agents::VocabMask* mask, const agents::ClusterTable* clusters) {
    mask_ = mask;
    clusters_ = clusters;
  }

  agents::StepControl rollout_control() const {
    agents::StepControl ctl;
    ctl.sample = true;
    ctl.gate_forced_open = phase_settings(train_, phase_).gate_forced_open;
    ctl.mask = mask_;
    ctl.clusters = clusters_;
    return ctl;
  }

  /// Collects at least samples_per_epoch environment steps, applies one optimizer step and returns metrics.
  /// A non-finite loss or gradient throws NumericError and leaves the parameters untouched.
  EpochMetrics run_epoch() {
    const auto settings = phase_settings(train_, phase_);
    const auto ctl = rollout_control();
    const std::size_t threads = resolve_threads(train_.threads);

    // rollouts: the minimal prefix of globally indexed episodes reaching the sample count
    std::vector<EpisodeRecord> records;
    std::size_t samples = 0;
    std::uint64_t k = cursor_;
    const std::size_t wave = threads <= 1 ? 1 : 2 * threads;
    while (samples < train_.samples_per_epoch) {
      std::vector<EpisodeRecord> batch(wave);
      parallel_for(wave, threads, [&](std::size_t w) {
        auto env = envs::make_environment(env_cfg_);
        const std::uint64_t idx = k + w;
        batch[w] = run_episode(net_, *env, derive_seed(seed_, idx, kStreamEnv), derive_seed(seed_, idx, kStreamPolicy),
                               ctl);
      });
      for (auto& r : batch) {
        if (samples >= train_.samples_per_epoch) break;
        samples += r.steps();
        records.push_back(std::move(r));
        ++k;
      }
    }

    // normalizers
    std::size_t agent_steps = 0, pairs = 0;
    for (const auto& r : records) {
      agent_steps += r.active_agent_steps();
      for (auto o : r.opportunities) pairs += o > 0 ? 1 : 0;
    }
    ObjectiveWeights w;
    w.value_coef = train_.value_coef;
    w.entropy_coef = train_.entropy_coef;
    w.lambda1 = train_.lambda1;
    w.lambda2 = settings.lambda2;
    w.budget = settings.budget;
    w.bstar = train_.bstar;
    w.strict_penalty = train_.strict_penalty;
    w.train_gate = settings.train_gate;
    w.step_scale = agent_steps ? 1.0 / static_cast<double>(agent_steps) : 0.0;
    w.pair_scale = pairs ? 1.0 / static_cast<double>(pairs) : 0.0;

    // gradients in fixed blocks, merged in order
    const std::size_t B = train_.block_episodes;
    const std::size_t blocks = (records.size() + B - 1) / B;
    std::vector<numerics::Gradients<Scalar>> block_grads(blocks);
    std::vector<LossTerms> block_loss(blocks);
    parallel_for(blocks, threads, [&](std::size_t b) {
      block_grads[b] = net_.params().make_gradients();
      for (std::size_t e = b * B; e < std::min(records.size(), (b + 1) * B); ++e) {
        const auto tg = make_targets(records[e], train_.gamma);
        block_loss[b] += episode_objective(net_, records[e], tg, w, ctl, &block_grads[b]);
      }
    });
    LossTerms loss;
    for (const auto& l : block_loss) loss += l;

    EpochMetrics m = summarize(records);
    m.epoch = epoch_;
    m.seed = seed_;
    m.phase = to_string(phase_);
    m.loss_pi = loss.pi;
    m.loss_l1 = loss.l1;
    m.loss_l2 = loss.l2;
    m.samples = samples;

    if (!std::isfinite(loss.total()))
      throw NumericError("non-finite loss at epoch " + std::to_string(epoch_) + " (seed " + std::to_string(seed_) +
                         ", phase " + m.phase + "): pi=" + format_double(loss.pi) + " l1=" + format_double(loss.l1) +
                         " l2=" + format_double(loss.l2) + "; epoch aborted");
    for (const auto& g : block_grads) {
      if (!g.all_finite()) {
        throw NumericError("non-finite gradient at epoch " + std::to_string(epoch_) + " (seed " +
                           std::to_string(seed_) + ", phase " + m.phase + "); epoch aborted");
      }
    }
    net_.params().zero_grad();
    for (const auto& g : block_grads) net_.params().accumulate(g);
    numerics::rmsprop_step(net_.params(), train_.optimizer());

    cursor_ = k;
    ++epoch_;
    return m;
  }

  EpochMetrics summarize(const std::vector<EpisodeRecord>& records) const {
    EpochMetrics m;
    const std::size_t N = net_.config().agents;
    std::vector<std::size_t> emitted(N, 0), opps(N, 0);
    double success = 0.0, reward = 0.0;
    for (const auto& r : records) {
      success += r.success() ? 1.0 : 0.0;
      reward += r.team_reward();
      for (std::size_t i = 0; i < N; ++i) {
        emitted[i] += r.emitted[i];
        opps[i] += r.opportunities[i];
      }
    }
    const double n = static_cast<double>(std::max<std::size_t>(records.size(), 1));
    m.success = success / n;
    m.mean_reward = reward / n;
    m.episodes = records.size();
    std::size_t te = 0, to = 0;
    m.agent_m_avg.assign(N, -1.0);
    for (std::size_t i = 0; i < N; ++i) {
      te += emitted[i];
      to += opps[i];
      if (opps[i]) m.agent_m_avg[i] = static_cast<double>(emitted[i]) / static_cast<double>(opps[i]);
    }
    m.m_avg = to ? static_cast<double>(te) / static_cast<double>(to) : 0.0;
    return m;
  }

  numerics::Checkpoint checkpoint() const {
    numerics::Checkpoint ck;
    nlohmann::ordered_json meta;
    meta["model"] = nlohmann::ordered_json::parse(model_fingerprint(net_.config()));
    meta["phase"] = to_string(phase_);
    meta["budget"] = phase_settings(train_, phase_).budget;
    ck.metadata = meta.dump();
    ck.rng = {seed_, cursor_};
    ck.params = numerics::export_values(net_.params(), false);
    ck.optimizer = numerics::export_values(net_.params(), true);
    return ck;
  }

  /// Writes the checkpoint and returns its content hash.
  std::string save(const std::string& path) const {
    const auto bytes = numerics::encode_checkpoint(checkpoint());
    numerics::write_file_bytes(path, bytes);
    return numerics::content_hash(bytes);
  }

  /// Loads parameters and optimizer state. Training continues from the stored episode cursor.
  void load(const numerics::Checkpoint& ck) {
    check_model(ck, net_.config());
    numerics::import_values(net_.params(), ck.params, false);
    numerics::import_values(net_.params(), ck.optimizer, true);
    cursor_ = ck.rng.episode_cursor;
  }

 private:
  envs::EnvConfig env_cfg_;
  TrainConfig train_;
  Phase phase_;
  std::uint64_t seed_;
  agents::Network<Scalar> net_;
  const agents::VocabMask* mask_ = nullptr;
  const agents::ClusterTable* clusters_ = nullptr;
  std::size_t epoch_ = 0;
  std::uint64_t cursor_ = 0;
};

/// Builds a network from a checkpoint for evaluation or analysis.
template <Real Scalar>
agents::Network<Scalar> load_network(const agents::ModelConfig& bound_model, const numerics::Checkpoint& ck) {
  agents::Network<Scalar> net(bound_model);
  check_model(ck, bound_model);
  numerics::import_values(net.params(), ck.params, false);
  return net;
}

}  // namespace imgsmac::training
