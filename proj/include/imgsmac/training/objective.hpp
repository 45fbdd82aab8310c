#pragma once

#include <cmath>
#include <vector>

#include "imgsmac/training/losses.hpp"
#include "imgsmac/training/returns.hpp"
#include "imgsmac/training/rollout.hpp"

namespace imgsmac::training {

struct ObjectiveWeights {
  double value_coef = 0.5;
  double entropy_coef = 0.01;
  double lambda1 = 0.1;
  double lambda2 = 0.0;
  double budget = 1.0;
  double bstar = 1.0;
  bool strict_penalty = false;
  bool train_gate = false;  // score-function and budget gradients reach the gate head
  double step_scale = 1.0;  // 1 / active agent-steps in the batch
  double pair_scale = 1.0;  // 1 / (episode, agent) pairs with at least one messaging opportunity
};

struct LossTerms {
  double pi = 0.0;  // policy, value, entropy, gate score-function and quantization terms
  double l1 = 0.0;  // autoencoder
  double l2 = 0.0;  // budget penalty

  double total() const { return pi + l1 + l2; }
  LossTerms& operator+=(const LossTerms& o) {
    pi += o.pi;
    l1 += o.l1;
    l2 += o.l2;
    return *this;
  }
};

/// Returns and advantages held fixed during the update.
struct EpisodeTargets {
  std::vector<std::vector<double>> returns;     // [t][i]
  std::vector<std::vector<double>> advantages;  // [t][i]
};

inline EpisodeTargets make_targets(const EpisodeRecord& rec, double gamma) {
  const std::size_t T = rec.steps();
  std::vector<std::vector<double>> rewards(T), values(T);
  std::vector<std::vector<bool>> active(T);
  for (std::size_t t = 0; t < T; ++t) {
    rewards[t] = rec.log.steps[t].rewards;
    active[t] = rec.log.steps[t].active;
  }
  EpisodeTargets tg;
  tg.returns = segment_returns(rewards, active, rec.fresh, gamma);
  tg.advantages = tg.returns;
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t i = 0; i < tg.advantages[t].size(); ++i)
      if (active[t][i]) tg.advantages[t][i] -= rec.values[t][i];
  return tg;
}

/// Replays a recorded episode under the current parameters with the recorded actions and gate decisions,
/// evaluates the combined loss and, when grads is given, backpropagates it through time.
/// `ctl` supplies the gate mode, mask and cluster table used during the rollout.
template <Real Scalar>
LossTerms episode_objective(const agents::Network<Scalar>& net, const EpisodeRecord& rec, const EpisodeTargets& tg,
                            const ObjectiveWeights& w, agents::StepControl ctl,
                            numerics::Gradients<Scalar>* grads = nullptr) {
  using agents::GateMode;
  using agents::MessageMode;
  const auto& cfg = net.config();
  const auto& params = net.params();
  const std::size_t N = cfg.agents, H = cfg.hidden, M = cfg.message_dim, T = rec.steps();
  const bool keep = grads != nullptr;
  const bool gate_live = !ctl.gate_forced_open;
  ctl.sample = false;
  ctl.rng = nullptr;

  // forward replay
  std::vector<agents::AgentState<Scalar>> states(N, net.initial_state());
  std::vector<agents::TeamStepOutput<Scalar>> outs;
  std::vector<std::vector<Scalar>> full_state(T);
  outs.reserve(T);
  for (std::size_t t = 0; t < T; ++t) {
    const auto& step = rec.log.steps[t];
    for (std::size_t i = 0; i < N; ++i)
      if (rec.fresh[t][i]) states[i].reset(H);
    ctl.forced_actions = &step.actions;
    ctl.forced_gate_bits = &rec.gate_bits[t];
    outs.push_back(agents::team_step(net, states, step.observations, step.active, ctl, true));
    for (const auto& o : step.observations)
      for (double v : o) full_state[t].push_back(static_cast<Scalar>(v));
  }

  // Budget penalty per agent over the episode, on the expected messaging fraction: the mean emission
  // probability over the agent's opportunities, before any mask. The mask removes roughly (1 - b*) of the
  // opportunities on top, which is what the b + (1 - b*) target accounts for.
  LossTerms loss;
  std::vector<double> penalty_slope(N, 0.0);
  if (gate_live && w.train_gate && w.lambda2 > 0.0) {
    std::vector<double> expected(N, 0.0);
    std::vector<std::size_t> opps(N, 0);
    for (std::size_t t = 0; t < T; ++t) {
      const auto& out = outs[t];
      for (std::size_t i = 0; i < N; ++i) {
        if (!rec.log.steps[t].active[i] || out.opportunities[i] == 0) continue;
        opps[i] += out.opportunities[i];
        if (cfg.gate_mode == GateMode::broadcast) {
          expected[i] += static_cast<double>(out.gates[i].probs[0]);
        } else {
          for (std::size_t j = 0; j < N; ++j)
            if (j != i && rec.log.steps[t].active[j]) expected[i] += static_cast<double>(out.gates[i].probs[j]);
        }
      }
    }
    for (std::size_t i = 0; i < N; ++i) {
      if (opps[i] == 0) continue;
      const double m = expected[i] / static_cast<double>(opps[i]);
      loss.l2 += w.pair_scale * budget_penalty(m, w.budget, w.bstar, w.lambda2, w.strict_penalty);
      penalty_slope[i] = w.pair_scale * budget_penalty_slope(m, w.budget, w.bstar, w.lambda2, w.strict_penalty) /
                         static_cast<double>(opps[i]);
    }
  }

  // loss values
  for (std::size_t t = 0; t < T; ++t) {
    const auto& step = rec.log.steps[t];
    const auto& out = outs[t];
    for (std::size_t i = 0; i < N; ++i) {
      if (!step.active[i]) continue;
      const auto& o = out.outputs[i];
      const double A = tg.advantages[t][i];
      const double G = tg.returns[t][i];
      const double V = static_cast<double>(o.value);
      const double logp = std::log(static_cast<double>(o.action_probs[step.actions[i]]));
      const double H_ent = entropy<Scalar>(o.action_probs);
      loss.pi += w.step_scale * (-logp * A + w.value_coef * (G - V) * (G - V) - w.entropy_coef * H_ent);
      if (cfg.message_mode == MessageMode::discrete) {
        const auto& mc = out.tapes[i].message_cache;
        loss.pi += w.step_scale * static_cast<double>(net.prototype_bank().auxiliary_loss(mc.projection.output,
                                                                                          mc.quantized.message));
      }
      if (gate_live && w.train_gate) {
        const auto& g = out.gates[i];
        auto add = [&](double p, bool bit) { loss.pi -= w.step_scale * A * std::log(bit ? p : 1.0 - p); };
        if (cfg.gate_mode == GateMode::broadcast) {
          if (out.opportunities[i] > 0) {
            bool bit = false;
            for (auto b : g.bits) bit |= b != 0;
            add(static_cast<double>(g.probs[0]), bit);
          }
        } else {
          for (std::size_t j = 0; j < N; ++j)
            if (j != i && step.active[j]) add(static_cast<double>(g.probs[j]), g.bits[j] != 0);
        }
      }
      if (w.lambda1 > 0.0)
        loss.l1 += w.step_scale * w.lambda1 * static_cast<double>(numerics::l2_loss<Scalar>(o.decoded, full_state[t]));
    }
  }
  if (!keep) return loss;

  // backward through time
  const auto S = [](double v) { return static_cast<Scalar>(v); };
  std::vector<std::vector<Scalar>> dh_next(N, std::vector<Scalar>(H, Scalar{0}));
  std::vector<std::vector<Scalar>> dhc_next(N, std::vector<Scalar>(H, Scalar{0}));
  auto& gr = *grads;
  for (std::size_t t = T; t-- > 0;) {
    const auto& step = rec.log.steps[t];
    const auto& out = outs[t];
    std::vector<std::vector<Scalar>> dh(N, std::vector<Scalar>(H, Scalar{0}));
    std::vector<std::vector<Scalar>> dm(N, std::vector<Scalar>(M, Scalar{0}));

    // heads and communication GRU of every recipient
    for (std::size_t j = 0; j < N; ++j) {
      if (!step.active[j]) {
        std::fill(dh_next[j].begin(), dh_next[j].end(), Scalar{0});
        std::fill(dhc_next[j].begin(), dhc_next[j].end(), Scalar{0});
        continue;
      }
      const auto& tape = out.tapes[j];
      const auto& o = out.outputs[j];
      const double A = tg.advantages[t][j];
      const double G = tg.returns[t][j];
      std::vector<Scalar> dhc(dhc_next[j]);
      std::vector<Scalar> dinput(H + M, Scalar{0});

      const std::size_t K = o.action_probs.size();
      const double H_ent = entropy<Scalar>(o.action_probs);
      std::vector<Scalar> dz(K);
      for (std::size_t k = 0; k < K; ++k) {
        const double p = static_cast<double>(o.action_probs[k]);
        const double onehot = static_cast<int>(k) == step.actions[j] ? 1.0 : 0.0;
        double g = -A * (onehot - p);
        if (p > 0.0) g += w.entropy_coef * p * (std::log(p) + H_ent);
        dz[k] = S(w.step_scale * g);
      }
      net.policy_layer().backward_from_preactivation(params, tape.act.policy.input, dz, gr, dhc);

      const Scalar dv = S(w.step_scale * -2.0 * w.value_coef * (G - static_cast<double>(o.value)));
      net.value_layer().backward(params, tape.act.value, std::span<const Scalar>(&dv, 1), gr, dhc);

      if (w.lambda1 > 0.0) {
        std::vector<Scalar> ddec(o.decoded.size(), Scalar{0});
        numerics::l2_loss_grad<Scalar>(o.decoded, full_state[t], S(w.step_scale * w.lambda1), ddec);
        if (cfg.decoder_input == agents::DecoderInput::comm_hidden)
          net.decoder_layer().backward(params, tape.act.decoder, ddec, gr, dhc);
        else
          net.decoder_layer().backward(params, tape.act.decoder, ddec, gr, dinput);
      }

      std::vector<Scalar> dhc_prev(H, Scalar{0});
      net.comm_layer().backward(params, tape.act.gru, dhc, gr, dinput, dhc_prev);
      dhc_next[j] = rec.fresh[t][j] ? std::vector<Scalar>(H, Scalar{0}) : std::move(dhc_prev);

      for (std::size_t k = 0; k < H; ++k) dh[j][k] += dinput[k];
      if (!tape.senders.empty()) {
        const Scalar inv = Scalar{1} / static_cast<Scalar>(tape.senders.size());
        for (int s : tape.senders)
          for (std::size_t k = 0; k < M; ++k) dm[s][k] += dinput[H + k] * inv;
      }
    }

    // message, gate and encoder of every sender
    for (std::size_t i = 0; i < N; ++i) {
      if (!step.active[i]) continue;
      const auto& tape = out.tapes[i];
      for (std::size_t k = 0; k < H; ++k) dh[i][k] += dh_next[i][k];

      if (cfg.message_mode == MessageMode::discrete) {
        std::vector<Scalar> dproj(M, Scalar{0});
        net.prototype_bank().backward(tape.message_cache.projection.output, tape.message_cache.quantized, dm[i],
                                      S(w.step_scale), gr, dproj);
        net.message_layer().backward(params, tape.message_cache.projection, dproj, gr, dh[i]);
      } else {
        net.message_layer().backward(params, tape.message_cache.projection, dm[i], gr, dh[i]);
      }

      if (gate_live && w.train_gate) {
        const auto& g = out.gates[i];
        const double A = tg.advantages[t][i];
        std::vector<Scalar> dz(g.probs.size(), Scalar{0});
        auto logit_grad = [&](double p, bool bit) {
          return w.step_scale * -A * ((bit ? 1.0 : 0.0) - p) + penalty_slope[i] * p * (1.0 - p);
        };
        bool any = false;
        if (cfg.gate_mode == GateMode::broadcast) {
          if (out.opportunities[i] > 0) {
            bool bit = false;
            for (auto b : g.bits) bit |= b != 0;
            dz[0] = S(logit_grad(static_cast<double>(g.probs[0]), bit));
            any = true;
          }
        } else {
          for (std::size_t j = 0; j < N; ++j) {
            if (j == i || !step.active[j]) continue;
            dz[j] = S(logit_grad(static_cast<double>(g.probs[j]), g.bits[j] != 0));
            any = true;
          }
        }
        if (any) net.gate_layer().backward_from_preactivation(params, tape.gate_cache.input, dz, gr, dh[i]);
      }

      std::vector<Scalar> dembed(H, Scalar{0});
      std::vector<Scalar> dh_prev(H, Scalar{0});
      net.encoder_layer().backward(params, tape.encode.gru, dh[i], gr, dembed, dh_prev);
      net.embed_layer().backward(params, tape.encode.embed, dembed, gr, std::span<Scalar>{});
      dh_next[i] = rec.fresh[t][i] ? std::vector<Scalar>(H, Scalar{0}) : std::move(dh_prev);
    }
  }
  return loss;
}

}  // namespace imgsmac::training
