#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "imgsmac/agents/network.hpp"
#include "imgsmac/envs/environment.hpp"

namespace imgsmac::agents {

/// How one synchronized timestep is executed.
struct StepControl {
  bool sample = false;            // sample actions/gate bits (training) instead of argmax/threshold
  bool gate_forced_open = true;   // fixed open gate: every edge between active agents fires
  const VocabMask* mask = nullptr;      // null-token mask applied at emission
  const VocabMask* suppress = nullptr;  // counterfactual suppression, same semantics as the mask
  const ClusterTable* clusters = nullptr;
  Rng* rng = nullptr;
  // Replay: reuse recorded decisions instead of sampling.
  const std::vector<int>* forced_actions = nullptr;
  const std::vector<std::vector<std::uint8_t>>* forced_gate_bits = nullptr;
};

template <Real Scalar>
struct AgentTape {
  bool active = false;
  EncodeCache<Scalar> encode;
  MessageCache<Scalar> message_cache;
  numerics::DenseCache<Scalar> gate_cache;
  std::vector<int> senders;  // delivered senders, ascending id
  ActCache<Scalar> act;
};

template <Real Scalar>
struct TeamStepOutput {
  std::vector<int> actions;
  std::vector<Message<Scalar>> messages;
  std::vector<GateDecision<Scalar>> gates;           // bits are gate decisions before masking
  std::vector<std::vector<std::uint8_t>> delivered;  // delivered[i][j]: i -> j arrived
  std::vector<ActOutput<Scalar>> outputs;
  std::vector<std::size_t> emitted;        // delivered edges (targeting) or broadcasts, per sender
  std::vector<std::size_t> gated;          // like emitted, but counting gate decisions before the mask
  std::vector<std::size_t> opportunities;  // possible edges (targeting) or possible broadcasts
  std::vector<AgentTape<Scalar>> tapes;    // filled only when requested
};

namespace detail {

inline int sample_categorical(std::span<const double> probs, Rng& rng) {
  const double u = uniform01(rng);
  double acc = 0.0;
  for (std::size_t k = 0; k < probs.size(); ++k) {
    acc += probs[k];
    if (u < acc) return static_cast<int>(k);
  }
  return static_cast<int>(probs.size()) - 1;
}

}  // namespace detail

/// Runs every agent for one timestep: encode, emit, gate, exchange (barrier), aggregate, act.
/// States of inactive agents are left untouched; the caller resets states on new lifetimes.
template <Real Scalar>
TeamStepOutput<Scalar> team_step(const Network<Scalar>& net, std::vector<AgentState<Scalar>>& states,
                                 const std::vector<envs::Observation>& observations, const std::vector<bool>& active,
                                 const StepControl& ctl, bool keep_tape = false) {
  const auto& cfg = net.config();
  const std::size_t N = cfg.agents;
  require(observations.size() == N && active.size() == N && states.size() == N, "team_step: agent count mismatch");
  require(!ctl.sample || ctl.rng != nullptr || (ctl.forced_actions && (ctl.gate_forced_open || ctl.forced_gate_bits)),
          "team_step: sampling needs an rng");
  const bool masking = (ctl.mask && !ctl.mask->empty()) || (ctl.suppress && !ctl.suppress->empty());
  if (masking && cfg.message_mode == MessageMode::continuous)
    require(ctl.clusters != nullptr, "continuous messages need an attached cluster table to apply a vocabulary mask");

  TeamStepOutput<Scalar> out;
  out.actions.assign(N, envs::kNoAction);
  out.messages.resize(N);
  out.gates.resize(N);
  out.delivered.assign(N, std::vector<std::uint8_t>(N, 0));
  out.outputs.resize(N);
  out.emitted.assign(N, 0);
  out.gated.assign(N, 0);
  out.opportunities.assign(N, 0);
  if (keep_tape) out.tapes.resize(N);

  // 1. encode, message, gate probabilities
  for (std::size_t i = 0; i < N; ++i) {
    if (!active[i]) continue;
    std::vector<Scalar> obs(observations[i].begin(), observations[i].end());
    AgentTape<Scalar>* tape = keep_tape ? &out.tapes[i] : nullptr;
    if (tape) tape->active = true;
    net.encode(obs, states[i], tape ? &tape->encode : nullptr);
    out.messages[i] = net.make_message(states[i], tape ? &tape->message_cache : nullptr);
    if (cfg.message_mode == MessageMode::continuous && ctl.clusters)
      out.messages[i].token_id = ctl.clusters->assign(out.messages[i].vector);
    if (ctl.gate_forced_open) {
      out.gates[i].forced_open = true;
      out.gates[i].probs.assign(cfg.gate_outputs(), Scalar{1});
    } else {
      out.gates[i] = net.gate_probs(states[i], tape ? &tape->gate_cache : nullptr);
    }
  }

  // 2. gate decisions and delivery
  for (std::size_t i = 0; i < N; ++i) {
    if (!active[i]) continue;
    auto& g = out.gates[i];
    g.bits.assign(N, 0);
    bool any_recipient = false;
    for (std::size_t j = 0; j < N; ++j) any_recipient |= (j != i && active[j]);
    std::uint8_t broadcast_bit = 0;
    if (cfg.gate_mode == GateMode::broadcast && any_recipient) {
      if (g.forced_open)
        broadcast_bit = 1;
      else if (ctl.forced_gate_bits)
        broadcast_bit = std::any_of((*ctl.forced_gate_bits)[i].begin(), (*ctl.forced_gate_bits)[i].end(),
                                    [](std::uint8_t b) { return b != 0; });
      else
        broadcast_bit = ctl.sample ? (uniform01(*ctl.rng) < static_cast<double>(g.probs[0])) : (g.probs[0] > Scalar(0.5));
    }
    bool broadcast_delivered = false;
    for (std::size_t j = 0; j < N; ++j) {
      if (j == i || !active[j]) continue;
      std::uint8_t bit;
      if (cfg.gate_mode == GateMode::broadcast)
        bit = broadcast_bit;
      else if (g.forced_open)
        bit = 1;
      else if (ctl.forced_gate_bits)
        bit = (*ctl.forced_gate_bits)[i][j];
      else
        bit = ctl.sample ? (uniform01(*ctl.rng) < static_cast<double>(g.probs[j])) : (g.probs[j] > Scalar(0.5));
      g.bits[j] = bit;
      if (cfg.gate_mode == GateMode::targeting) {
        ++out.opportunities[i];
        out.gated[i] += bit ? 1 : 0;
      }
      if (!bit) continue;
      const int tok = out.messages[i].token_id;
      const int rec = static_cast<int>(j);
      if ((ctl.mask && ctl.mask->suppresses(tok, rec)) || (ctl.suppress && ctl.suppress->suppresses(tok, rec)))
        continue;
      out.delivered[i][j] = 1;
      if (cfg.gate_mode == GateMode::targeting)
        ++out.emitted[i];
      else
        broadcast_delivered = true;
    }
    if (cfg.gate_mode == GateMode::broadcast && any_recipient) {
      ++out.opportunities[i];
      out.gated[i] += broadcast_bit;
      if (broadcast_delivered) ++out.emitted[i];
    }
  }

  // 3. aggregate and act
  for (std::size_t j = 0; j < N; ++j) {
    if (!active[j]) continue;
    std::vector<const Message<Scalar>*> incoming;
    std::vector<int> senders;
    for (std::size_t i = 0; i < N; ++i) {
      if (out.delivered[i][j]) {
        incoming.push_back(&out.messages[i]);
        senders.push_back(static_cast<int>(i));
      }
    }
    const auto agg = aggregate<Scalar>(std::span<const Message<Scalar>* const>(incoming), cfg.message_dim);
    AgentTape<Scalar>* tape = keep_tape ? &out.tapes[j] : nullptr;
    out.outputs[j] = net.act_and_decode(states[j], agg, tape ? &tape->act : nullptr);
    if (tape) tape->senders = std::move(senders);
    const auto& probs = out.outputs[j].action_probs;
    if (ctl.forced_actions) {
      out.actions[j] = (*ctl.forced_actions)[j];
    } else if (ctl.sample) {
      std::vector<double> p(probs.begin(), probs.end());
      out.actions[j] = detail::sample_categorical(p, *ctl.rng);
    } else {
      out.actions[j] = static_cast<int>(std::max_element(probs.begin(), probs.end()) - probs.begin());
    }
    states[j].last_message = out.messages[j];
    states[j].last_gate = out.gates[j];
  }
  return out;
}

}  // namespace imgsmac::agents
