#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "imgsmac/agents/vocab.hpp"
#include "imgsmac/numerics/dense.hpp"
#include "imgsmac/numerics/gru.hpp"
#include "imgsmac/numerics/prototype.hpp"

namespace imgsmac::agents {

enum class MessageMode { continuous, discrete };
enum class GateMode { targeting, broadcast };
enum class DecoderInput { comm_hidden, hidden_plus_message };

inline std::string to_string(MessageMode m) { return m == MessageMode::discrete ? "discrete" : "continuous"; }
inline std::string to_string(GateMode m) { return m == GateMode::broadcast ? "broadcast" : "targeting"; }
inline std::string to_string(DecoderInput d) {
  return d == DecoderInput::hidden_plus_message ? "hidden_plus_message" : "comm_hidden";
}

struct ModelConfig {
  std::size_t observation_dim = 0;
  std::size_t action_count = 0;
  std::size_t agents = 0;
  std::size_t hidden = 64;
  std::size_t message_dim = 16;
  std::size_t prototypes = 16;
  MessageMode message_mode = MessageMode::continuous;
  GateMode gate_mode = GateMode::targeting;
  DecoderInput decoder_input = DecoderInput::comm_hidden;
  double gate_bias_init = 3.0;  // sigmoid(3) ~ 0.95: a fresh gate starts nearly open
  double commitment = 0.25;

  void validate() const {
    require(observation_dim > 0, "model.observation_dim must be positive");
    require(action_count >= 1, "model.action_count must be positive");
    require(agents >= 2, "model.agents must be >= 2");
    require(hidden > 0 && message_dim > 0, "model.hidden and model.message_dim must be positive");
    if (message_mode == MessageMode::discrete) require(prototypes >= 2, "model.prototypes must be >= 2");
  }

  std::size_t decoder_dim() const { return agents * observation_dim; }
  std::size_t gate_outputs() const { return gate_mode == GateMode::broadcast ? 1 : agents; }
};

template <Real Scalar>
struct Message {
  MessageMode mode = MessageMode::continuous;
  std::vector<Scalar> vector;
  int token_id = -1;  // prototype id (discrete) or analysis cluster id (continuous, -1 if none)
};

/// Emission probabilities and bits, indexed by absolute recipient id (broadcast: probs has one entry).
template <Real Scalar>
struct GateDecision {
  std::vector<Scalar> probs;
  std::vector<std::uint8_t> bits;
  bool forced_open = false;
};

template <Real Scalar>
struct AgentState {
  std::vector<Scalar> hidden;       // h
  std::vector<Scalar> comm_hidden;  // h~ after aggregation
  Message<Scalar> last_message;
  GateDecision<Scalar> last_gate;

  void reset(std::size_t hidden_dim) {
    hidden.assign(hidden_dim, Scalar{0});
    comm_hidden.assign(hidden_dim, Scalar{0});
    last_message = {};
    last_gate = {};
  }
};

template <Real Scalar>
struct EncodeCache {
  numerics::DenseCache<Scalar> embed;
  numerics::GruCache<Scalar> gru;
};

template <Real Scalar>
struct MessageCache {
  numerics::DenseCache<Scalar> projection;
  numerics::Quantized<Scalar> quantized;  // discrete mode only
};

template <Real Scalar>
struct ActCache {
  std::vector<Scalar> aggregated;
  numerics::GruCache<Scalar> gru;
  numerics::DenseCache<Scalar> policy, value, decoder;
};

template <Real Scalar>
struct ActOutput {
  std::vector<Scalar> action_probs;
  Scalar value{0};
  std::vector<Scalar> decoded;
};

/// Shared-parameter agent network:
///   x -> tanh embed -> GRU -> h -> message head (+ prototype quantization) and sigmoid gate head
///   [h, mean of delivered messages] -> GRU -> h~ -> softmax policy, value, state decoder
template <Real Scalar>
class Network {
 public:
  explicit Network(ModelConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    using numerics::Activation;
    const std::size_t H = cfg_.hidden, M = cfg_.message_dim;
    embed_ = numerics::Dense<Scalar>(params_, "embed", cfg_.observation_dim, H, Activation::tanh);
    encoder_ = numerics::GruCell<Scalar>(params_, "encoder", H, H);
    message_ = numerics::Dense<Scalar>(params_, "message", H, M, Activation::identity);
    if (cfg_.message_mode == MessageMode::discrete)
      bank_ = numerics::PrototypeBank<Scalar>(params_, "prototypes", cfg_.prototypes, M,
                                              static_cast<Scalar>(cfg_.commitment));
    gate_ = numerics::Dense<Scalar>(params_, "gate", H, cfg_.gate_outputs(), Activation::sigmoid);
    comm_ = numerics::GruCell<Scalar>(params_, "comm", H + M, H);
    policy_ = numerics::Dense<Scalar>(params_, "policy", H, cfg_.action_count, Activation::softmax);
    value_ = numerics::Dense<Scalar>(params_, "value", H, 1, Activation::identity);
    const std::size_t dec_in = cfg_.decoder_input == DecoderInput::comm_hidden ? H : H + M;
    decoder_ = numerics::Dense<Scalar>(params_, "decoder", dec_in, cfg_.decoder_dim(), Activation::identity);
  }

  const ModelConfig& config() const { return cfg_; }
  numerics::ParamSet<Scalar>& params() { return params_; }
  const numerics::ParamSet<Scalar>& params() const { return params_; }

  const numerics::Dense<Scalar>& embed_layer() const { return embed_; }
  const numerics::GruCell<Scalar>& encoder_layer() const { return encoder_; }
  const numerics::Dense<Scalar>& message_layer() const { return message_; }
  const numerics::PrototypeBank<Scalar>& prototype_bank() const { return bank_; }
  const numerics::Dense<Scalar>& gate_layer() const { return gate_; }
  const numerics::GruCell<Scalar>& comm_layer() const { return comm_; }
  const numerics::Dense<Scalar>& policy_layer() const { return policy_; }
  const numerics::Dense<Scalar>& value_layer() const { return value_; }
  const numerics::Dense<Scalar>& decoder_layer() const { return decoder_; }

  void init(std::uint64_t seed) {
    Rng rng(seed);
    embed_.init(params_, rng);
    encoder_.init(params_, rng);
    message_.init(params_, rng);
    if (cfg_.message_mode == MessageMode::discrete) bank_.init(params_, rng);
    gate_.init(params_, rng);
    comm_.init(params_, rng);
    policy_.init(params_, rng);
    value_.init(params_, rng);
    decoder_.init(params_, rng);
    params_.value(gate_.bias_id()).fill(static_cast<Scalar>(cfg_.gate_bias_init));
  }

  void zero_params() {
    for (auto& p : params_) p.value.fill(Scalar{0});
  }

  AgentState<Scalar> initial_state() const {
    AgentState<Scalar> s;
    s.reset(cfg_.hidden);
    return s;
  }

  /// h <- GRU(embed(obs), h).
  void encode(std::span<const Scalar> obs, AgentState<Scalar>& state, EncodeCache<Scalar>* cache = nullptr) const {
    require(obs.size() == cfg_.observation_dim, "observation dim " + std::to_string(obs.size()) + " != " +
                                                    std::to_string(cfg_.observation_dim));
    auto embed = embed_.forward(params_, obs);
    auto gru = encoder_.forward(params_, embed.output, state.hidden);
    state.hidden = gru.hidden;
    if (cache) {
      cache->embed = std::move(embed);
      cache->gru = std::move(gru);
    }
  }

  /// Linear projection of h to the message space, quantized to the nearest prototype in discrete mode.
  Message<Scalar> make_message(const AgentState<Scalar>& state, MessageCache<Scalar>* cache = nullptr) const {
    auto proj = message_.forward(params_, state.hidden);
    Message<Scalar> m;
    m.mode = cfg_.message_mode;
    if (cfg_.message_mode == MessageMode::discrete) {
      auto q = bank_.quantize(params_, proj.output);
      m.vector = q.message;
      m.token_id = q.token_id;
      if (cache) cache->quantized = std::move(q);
    } else {
      m.vector = proj.output;
    }
    if (cache) cache->projection = std::move(proj);
    return m;
  }

  /// Emission probabilities from the sigmoid gate head. Bits are decided by the caller.
  GateDecision<Scalar> gate_probs(const AgentState<Scalar>& state, numerics::DenseCache<Scalar>* cache = nullptr) const {
    auto head = gate_.forward(params_, state.hidden);
    GateDecision<Scalar> g;
    g.probs = head.output;
    if (cache) *cache = std::move(head);
    return g;
  }

  /// Second recurrent stage over [h, aggregated] followed by the policy, value and decoder heads.
  ActOutput<Scalar> act_and_decode(AgentState<Scalar>& state, std::span<const Scalar> aggregated,
                                   ActCache<Scalar>* cache = nullptr) const {
    require(aggregated.size() == cfg_.message_dim, "aggregated message dim mismatch");
    std::vector<Scalar> input(state.hidden);
    input.insert(input.end(), aggregated.begin(), aggregated.end());
    auto gru = comm_.forward(params_, input, state.comm_hidden);
    state.comm_hidden = gru.hidden;
    auto pol = policy_.forward(params_, state.comm_hidden);
    auto val = value_.forward(params_, state.comm_hidden);
    auto dec = cfg_.decoder_input == DecoderInput::comm_hidden ? decoder_.forward(params_, state.comm_hidden)
                                                               : decoder_.forward(params_, input);
    ActOutput<Scalar> out{pol.output, val.output[0], dec.output};
    if (cache) {
      cache->aggregated.assign(aggregated.begin(), aggregated.end());
      cache->gru = std::move(gru);
      cache->policy = std::move(pol);
      cache->value = std::move(val);
      cache->decoder = std::move(dec);
    }
    return out;
  }

 private:
  ModelConfig cfg_;
  numerics::ParamSet<Scalar> params_;
  numerics::Dense<Scalar> embed_;
  numerics::GruCell<Scalar> encoder_;
  numerics::Dense<Scalar> message_;
  numerics::PrototypeBank<Scalar> bank_;
  numerics::Dense<Scalar> gate_;
  numerics::GruCell<Scalar> comm_;
  numerics::Dense<Scalar> policy_;
  numerics::Dense<Scalar> value_;
  numerics::Dense<Scalar> decoder_;
};

/// Mean of incoming message vectors; the zero vector when nothing arrives.
template <Real Scalar>
std::vector<Scalar> aggregate(std::span<const Message<Scalar>* const> incoming, std::size_t dim) {
  std::vector<Scalar> mean(dim, Scalar{0});
  if (incoming.empty()) return mean;
  for (const auto* m : incoming) {
    require(m->vector.size() == dim, "incoming message dim mismatch");
    for (std::size_t k = 0; k < dim; ++k) mean[k] += m->vector[k];
  }
  const Scalar inv = Scalar{1} / static_cast<Scalar>(incoming.size());
  for (auto& v : mean) v *= inv;
  return mean;
}

template <Real Scalar>
std::vector<Scalar> aggregate(const std::vector<Message<Scalar>>& incoming, std::size_t dim) {
  std::vector<const Message<Scalar>*> ptrs;
  for (const auto& m : incoming) ptrs.push_back(&m);
  return aggregate<Scalar>(std::span<const Message<Scalar>* const>(ptrs), dim);
}

/// Returns the message unless (token, recipient) is masked. Content is never altered.
/// Continuous messages need a cluster id assigned from a ClusterTable before a non-empty mask applies.
template <Real Scalar>
std::optional<Message<Scalar>> apply_vocab_mask(const Message<Scalar>& msg, int recipient, const VocabMask& mask,
                                                 const ClusterTable* clusters = nullptr) {
  if (mask.empty()) return msg;
  int token = msg.token_id;
  if (msg.mode == MessageMode::continuous) {
    require(clusters != nullptr, "continuous messages need an attached cluster table to apply a vocabulary mask");
    token = clusters->assign(msg.vector);
  }
  if (mask.suppresses(token, recipient)) return std::nullopt;
  return msg;
}

}  // namespace imgsmac::agents
