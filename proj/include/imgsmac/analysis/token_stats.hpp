#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "imgsmac/analysis/evaluate.hpp"
#include "imgsmac/analysis/kmeans.hpp"

namespace imgsmac::analysis {

struct TokenStats {
  int token_id = -1;
  std::size_t emissions = 0;                   // delivered (token, recipient) edges
  std::vector<std::size_t> recipient_counts;   // per recipient slot
  std::set<std::vector<double>> observations;  // distinct sender observations at emission time
};

struct TokenStatsReport {
  std::vector<TokenStats> tokens;  // ascending token id, emitted tokens only
  std::size_t total_emissions = 0;
  std::size_t episodes = 0;
  std::vector<std::string> warnings;

  const TokenStats* find(int token) const {
    for (const auto& t : tokens)
      if (t.token_id == token) return &t;
    return nullptr;
  }
};

/// Tallies delivered edges of recorded episodes per token.
inline TokenStatsReport tally_tokens(const std::vector<training::EpisodeRecord>& recs) {
  std::map<int, TokenStats> by_token;
  TokenStatsReport rep;
  rep.episodes = recs.size();
  for (const auto& r : recs) {
    const std::size_t N = r.log.agents;
    for (const auto& s : r.log.steps) {
      for (std::size_t i = 0; i < N; ++i) {
        const int tok = s.tokens[i];
        if (tok < 0) continue;
        auto& ts = by_token[tok];
        ts.token_id = tok;
        if (ts.recipient_counts.empty()) ts.recipient_counts.assign(N, 0);
        for (std::size_t j = 0; j < N; ++j) {
          if (!s.gates[i][j]) continue;
          ++ts.emissions;
          ++ts.recipient_counts[j];
          ++rep.total_emissions;
        }
        ts.observations.insert(s.observations[i]);
      }
    }
  }
  for (auto& [tok, ts] : by_token) rep.tokens.push_back(std::move(ts));
  if (rep.total_emissions == 0) rep.warnings.push_back("no messages were emitted; token statistics are empty");
  return rep;
}

/// Clusters emitted continuous messages of greedy open-gate episodes into a vocabulary.
template <Real Scalar>
agents::ClusterTable fit_clusters(const agents::Network<Scalar>& net, const envs::EnvConfig& env_cfg,
                                  EvalOptions opts, std::size_t clusters, std::size_t restarts) {
  opts.clusters = nullptr;
  opts.mask = nullptr;
  opts.suppress = nullptr;
  const auto recs = eval_records(net, env_cfg, opts);
  std::vector<std::vector<double>> pts;
  for (const auto& r : recs)
    for (const auto& s : r.log.steps)
      for (const auto& m : s.messages)
        if (!m.empty()) pts.push_back(m);
  if (pts.empty()) return agents::ClusterTable(std::vector<std::vector<double>>{std::vector<double>(net.config().message_dim, 0.0)});
  return agents::ClusterTable(kmeans(pts, clusters, restarts, opts.seed).centroids);
}

/// Runs greedy open-gate evaluation episodes and tallies emissions per token.
/// Continuous messages are mapped through `clusters` (required in continuous mode).
template <Real Scalar>
TokenStatsReport collect_token_stats(const agents::Network<Scalar>& net, const envs::EnvConfig& env_cfg,
                                     EvalOptions opts) {
  if (net.config().message_mode == agents::MessageMode::continuous)
    require(opts.clusters != nullptr, "continuous messages need a cluster table for token statistics");
  opts.gate_forced_open = true;
  opts.mask = nullptr;
  opts.suppress = nullptr;
  return tally_tokens(eval_records(net, env_cfg, opts));
}

}  // namespace imgsmac::analysis
