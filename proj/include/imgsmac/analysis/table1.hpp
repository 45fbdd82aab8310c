#pragma once

#include "imgsmac/analysis/token_stats.hpp"

namespace imgsmac::analysis {

struct Table1Report {
  double null_fraction = 0.0;               // (a) masked share of measured tokens, or of (token, recipient) pairs
  double observations_per_token = 0.0;      // (b) mean distinct sender observations per emitted token
  double null_emission_fraction = 0.0;      // (c) share of emissions carried by masked pairs
  std::size_t measured = 0;
  std::size_t null_count = 0;
};

/// Per-recipient masks count (token, recipient) pairs; global masks count tokens.
inline Table1Report table1_metrics(const TokenStatsReport& stats, const agents::VocabMask& mask) {
  Table1Report rep;
  if (stats.tokens.empty()) return rep;
  std::size_t suppressed = 0;
  double obs = 0.0;
  for (const auto& ts : stats.tokens) {
    obs += static_cast<double>(ts.observations.size());
    if (mask.mode() == agents::MaskMode::global) {
      ++rep.measured;
      if (mask.suppresses(ts.token_id, agents::kAllRecipients)) ++rep.null_count;
    }
    for (std::size_t j = 0; j < ts.recipient_counts.size(); ++j) {
      if (ts.recipient_counts[j] == 0) continue;
      const bool null = mask.suppresses(ts.token_id, static_cast<int>(j));
      if (null) suppressed += ts.recipient_counts[j];
      if (mask.mode() == agents::MaskMode::per_recipient) {
        ++rep.measured;
        rep.null_count += null ? 1 : 0;
      }
    }
  }
  rep.observations_per_token = obs / static_cast<double>(stats.tokens.size());
  rep.null_fraction = rep.measured ? static_cast<double>(rep.null_count) / static_cast<double>(rep.measured) : 0.0;
  rep.null_emission_fraction =
      stats.total_emissions ? static_cast<double>(suppressed) / static_cast<double>(stats.total_emissions) : 0.0;
  return rep;
}

}  // namespace imgsmac::analysis
