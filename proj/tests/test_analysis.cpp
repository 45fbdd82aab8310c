#include <gtest/gtest.h>

#include <sstream>

#include "imgsmac/analysis.hpp"
#include "imgsmac/training/trainer.hpp"

using namespace imgsmac;
using namespace imgsmac::analysis;

namespace {

envs::EnvConfig tiny_tj() {
  auto ec = envs::preset(envs::EnvKind::traffic_junction, envs::Difficulty::easy);
  ec.agents = 3;
  ec.max_steps = 8;
  ec.arrival_prob = 0.6;
  return ec;
}

agents::Network<double> untrained(const envs::EnvConfig& ec, std::uint64_t seed,
                                  agents::MessageMode mode = agents::MessageMode::discrete) {
  agents::ModelConfig mc;
  mc.hidden = 8;
  mc.message_dim = 4;
  mc.prototypes = 6;
  mc.message_mode = mode;
  agents::Network<double> net(training::bind_model(mc, *envs::make_environment(ec)));
  net.init(seed);
  return net;
}

TokenStatsReport random_stats(Rng& rng, std::size_t tokens, std::size_t agents) {
  TokenStatsReport rep;
  for (std::size_t k = 0; k < tokens; ++k) {
    TokenStats ts;
    ts.token_id = static_cast<int>(k);
    ts.recipient_counts.assign(agents, 0);
    for (auto& c : ts.recipient_counts) {
      c = uniform_index(rng, 3) == 0 ? 0 : uniform_index(rng, 50);
      ts.emissions += c;
    }
    if (ts.emissions == 0) continue;
    rep.total_emissions += ts.emissions;
    const std::size_t nobs = 1 + uniform_index(rng, 4);
    for (std::size_t o = 0; o < nobs; ++o) ts.observations.insert({static_cast<double>(o)});
    rep.tokens.push_back(std::move(ts));
  }
  return rep;
}

std::vector<PairEffect> random_effects(Rng& rng, const TokenStatsReport& stats) {
  std::vector<PairEffect> effects;
  for (const auto& ts : stats.tokens) {
    for (std::size_t j = 0; j < ts.recipient_counts.size(); ++j) {
      if (ts.recipient_counts[j] == 0) continue;
      PairEffect pe;
      pe.token = ts.token_id;
      pe.recipient = static_cast<int>(j);
      pe.defined = uniform_index(rng, 10) != 0;
      pe.delta = (uniform01(rng) - 0.5) * 0.01;
      pe.emissions = ts.recipient_counts[j];
      effects.push_back(pe);
    }
  }
  return effects;
}

}  // namespace

TEST(KMeans, SeparatesObviousClusters) {
  std::vector<std::vector<double>> pts;
  Rng rng(1);
  for (int k = 0; k < 30; ++k) pts.push_back({0.01 * uniform01(rng), 0.01 * uniform01(rng)});
  for (int k = 0; k < 30; ++k) pts.push_back({5.0 + 0.01 * uniform01(rng), 5.0});
  const auto r = kmeans(pts, 2, 3, 7);
  ASSERT_EQ(r.centroids.size(), 2u);
  for (int k = 1; k < 30; ++k) EXPECT_EQ(r.assignment[k], r.assignment[0]);
  EXPECT_NE(r.assignment[0], r.assignment[30]);
  EXPECT_LT(r.inertia, 0.01);
}

TEST(KMeans, DeterministicAndCappedAtPointCount) {
  std::vector<std::vector<double>> pts = {{0.0}, {1.0}, {2.0}};
  const auto a = kmeans(pts, 10, 4, 3);
  EXPECT_EQ(a.centroids.size(), 3u);
  EXPECT_NEAR(a.inertia, 0.0, 1e-12);
  const auto b = kmeans(pts, 10, 4, 3);
  EXPECT_EQ(a.centroids, b.centroids);
}

TEST(TokenStats, ConstantTokenCountsDistinctObservations) {
  training::EpisodeRecord r;
  r.log.agents = 2;
  for (int t = 0; t < 4; ++t) {
    envs::StepRecord s;
    s.observations = {{static_cast<double>(t % 3)}, {9.0}};
    s.tokens = {5, -1};
    s.gates = {{0, 1}, {0, 0}};
    r.log.steps.push_back(s);
  }
  const auto rep = tally_tokens({r});
  ASSERT_EQ(rep.tokens.size(), 1u);
  EXPECT_EQ(rep.tokens[0].token_id, 5);
  EXPECT_EQ(rep.tokens[0].emissions, 4u);
  EXPECT_EQ(rep.tokens[0].observations.size(), 3u);
  EXPECT_EQ(rep.tokens[0].recipient_counts, (std::vector<std::size_t>{0, 4}));
}

TEST(TokenStats, EmptyEmissionWarns) {
  const auto rep = tally_tokens({});
  EXPECT_TRUE(rep.tokens.empty());
  EXPECT_FALSE(rep.warnings.empty());
}

TEST(Causal, EmptySuppressionGivesExactlyZero) {
  const auto ec = tiny_tj();
  const auto net = untrained(ec, 2);
  EvalOptions opts;
  opts.episodes = 50;
  opts.seed = 11;
  const agents::VocabMask none;
  for (double d : paired_differences(net, ec, opts, none)) EXPECT_EQ(d, 0.0);
}

TEST(Causal, RewardIndependentOfChannelGivesZero) {
  auto ec = envs::preset(envs::EnvKind::signal_game, envs::Difficulty::easy);
  ec.correct_reward = 0.0;
  ec.max_steps = 4;
  const auto net = untrained(ec, 3);
  EvalOptions opts;
  opts.episodes = 40;
  const auto stats = collect_token_stats(net, ec, opts);
  const auto effects = causal_effects(net, ec, stats, opts);
  ASSERT_FALSE(effects.empty());
  for (const auto& pe : effects) {
    EXPECT_TRUE(pe.defined);
    EXPECT_EQ(pe.delta, 0.0);
  }
}

TEST(Causal, NeverOccurringPairIsUndefined) {
  const auto ec = tiny_tj();
  const auto net = untrained(ec, 4);
  EvalOptions opts;
  opts.episodes = 10;
  EXPECT_FALSE(causal_token_effect(net, ec, 999, 0, opts).has_value());
}

TEST(NullMask, ThresholdLimits) {
  Rng rng(5);
  const auto stats = random_stats(rng, 8, 4);
  const auto effects = random_effects(rng, stats);
  std::size_t defined = 0;
  for (const auto& pe : effects) defined += pe.defined ? 1 : 0;
  EXPECT_TRUE(build_null_mask(effects, 0.0).empty());
  EXPECT_EQ(build_null_mask(effects, 1e300).size(), defined);
}

TEST(NullMask, MonotoneInEpsilonAndBstarNonIncreasing) {
  Rng rng(6);
  for (int c = 0; c < 1000; ++c) {
    const auto stats = random_stats(rng, 1 + uniform_index(rng, 10), 2 + uniform_index(rng, 4));
    const auto effects = random_effects(rng, stats);
    double e1 = 0.006 * uniform01(rng), e2 = 0.006 * uniform01(rng);
    if (e1 > e2) std::swap(e1, e2);
    const auto mode = uniform_index(rng, 2) ? agents::MaskMode::global : agents::MaskMode::per_recipient;
    const auto m1 = build_null_mask(effects, e1, mode);
    const auto m2 = build_null_mask(effects, e2, mode);
    EXPECT_TRUE(m1.subset_of(m2));
    const auto b1 = estimate_bstar_from_stats(stats, m1);
    const auto b2 = estimate_bstar_from_stats(stats, m2);
    if (b1.defined) EXPECT_GE(b1.b_star, b2.b_star);
  }
}

TEST(BStar, FromStatsExamples) {
  TokenStatsReport stats;
  TokenStats a, b;
  a.token_id = 0;
  a.recipient_counts = {0, 40};
  a.emissions = 40;
  b.token_id = 1;
  b.recipient_counts = {60, 0};
  b.emissions = 60;
  stats.tokens = {a, b};
  stats.total_emissions = 100;
  agents::VocabMask empty;
  EXPECT_EQ(estimate_bstar_from_stats(stats, empty).b_star, 1.0);
  agents::VocabMask forty;
  forty.add(0, 1);
  EXPECT_DOUBLE_EQ(estimate_bstar_from_stats(stats, forty).b_star, 0.6);
  agents::VocabMask full(agents::MaskMode::global);
  full.add(0, 0);
  full.add(1, 0);
  EXPECT_EQ(estimate_bstar_from_stats(stats, full).b_star, 0.0);
  EXPECT_FALSE(estimate_bstar_from_stats(TokenStatsReport{}, empty).defined);
}

TEST(BStar, EmptyMaskIsExactlyOneAndFullMaskZero) {
  const auto ec = tiny_tj();
  const auto net = untrained(ec, 6);
  EvalOptions opts;
  opts.episodes = 30;
  agents::VocabMask empty;
  const auto e = estimate_bstar(net, ec, empty, opts);
  ASSERT_TRUE(e.defined);
  EXPECT_EQ(e.b_star, 1.0);
  agents::VocabMask full(agents::MaskMode::global);
  for (int k = 0; k < 6; ++k) full.add(k, agents::kAllRecipients);
  EXPECT_EQ(estimate_bstar(net, ec, full, opts).b_star, 0.0);
}

TEST(BStar, CombineAcrossSeeds) {
  BStarEstimate a, b, c;
  a.defined = b.defined = true;
  a.b_star = 0.5;
  b.b_star = 0.7;
  const auto m = combine_bstar({a, b, c});
  EXPECT_TRUE(m.defined);
  EXPECT_DOUBLE_EQ(m.b_star, 0.6);
  EXPECT_NEAR(m.std_dev, std::sqrt(0.02), 1e-12);
}

TEST(Table1, Examples) {
  TokenStatsReport stats;
  TokenStats a, b;
  a.token_id = 0;
  a.recipient_counts = {0, 30};
  a.emissions = 30;
  a.observations = {{1.0}};
  b.token_id = 1;
  b.recipient_counts = {10, 60};
  b.emissions = 70;
  b.observations = {{2.0}};
  stats.tokens = {a, b};
  stats.total_emissions = 100;
  agents::VocabMask none;
  auto r = table1_metrics(stats, none);
  EXPECT_EQ(r.null_fraction, 0.0);
  EXPECT_EQ(r.null_emission_fraction, 0.0);
  EXPECT_EQ(r.observations_per_token, 1.0);
  agents::VocabMask m;
  m.add(1, 0);
  r = table1_metrics(stats, m);
  EXPECT_EQ(r.measured, 3u);
  EXPECT_EQ(r.null_count, 1u);
  EXPECT_DOUBLE_EQ(r.null_fraction, 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(r.null_emission_fraction, 0.1);
  agents::VocabMask g(agents::MaskMode::global);
  g.add(0, agents::kAllRecipients);
  r = table1_metrics(stats, g);
  EXPECT_EQ(r.measured, 2u);
  EXPECT_DOUBLE_EQ(r.null_fraction, 0.5);
  EXPECT_DOUBLE_EQ(r.null_emission_fraction, 0.3);
}

TEST(Table1, FractionsInUnitInterval) {
  Rng rng(9);
  for (int c = 0; c < 300; ++c) {
    const auto stats = random_stats(rng, 1 + uniform_index(rng, 8), 3);
    const auto mask = build_null_mask(random_effects(rng, stats), 0.003);
    const auto r = table1_metrics(stats, mask);
    EXPECT_GE(r.null_fraction, 0.0);
    EXPECT_LE(r.null_fraction, 1.0);
    EXPECT_GE(r.null_emission_fraction, 0.0);
    EXPECT_LE(r.null_emission_fraction, 1.0);
    if (stats.total_emissions) EXPECT_NEAR(r.null_emission_fraction, 1.0 - estimate_bstar_from_stats(stats, mask).b_star, 1e-12);
  }
}

TEST(Sweep, SingleBudgetRowMatchesUnmaskedEvaluation) {
  const auto ec = tiny_tj();
  const auto net = untrained(ec, 8);
  EvalOptions opts;
  opts.episodes = 20;
  SweepSeed<double> sd;
  sd.pretrained = &net;
  const auto rows = budget_sweep(ec, std::vector<SweepSeed<double>>{sd}, {1.0}, opts);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].source, "unmasked");
  EXPECT_EQ(rows[0].mean_success, evaluate(net, ec, opts).success);
  std::stringstream csv;
  write_sweep_csv(csv, rows);
  EXPECT_EQ(csv.str().rfind("budget,mean_success,ci95,seeds,source\n", 0), 0u);
}

TEST(Sweep, MissingFinetunedCheckpointSkipsWithWarning) {
  const auto ec = tiny_tj();
  const auto net = untrained(ec, 8);
  EvalOptions opts;
  opts.episodes = 5;
  SweepSeed<double> sd;
  sd.pretrained = &net;
  sd.bstar = 0.8;
  std::vector<std::string> warnings;
  const auto rows = budget_sweep(ec, std::vector<SweepSeed<double>>{sd}, {0.5, 0.0}, opts, &warnings);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].source, "no_comm");
  EXPECT_EQ(warnings.size(), 1u);
}

TEST(Sweep, StudentTInterval) {
  double mean = 0.0, half = 0.0;
  mean_ci({0.5, 0.7}, mean, half);
  EXPECT_DOUBLE_EQ(mean, 0.6);
  EXPECT_NEAR(half, 12.706 * std::sqrt(0.02 / 2.0), 1e-12);
  std::stringstream svg;
  write_sweep_svg(svg, {{1.0, 0.9, 0.05, 2, "unmasked"}, {0.5, 0.7, 0.1, 2, "finetuned"}});
  EXPECT_NE(svg.str().find("<polyline"), std::string::npos);
}

TEST(Evaluate, ContinuousStatsNeedClusters) {
  const auto ec = tiny_tj();
  const auto net = untrained(ec, 9, agents::MessageMode::continuous);
  EvalOptions opts;
  opts.episodes = 5;
  EXPECT_THROW(collect_token_stats(net, ec, opts), ConfigError);
  const auto table = fit_clusters(net, ec, opts, 4, 2);
  EXPECT_LE(table.size(), 4u);
  opts.clusters = &table;
  const auto stats = collect_token_stats(net, ec, opts);
  for (const auto& ts : stats.tokens) EXPECT_LT(ts.token_id, static_cast<int>(table.size()));
}
