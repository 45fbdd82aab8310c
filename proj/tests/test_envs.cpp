#include <gtest/gtest.h>

#include <sstream>

#include "imgsmac/envs/episode_log.hpp"

using namespace imgsmac;
using namespace imgsmac::envs;

namespace {

std::vector<StepResult> play(Environment& env, std::uint64_t seed, std::uint64_t action_seed) {
  Rng rng(action_seed);
  std::vector<StepResult> out;
  out.push_back(env.reset(seed));
  for (std::size_t t = 0; t < env.max_steps(); ++t) {
    std::vector<int> a(env.agent_count());
    for (auto& x : a) x = static_cast<int>(uniform_index(rng, env.action_count()));
    out.push_back(env.step(a));
    if (out.back().done) break;
  }
  return out;
}

bool same(const std::vector<StepResult>& a, const std::vector<StepResult>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (a[k].observations != b[k].observations || a[k].rewards != b[k].rewards || a[k].active != b[k].active ||
        a[k].new_lifetime != b[k].new_lifetime || a[k].done != b[k].done)
      return false;
  }
  return true;
}

}  // namespace

class EnvDeterminism : public ::testing::TestWithParam<EnvKind> {};

TEST_P(EnvDeterminism, SameSeedSameTrajectory) {
  for (auto d : {Difficulty::easy, Difficulty::medium}) {
    auto cfg = preset(GetParam(), d);
    auto e1 = make_environment(cfg);
    auto e2 = make_environment(cfg);
    EXPECT_TRUE(same(play(*e1, 17, 3), play(*e2, 17, 3)));
    EXPECT_TRUE(same(play(*e1, 17, 3), play(*e1, 17, 3)));
  }
}

TEST_P(EnvDeterminism, ObservationShapesAndRewardBounds) {
  auto cfg = preset(GetParam(), Difficulty::easy);
  auto env = make_environment(cfg);
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto [lo, hi] = env->reward_bounds();
    for (const auto& r : play(*env, s, s + 100)) {
      ASSERT_EQ(r.observations.size(), env->agent_count());
      for (const auto& o : r.observations) ASSERT_EQ(o.size(), env->observation_dim());
      for (double x : r.rewards) {
        EXPECT_GE(x, lo - 1e-12);
        EXPECT_LE(x, hi + 1e-12);
      }
    }
  }
}

INSTANTIATE_TEST_SUITE_P(AllKinds, EnvDeterminism,
                         ::testing::Values(EnvKind::traffic_junction, EnvKind::predator_prey, EnvKind::signal_game));

TEST(EnvConfig, ValidationErrors) {
  auto tj = preset(EnvKind::traffic_junction, Difficulty::easy);
  tj.grid = 5;
  EXPECT_THROW(make_environment(tj), ConfigError);
  auto sg = preset(EnvKind::signal_game, Difficulty::easy);
  sg.agents = 3;
  EXPECT_THROW(make_environment(sg), ConfigError);
  EXPECT_THROW(parse_difficulty("extreme"), ConfigError);
}

TEST(TrafficJunction, CollisionPenaltyAndDelay) {
  auto cfg = preset(EnvKind::traffic_junction, Difficulty::easy);
  cfg.arrival_prob = 0.0;
  TrafficJunction env(cfg);
  env.reset(1);
  // horizontal route 0 and vertical route 1 cross at the center cell (3, 3)
  env.place_car(0, 0, 2);
  env.place_car(1, 1, 2);
  const std::vector<int> gas = {TrafficJunction::kGas, TrafficJunction::kGas, kNoAction, kNoAction, kNoAction};
  auto r = env.step(gas);
  EXPECT_EQ(r.info.collisions, 1u);
  EXPECT_DOUBLE_EQ(r.rewards[0], -10.0 - 0.01);
  EXPECT_DOUBLE_EQ(r.rewards[1], -10.0 - 0.01);
  EXPECT_EQ(r.rewards[2], 0.0);
  EXPECT_EQ(r.observations[0][1 + env.route_count() + 7], 1.0);  // shares its cell
}

TEST(TrafficJunction, BrakeAvoidsCollision) {
  auto cfg = preset(EnvKind::traffic_junction, Difficulty::easy);
  cfg.arrival_prob = 0.0;
  TrafficJunction env(cfg);
  env.reset(1);
  env.place_car(0, 0, 2);
  env.place_car(1, 1, 2);
  const std::vector<int> a = {TrafficJunction::kGas, TrafficJunction::kBrake, kNoAction, kNoAction, kNoAction};
  auto r = env.step(a);
  EXPECT_EQ(r.info.collisions, 0u);
  EXPECT_EQ(env.car(1).progress, 2u);
  EXPECT_EQ(r.observations[1][r.observations[1].size() - 1], 0.0);  // last action was brake
}

TEST(TrafficJunction, CarLeavesAtRouteEnd) {
  auto cfg = preset(EnvKind::traffic_junction, Difficulty::easy);
  cfg.arrival_prob = 0.0;
  TrafficJunction env(cfg);
  env.reset(1);
  env.place_car(0, 0, 6);
  std::vector<int> a(5, kNoAction);
  a[0] = TrafficJunction::kGas;
  auto r = env.step(a);
  EXPECT_FALSE(r.active[0]);
  EXPECT_EQ(env.active_count(), 0u);
}

TEST(TrafficJunction, SpawnMarksNewLifetime) {
  auto cfg = preset(EnvKind::traffic_junction, Difficulty::easy);
  cfg.arrival_prob = 1.0;
  TrafficJunction env(cfg);
  auto r = env.reset(3);
  EXPECT_EQ(env.active_count(), 2u);
  EXPECT_TRUE(r.new_lifetime[0]);
  EXPECT_TRUE(r.new_lifetime[1]);
  EXPECT_FALSE(r.new_lifetime[2]);
  // entries stay occupied while the cars brake, so no new spawn happens
  auto s = env.step(std::vector<int>(5, TrafficJunction::kBrake));
  EXPECT_EQ(env.active_count(), 2u);
  EXPECT_FALSE(s.new_lifetime[0]);
}

TEST(TrafficJunction, RoutesWithTurnsOnMedium) {
  TrafficJunction env(preset(EnvKind::traffic_junction, Difficulty::medium));
  EXPECT_EQ(env.entry_count(), 3u);
  EXPECT_GT(env.route_count(), 3u);
}

TEST(PredatorPrey, ReachedPredatorStaysAndSharesReward) {
  auto cfg = preset(EnvKind::predator_prey, Difficulty::easy);
  PredatorPrey env(cfg);
  env.reset(0);
  env.place({{2, 1}, {0, 0}, {4, 4}}, {2, 2});
  auto r = env.step(std::vector<int>{PredatorPrey::kRight, PredatorPrey::kStay, PredatorPrey::kStay});
  EXPECT_TRUE(env.reached(0));
  EXPECT_DOUBLE_EQ(r.rewards[0], 0.05);
  EXPECT_DOUBLE_EQ(r.rewards[1], -0.05);
  r = env.step(std::vector<int>{PredatorPrey::kUp, PredatorPrey::kStay, PredatorPrey::kStay});
  EXPECT_EQ(env.predator(0), (PredatorPrey::Pos{2, 2}));
}

TEST(PredatorPrey, WallsClampMovement) {
  PredatorPrey env(preset(EnvKind::predator_prey, Difficulty::easy));
  env.reset(0);
  env.place({{0, 0}, {4, 4}, {0, 4}}, {2, 2});
  env.step(std::vector<int>{PredatorPrey::kUp, PredatorPrey::kDown, PredatorPrey::kRight});
  EXPECT_EQ(env.predator(0), (PredatorPrey::Pos{0, 0}));
  EXPECT_EQ(env.predator(1), (PredatorPrey::Pos{4, 4}));
  EXPECT_EQ(env.predator(2), (PredatorPrey::Pos{0, 4}));
}

TEST(PredatorPrey, EpisodeEndsWhenAllReach) {
  PredatorPrey env(preset(EnvKind::predator_prey, Difficulty::easy));
  env.reset(0);
  env.place({{2, 1}, {2, 3}, {1, 2}}, {2, 2});
  auto r = env.step(std::vector<int>{PredatorPrey::kRight, PredatorPrey::kLeft, PredatorPrey::kDown});
  EXPECT_TRUE(r.done);
  EXPECT_EQ(r.info.prey_reached, 3u);
}

TEST(SignalGame, RewardTable) {
  EnvConfig cfg = preset(EnvKind::signal_game, Difficulty::easy);
  EXPECT_TRUE(SignalGame::correct(cfg, false, 1, 0));
  EXPECT_FALSE(SignalGame::correct(cfg, false, 1, 1));
  EXPECT_TRUE(SignalGame::correct(cfg, true, 0, 0));
  EXPECT_FALSE(SignalGame::correct(cfg, true, 0, 1));
  EXPECT_TRUE(SignalGame::correct(cfg, true, 1, 1));
  cfg.free_context = true;
  EXPECT_TRUE(SignalGame::correct(cfg, true, 0, 1));
}

TEST(SignalGame, IdleSpeakerIsInactive) {
  auto cfg = preset(EnvKind::signal_game, Difficulty::easy);
  cfg.idle_prob = 0.5;
  cfg.max_steps = 200;
  SignalGame env(cfg);
  auto r = env.reset(4);
  std::size_t idle = 0;
  for (int t = 0; t < 200; ++t) {
    if (!r.active[0]) {
      ++idle;
      EXPECT_EQ(r.observations[0], Observation(4, 0.0));
    }
    EXPECT_TRUE(r.active[1]);
    r = env.step(std::vector<int>{0, 0});
  }
  EXPECT_GT(idle, 60u);
  EXPECT_LT(idle, 140u);
}

TEST(EpisodeLog, JsonRoundTrip) {
  StepRecord s;
  s.t = 3;
  s.observations = {{1.0, 0.5}, {0.0, 0.0}};
  s.active = {true, false};
  s.actions = {1, kNoAction};
  s.tokens = {2, -1};
  s.messages = {{0.25, -0.125}, {}};
  s.gates = {{0, 0}, {0, 0}};
  s.rewards = {-0.1, 0.0};
  s.info.collisions = 1;
  s.rng_state_id = 99;
  EpisodeLog log;
  log.steps = {s};
  std::stringstream ss;
  write_episode_log(ss, log);
  const auto back = read_episode_steps(ss);
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0].observations, s.observations);
  EXPECT_EQ(back[0].tokens, s.tokens);
  EXPECT_EQ(back[0].messages, s.messages);
  EXPECT_EQ(back[0].info.collisions, 1u);
  EXPECT_EQ(back[0].rng_state_id, 99u);
}

TEST(EpisodeLog, SuccessDefinitions) {
  EpisodeLog log;
  log.kind = EnvKind::traffic_junction;
  StepRecord s;
  log.steps = {s};
  EXPECT_TRUE(episode_success(log));
  log.steps[0].info.collisions = 1;
  EXPECT_FALSE(episode_success(log));
  log.kind = EnvKind::predator_prey;
  log.agents = 2;
  log.steps[0].info.prey_reached = 2;
  EXPECT_TRUE(episode_success(log));
}
