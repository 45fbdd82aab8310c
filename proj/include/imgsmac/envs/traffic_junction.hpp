#pragma once

#include <algorithm>
#include <map>
#include <utility>
#include <vector>

#include "imgsmac/envs/environment.hpp"

namespace imgsmac::envs {

/// Blind traffic junction. Cars follow fixed routes through one-way roads and choose
/// gas (advance one cell) or brake (hold). A car sees only its own route, position along the
/// route, whether its own cell holds another car, and its last action.
class TrafficJunction final : public Environment {
 public:
  static constexpr int kGas = 0;
  static constexpr int kBrake = 1;

  struct Cell {
    int row, col;
    friend bool operator==(const Cell&, const Cell&) = default;
    friend auto operator<=>(const Cell&, const Cell&) = default;
  };

  struct Road {
    bool horizontal;
    int line;       // row for horizontal roads, column for vertical ones
    int direction;  // +1: left->right / top->bottom, -1: reverse
  };

  explicit TrafficJunction(EnvConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    require(cfg_.kind == EnvKind::traffic_junction, "TrafficJunction needs kind traffic_junction");
    build_roads();
    build_routes();
    longest_route_ = 0;
    for (const auto& r : routes_) longest_route_ = std::max(longest_route_, r.cells.size());
    cars_.assign(cfg_.agents, Car{});
  }

  std::size_t agent_count() const override { return cfg_.agents; }
  std::size_t observation_dim() const override { return 1 + routes_.size() + longest_route_ + 2; }
  std::size_t action_count() const override { return 2; }
  std::size_t max_steps() const override { return cfg_.max_steps; }
  std::pair<double, double> reward_bounds() const override {
    return {cfg_.collision_reward - cfg_.delay_coef * static_cast<double>(cfg_.max_steps), 0.0};
  }
  const EnvConfig& config() const override { return cfg_; }

  std::size_t route_count() const { return routes_.size(); }
  std::size_t entry_count() const { return roads_.size(); }
  const std::vector<Cell>& route_cells(std::size_t r) const { return routes_[r].cells; }

  struct CarView {
    bool active;
    std::size_t route;
    std::size_t progress;
    std::size_t age;
  };
  CarView car(std::size_t i) const { return {cars_[i].active, cars_[i].route, cars_[i].progress, cars_[i].age}; }
  std::size_t active_count() const {
    return static_cast<std::size_t>(std::count_if(cars_.begin(), cars_.end(), [](const Car& c) { return c.active; }));
  }

  /// Test hook: places a car directly.
  void place_car(std::size_t slot, std::size_t route, std::size_t progress) {
    require(slot < cars_.size() && route < routes_.size() && progress < routes_[route].cells.size(),
            "place_car out of range");
    cars_[slot] = Car{true, route, progress, 0, kGas};
  }
  void clear_cars() { cars_.assign(cfg_.agents, Car{}); }
  void set_arrival_prob(double p) { cfg_.arrival_prob = p; }

  StepResult reset(std::uint64_t seed) override {
    rng_.seed(seed);
    t_ = 0;
    cars_.assign(cfg_.agents, Car{});
    StepResult res = blank_result();
    std::vector<bool> fresh(cfg_.agents, false);
    spawn(fresh);
    res.new_lifetime = fresh;
    fill_observations(res);
    return res;
  }

  StepResult step(std::span<const int> actions) override {
    require(actions.size() == cfg_.agents, "expected one action per agent slot");
    StepResult res = blank_result();
    std::vector<bool> exited(cfg_.agents, false);
    for (std::size_t i = 0; i < cfg_.agents; ++i) {
      Car& c = cars_[i];
      if (!c.active) {
        if (actions[i] != kNoAction) ++res.info.ignored_actions;
        continue;
      }
      const int a = actions[i] == kBrake ? kBrake : kGas;
      c.last_action = a;
      c.age += 1;
      res.rewards[i] = -cfg_.delay_coef * static_cast<double>(c.age);
      if (a == kGas) {
        c.progress += 1;
        if (c.progress >= routes_[c.route].cells.size()) exited[i] = true;
      }
    }
    // collisions among cars still on the grid
    std::map<Cell, std::vector<std::size_t>> occupancy;
    for (std::size_t i = 0; i < cfg_.agents; ++i)
      if (cars_[i].active && !exited[i]) occupancy[position(i)].push_back(i);
    for (const auto& [cell, ids] : occupancy) {
      if (ids.size() < 2) continue;
      ++res.info.collisions;
      for (auto i : ids) res.rewards[i] += cfg_.collision_reward;
    }
    for (std::size_t i = 0; i < cfg_.agents; ++i)
      if (exited[i]) cars_[i] = Car{};
    ++t_;
    std::vector<bool> fresh(cfg_.agents, false);
    spawn(fresh);
    res.new_lifetime = fresh;
    res.done = t_ >= cfg_.max_steps;
    fill_observations(res);
    return res;
  }

 private:
  struct Car {
    bool active = false;
    std::size_t route = 0;
    std::size_t progress = 0;
    std::size_t age = 0;
    int last_action = kGas;
  };
  struct Route {
    std::size_t entry;
    std::vector<Cell> cells;
  };

  StepResult blank_result() const {
    StepResult r;
    r.rewards.assign(cfg_.agents, 0.0);
    r.active.assign(cfg_.agents, false);
    r.new_lifetime.assign(cfg_.agents, false);
    r.observations.assign(cfg_.agents, Observation(observation_dim(), 0.0));
    return r;
  }

  Cell position(std::size_t i) const { return routes_[cars_[i].route].cells[cars_[i].progress]; }

  void build_roads() {
    const int n = static_cast<int>(cfg_.grid);
    switch (cfg_.difficulty) {
      case Difficulty::easy:
        roads_ = {{true, n / 2, +1}, {false, n / 2, +1}};
        turns_ = false;
        break;
      case Difficulty::medium:
        roads_ = {{true, n / 2 - 1, +1}, {false, n / 3 - 1, +1}, {false, 2 * n / 3, -1}};
        turns_ = true;
        break;
      case Difficulty::hard:
        roads_ = {{true, n / 3 - 1, +1}, {true, 2 * n / 3, -1}, {false, n / 3 - 1, +1}, {false, 2 * n / 3, -1}};
        turns_ = true;
        break;
    }
  }

  std::vector<Cell> road_cells(const Road& r) const {
    const int n = static_cast<int>(cfg_.grid);
    std::vector<Cell> cells;
    for (int k = 0; k < n; ++k) {
      const int s = r.direction > 0 ? k : n - 1 - k;
      cells.push_back(r.horizontal ? Cell{r.line, s} : Cell{s, r.line});
    }
    return cells;
  }

  void build_routes() {
    for (std::size_t e = 0; e < roads_.size(); ++e) {
      const auto main = road_cells(roads_[e]);
      routes_.push_back({e, main});
      if (!turns_) continue;
      for (std::size_t c = 0; c < roads_.size(); ++c) {
        if (roads_[c].horizontal == roads_[e].horizontal) continue;
        const auto cross = road_cells(roads_[c]);
        // junction cell shared by both roads
        auto jm = std::find_if(main.begin(), main.end(), [&](const Cell& x) {
          return std::find(cross.begin(), cross.end(), x) != cross.end();
        });
        auto jc = std::find(cross.begin(), cross.end(), *jm);
        std::vector<Cell> cells(main.begin(), jm + 1);
        cells.insert(cells.end(), jc + 1, cross.end());
        routes_.push_back({e, std::move(cells)});
      }
    }
  }

  // Two draws per entry per step regardless of outcome, so the RNG stream does not depend on actions.
  void spawn(std::vector<bool>& fresh) {
    for (std::size_t e = 0; e < roads_.size(); ++e) {
      const double u = uniform01(rng_);
      const double v = uniform01(rng_);
      if (u >= cfg_.arrival_prob) continue;
      std::vector<std::size_t> options;
      for (std::size_t r = 0; r < routes_.size(); ++r)
        if (routes_[r].entry == e) options.push_back(r);
      const std::size_t route = options[std::min(options.size() - 1, static_cast<std::size_t>(v * options.size()))];
      const Cell entry = routes_[route].cells.front();
      bool occupied = false;
      for (std::size_t i = 0; i < cfg_.agents; ++i)
        if (cars_[i].active && position(i) == entry) occupied = true;
      if (occupied) continue;
      for (std::size_t i = 0; i < cfg_.agents; ++i) {
        if (cars_[i].active) continue;
        cars_[i] = Car{true, route, 0, 0, kGas};
        fresh[i] = true;
        break;
      }
    }
  }

  void fill_observations(StepResult& res) const {
    std::map<Cell, int> count;
    for (std::size_t i = 0; i < cfg_.agents; ++i)
      if (cars_[i].active) ++count[position(i)];
    for (std::size_t i = 0; i < cfg_.agents; ++i) {
      const Car& c = cars_[i];
      res.active[i] = c.active;
      if (!c.active) continue;
      auto& o = res.observations[i];
      o[0] = 1.0;
      o[1 + c.route] = 1.0;
      o[1 + routes_.size() + c.progress] = 1.0;
      o[1 + routes_.size() + longest_route_] = count[position(i)] > 1 ? 1.0 : 0.0;
      o[2 + routes_.size() + longest_route_] = c.last_action == kGas ? 1.0 : 0.0;
    }
  }

  EnvConfig cfg_;
  std::vector<Road> roads_;
  bool turns_ = false;
  std::vector<Route> routes_;
  std::size_t longest_route_ = 0;
  std::vector<Car> cars_;
  Rng rng_;
  std::size_t t_ = 0;
};

}  // namespace imgsmac::envs
