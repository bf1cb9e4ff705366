#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "mapf/gridworld.hpp"
#include "mapf/metrics.hpp"
#include "mapf/policy.hpp"

namespace mapf::baselines {

/// Action-value estimates, zero-initialized. Also holds Monte Carlo averages.
class QTable {
 public:
  QTable() = default;
  QTable(int width, int height) : width_(width), values_(static_cast<std::size_t>(width) * height * kNumActions, 0.0) {}
  explicit QTable(const GridMap& map) : QTable(map.width(), map.height()) {}

  double& at(int cell_index, Action a) { return values_[key(cell_index, a)]; }
  double at(int cell_index, Action a) const { return values_[key(cell_index, a)]; }
  double at(Cell c, Action a) const { return at(c.y * width_ + c.x, a); }
  double max_value(int cell_index) const;
  /// Highest-valued action; ties go to the earlier action.
  Action greedy(int cell_index) const;

  std::size_t size() const { return values_.size(); }
  static std::size_t key(int cell_index, Action a) {
    return static_cast<std::size_t>(cell_index) * kNumActions + static_cast<std::size_t>(index_of(a));
  }

  friend bool operator==(const QTable&, const QTable&) = default;

 private:
  int width_ = 0;
  std::vector<double> values_;
};

/// First-visit return sums and visit counts per (cell, action).
class ReturnsAccumulator {
 public:
  explicit ReturnsAccumulator(std::size_t entries) : sum_(entries, 0.0), count_(entries, 0) {}
  /// Adds one return; returns the new average.
  double add(std::size_t key, double ret) {
    sum_[key] += ret;
    return sum_[key] / static_cast<double>(++count_[key]);
  }
  std::int64_t count(std::size_t key) const { return count_[key]; }
  double average(std::size_t key) const { return count_[key] == 0 ? 0.0 : sum_[key] / static_cast<double>(count_[key]); }

 private:
  std::vector<double> sum_;
  std::vector<std::int64_t> count_;
};

struct LearnParams {
  double learning_rate = 0.2;
  double discount = 0.99;
  double explore_start = 0.5;
  double explore_end = 0.05;
  std::int64_t explore_decay_episodes = 0;  // 0: decay over the first half of training
  std::int64_t episodes = 10000;
  double time_budget_s = 0.0;  // 0: unlimited; otherwise training stops once exceeded

  void validate() const;
  double explore_at(std::int64_t episode) const;
};

struct LearnResult {
  QTable q;
  Policy policy;
  TrainingStats stats;
};

/// Tabular Q-learning with epsilon-greedy behavior; one shared table, one update per
/// acting agent per step. Goal cells are absorbing (no bootstrap past them).
LearnResult q_train(const GridMap& map, const WorldConfig& world, const RewardConfig& reward_cfg,
                    const LearnParams& params, Rng& rng);

/// On-policy first-visit Monte Carlo control over action values.
LearnResult mc_train(const GridMap& map, const WorldConfig& world, const RewardConfig& reward_cfg,
                     const LearnParams& params, Rng& rng);

/// Epsilon-greedy policy over all five actions from a table.
Policy epsilon_greedy_policy(const QTable& q, double epsilon, const GridMap& map);

/// Cells visited by following the greedy action from `start` until a goal or `horizon` steps.
std::vector<Cell> greedy_rollout(const QTable& q, const GridMap& map, Cell start, int horizon);

struct PlanResult {
  std::vector<std::vector<Cell>> paths;  // paths[i][t]; agents hold their last cell afterwards
  std::vector<std::uint8_t> success;
  std::int64_t expanded = 0;
};

/// Prioritized space-time A*: agents plan in index order against a reservation table of
/// earlier agents' cells, edge traversals and goal parking.
PlanResult astar_plan(const GridMap& map, std::span<const Cell> starts, int horizon);

void write_qtable(std::ostream& out, const QTable& q, const GridMap& map);
/// "agent t x y" per timestep.
void write_plan(std::ostream& out, const PlanResult& plan);

}  // namespace mapf::baselines
