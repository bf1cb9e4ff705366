#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <map>
#include <optional>
#include <vector>

#include "mapf/gridworld.hpp"
#include "mapf/metrics.hpp"
#include "mapf/policy.hpp"

namespace mapf::egt {

/// Stretch factor assigned to trajectories that end where they started after moving.
inline constexpr double kWorstFitness = std::numeric_limits<double>::infinity();

/// Population of (cell, action) organisms. Each entry is an integer count or
/// undefined (never updated), which is distinct from zero.
class CounterTable {
 public:
  CounterTable() = default;
  CounterTable(int width, int height)
      : width_(width), height_(height), values_(static_cast<std::size_t>(width) * height * kNumActions, kUndefined) {}
  explicit CounterTable(const GridMap& map) : CounterTable(map.width(), map.height()) {}

  int width() const { return width_; }
  int height() const { return height_; }

  std::optional<std::int64_t> get(Cell c, Action a) const {
    const auto v = values_[key(c.y * width_ + c.x, a)];
    return v == kUndefined ? std::nullopt : std::optional<std::int64_t>(v);
  }
  bool defined(int cell_index, Action a) const { return values_[key(cell_index, a)] != kUndefined; }
  std::int64_t value_or(int cell_index, Action a, std::int64_t fallback) const {
    const auto v = values_[key(cell_index, a)];
    return v == kUndefined ? fallback : v;
  }
  bool any_defined(int cell_index) const;

  /// counter <- (counter or 0) + delta
  void add(int cell_index, Action a, std::int64_t delta) {
    auto& v = values_[key(cell_index, a)];
    v = (v == kUndefined ? 0 : v) + delta;
  }
  void set(Cell c, Action a, std::int64_t value) { values_[key(c.y * width_ + c.x, a)] = value; }

  /// Adds every defined entry of `delta` into this table.
  void merge(const CounterTable& delta);

  friend bool operator==(const CounterTable&, const CounterTable&) = default;

 private:
  static constexpr std::int64_t kUndefined = std::numeric_limits<std::int64_t>::min();
  static std::size_t key(int cell_index, Action a) {
    return static_cast<std::size_t>(cell_index) * kNumActions + static_cast<std::size_t>(index_of(a));
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<std::int64_t> values_;
};

enum class BehaviorMode { Faithful, Iterative };

struct EGTParams {
  double eta = 1.5;    // stretch up to which a success counts as short
  double alpha = 2.0;  // sharpness of the short-path update probability
  double beta = 2.0;   // stretch from which a failure is penalized
  std::int64_t nu = 8;  // replication increment
  std::int64_t mu = 1;  // extinction decrement
  double epsilon = 0.02;
  std::int64_t episodes = 1000;
  std::int64_t reconstruct_interval = 100;
  BehaviorMode behavior_mode = BehaviorMode::Iterative;
  int threads = 1;

  void validate() const;
};

double fitness(const Trajectory& tau);

/// Probability that a goal-reaching trajectory with stretch u replicates.
double update_probability(double u, const EGTParams& params);

struct UpdateResult {
  bool modified = false;
  std::int64_t pairs_touched = 0;
};

/// Replicates a short successful trajectory's (s,a) pairs with probability
/// update_probability(u), or drives out a failed trajectory's pairs when u >= beta.
/// Each distinct pair changes once per call.
UpdateResult apply_update(CounterTable& table, const Trajectory& tau, const EGTParams& params, Rng& rng);

Policy construct_policy(const CounterTable& table, double epsilon, const GridMap& map);

/// Cells with at least one defined counter mapped to their largest-count action
/// (ties go to the earlier action in Up, Down, Left, Right, Stay order).
std::map<Cell, Action> greedy_action_map(const CounterTable& table);

struct TrainResult {
  Policy policy;
  CounterTable table;
  TrainingStats stats;
};

/// Runs params.episodes episodes of the replication/extinction learner. With
/// threads > 1 episodes between policy refreshes run concurrently; the outcome is
/// identical to the single-threaded run.
TrainResult train(const GridMap& map, const WorldConfig& world, const EGTParams& params, const RewardConfig& reward_cfg,
                  Rng& rng);

enum class Invader { UniformRandom, Self };

struct ESSConfig {
  double p_new = 0.1;
  double extra_episode_fraction = 0.1;
  int eval_episodes = 500;
  double agreement_threshold = 0.95;
  double fitness_tolerance = 0.05;
  Invader invader = Invader::UniformRandom;
};

struct ESSReport {
  double p_new = 0.0;
  double argmax_agreement = 1.0;
  double fitness_before = 0.0;  // negated mean stretch; higher is fitter
  double fitness_after = 0.0;
  bool is_ess = false;
  std::int64_t extra_episodes = 0;
  std::int64_t compared_states = 0;
};

/// Mean stretch of evaluation rollouts; failures keep their finite stretch and
/// WORST is capped at the horizon.
double mean_stretch(const std::vector<metrics::EpisodeRecord>& records, int horizon);

ESSReport ess_test(const GridMap& map, const WorldConfig& world, const EGTParams& params, const RewardConfig& reward_cfg,
                   const ESSConfig& ess, Rng& rng);

/// "x y action counter" lines, lexicographically sorted, undefined entries omitted.
void write_counters(std::ostream& out, const CounterTable& table);
CounterTable read_counters(std::istream& in, const GridMap& map);

}  // namespace mapf::egt
