#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mapf/gridworld.hpp"
#include "mapf/policy.hpp"

namespace mapf {

/// Counters reported by every learner.
struct TrainingStats {
  std::int64_t episodes_run = 0;
  std::int64_t policy_updates = 0;
  std::int64_t goal_reach_count = 0;
  double wall_time = 0.0;  // seconds
};

namespace metrics {

struct EpisodeRecord {
  std::vector<Trajectory> trajectories;
  std::vector<double> returns;         // C_T per agent
  double cumulative_return = 0.0;      // G_T, the sum of returns
  std::vector<int> min_obstacle_distance;
};

struct MetricsReport {
  double mean_path_length = 0.0;
  bool no_successes = false;  // mean_path_length then holds the horizon
  double success_rate = 0.0;
  double min_agent_success_rate = 0.0;
  double expected_min_obstacle_distance = 0.0;
  std::int64_t policy_updates = 0;
  double train_time_s = 0.0;
  double run_time_s = 0.0;
  std::int64_t agent_episodes = 0;
};

struct Timers {
  double train_s = 0.0;
  double run_s = 0.0;
};

/// Manhattan distance from every cell to the nearest hazard: an obstacle or the
/// out-of-bounds ring around the grid.
class HazardField {
 public:
  explicit HazardField(const GridMap& map);
  int at(int cell_index) const { return dist_[cell_index]; }
  int at(Cell c) const { return dist_[c.y * width_ + c.x]; }

 private:
  int width_;
  std::vector<int> dist_;
};

/// Minimum over the trajectory's timesteps of the distance to any hazard or to any
/// other agent's cell at the same timestep. others[t] lists the other agents' cells
/// at time t; timesteps beyond others.size() only see static hazards.
int min_obstacle_distance(const Trajectory& tau, const GridMap& map, std::span<const std::vector<Cell>> others);

/// One episode of world.n_agents agents acting under a shared policy. Agents on a
/// goal stop acting and keep occupying their cell.
EpisodeRecord rollout(const GridMap& map, const WorldConfig& world, const RewardConfig& reward_cfg,
                      const Policy& policy, Rng& rng);
EpisodeRecord rollout(const GridMap& map, const HazardField& hazards, const WorldConfig& world,
                      const RewardConfig& reward_cfg, const Policy& policy, Rng& rng);

/// Builds a record from externally produced joint paths (e.g. a plan). paths[i][t] is
/// agent i's cell at time t; an agent stays on its last cell once its path ends.
EpisodeRecord record_from_paths(const GridMap& map, const HazardField& hazards, const RewardConfig& reward_cfg,
                                std::span<const std::vector<Cell>> paths);

/// `episodes` rollouts; episode k draws from derive_seed(seed, {k}), so the result does not
/// depend on `threads`.
std::vector<EpisodeRecord> evaluate(const GridMap& map, const WorldConfig& world, const RewardConfig& reward_cfg,
                                    const Policy& policy, int episodes, std::uint64_t seed, int threads = 1);

MetricsReport aggregate(std::span<const EpisodeRecord> records, const TrainingStats& stats, const Timers& timers,
                        int horizon);

}  // namespace metrics
}  // namespace mapf
