#include "mapf/metrics.hpp"

#include <algorithm>
#include <deque>
#include <limits>
#include <map>

#include "mapf/error.hpp"
#include "mapf/parallel.hpp"

namespace mapf::metrics {

namespace {

Action move_between(Cell from, Cell to) {
  for (Action a : kAllActions) {
    if (displace(from, a) == to) return a;
  }
  throw Error(ErrorCode::kInvalidJointState, "path contains a jump between non-adjacent cells");
}

// Shared core: `positions(t)` yields every agent's cell at time t.
template <typename Positions>
int min_distance_core(std::size_t self, std::size_t length, std::size_t n_agents, const HazardField& hazards,
                      Positions&& positions) {
  int best = std::numeric_limits<int>::max();
  for (std::size_t t = 0; t < length; ++t) {
    const auto& cells = positions(t);
    const Cell c = cells[self];
    int d = hazards.at(c);
    for (std::size_t j = 0; j < n_agents; ++j) {
      if (j != self) d = std::min(d, manhattan(c, cells[j]));
    }
    best = std::min(best, d);
    if (best <= 1) break;  // free cells are at least 1 from any hazard or other agent
  }
  return best;
}

}  // namespace

HazardField::HazardField(const GridMap& map) : width_(map.width()), dist_(static_cast<std::size_t>(map.area()), -1) {
  // Multi-source BFS without barriers yields exact Manhattan distance to the nearest obstacle.
  std::deque<int> queue;
  for (Cell o : map.obstacles()) {
    dist_[map.index(o)] = 0;
    queue.push_back(map.index(o));
  }
  while (!queue.empty()) {
    const int cur = queue.front();
    queue.pop_front();
    const Cell c = map.cell_at(cur);
    for (Action a : {Action::Up, Action::Down, Action::Left, Action::Right}) {
      const Cell n = displace(c, a);
      if (!map.in_bounds(n)) continue;
      const int ni = map.index(n);
      if (dist_[ni] >= 0) continue;
      dist_[ni] = dist_[cur] + 1;
      queue.push_back(ni);
    }
  }
  for (int i = 0; i < map.area(); ++i) {
    const Cell c = map.cell_at(i);
    const int ring = std::min({c.x + 1, c.y + 1, map.width() - c.x, map.height() - c.y});
    dist_[i] = dist_[i] < 0 ? ring : std::min(dist_[i], ring);
  }
}

int min_obstacle_distance(const Trajectory& tau, const GridMap& map, std::span<const std::vector<Cell>> others) {
  const HazardField hazards(map);
  int best = std::numeric_limits<int>::max();
  for (std::size_t t = 0; t < tau.length(); ++t) {
    const Cell c = tau.cell_at(t);
    int d = hazards.at(c);
    if (t < others.size()) {
      for (Cell o : others[t]) d = std::min(d, manhattan(c, o));
    }
    best = std::min(best, d);
  }
  return best;
}

EpisodeRecord rollout(const GridMap& map, const WorldConfig& world, const RewardConfig& reward_cfg,
                      const Policy& policy, Rng& rng) {
  const HazardField hazards(map);
  return rollout(map, hazards, world, reward_cfg, policy, rng);
}

EpisodeRecord rollout(const GridMap& map, const HazardField& hazards, const WorldConfig& world,
                      const RewardConfig& reward_cfg, const Policy& policy, Rng& rng) {
  const int horizon = world.resolved_horizon(map);
  const auto n = static_cast<std::size_t>(world.n_agents);
  const std::vector<Cell> starts = sample_initial(map, world.n_agents, rng);

  JointStepper stepper(map);
  stepper.reset(starts);

  EpisodeRecord rec;
  rec.trajectories.resize(n);
  rec.returns.assign(n, 0.0);
  std::vector<std::uint8_t> active(n, 1);
  std::vector<std::size_t> lengths(n, 1);
  std::size_t n_active = n;
  for (std::size_t i = 0; i < n; ++i) {
    if (map.is_goal(starts[i])) {
      active[i] = 0;
      --n_active;
    }
  }

  std::vector<std::vector<Cell>> history;
  history.reserve(static_cast<std::size_t>(horizon) + 1);
  history.emplace_back(starts);

  std::vector<Action> actions(n, Action::Stay);
  std::vector<Action> applied(n, Action::Stay);
  std::vector<std::uint8_t> events(n, 0);
  for (int t = 0; t < horizon && n_active > 0; ++t) {
    const auto before = history.back();
    for (std::size_t i = 0; i < n; ++i) {
      if (active[i]) actions[i] = policy.sample(map.index(before[i]), rng);
    }
    stepper.advance(actions, world.action_noise, rng, active, events, applied);
    const auto after = stepper.cells();
    for (std::size_t i = 0; i < n; ++i) {
      if (!active[i]) continue;
      rec.trajectories[i].steps.push_back({before[i], actions[i]});
      rec.returns[i] += reward(before[i], applied[i], after[i], map, events[i] & event::kBlockedByMap, reward_cfg);
      ++lengths[i];
      if (events[i] & event::kReachedGoal) {
        active[i] = 0;
        --n_active;
      }
    }
    history.emplace_back(after.begin(), after.end());
  }

  const auto final_cells = history.back();
  rec.min_obstacle_distance.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& tau = rec.trajectories[i];
    tau.final = final_cells[i];
    tau.reached_goal = map.is_goal(tau.final);
    rec.cumulative_return += rec.returns[i];
    rec.min_obstacle_distance[i] =
        min_distance_core(i, lengths[i], n, hazards, [&](std::size_t t) -> const std::vector<Cell>& { return history[t]; });
  }
  return rec;
}

EpisodeRecord record_from_paths(const GridMap& map, const HazardField& hazards, const RewardConfig& reward_cfg,
                                std::span<const std::vector<Cell>> paths) {
  const std::size_t n = paths.size();
  EpisodeRecord rec;
  rec.trajectories.resize(n);
  rec.returns.assign(n, 0.0);
  rec.min_obstacle_distance.resize(n);
  std::size_t span_len = 1;
  for (const auto& p : paths) {
    if (p.empty()) throw Error(ErrorCode::kInvalidJointState, "empty agent path");
    span_len = std::max(span_len, p.size());
  }
  std::vector<std::vector<Cell>> history(span_len, std::vector<Cell>(n));
  for (std::size_t t = 0; t < span_len; ++t) {
    for (std::size_t i = 0; i < n; ++i) history[t][i] = paths[i][std::min(t, paths[i].size() - 1)];
  }
  for (std::size_t i = 0; i < n; ++i) {
    const auto& p = paths[i];
    auto& tau = rec.trajectories[i];
    for (std::size_t t = 0; t + 1 < p.size(); ++t) {
      const Action a = move_between(p[t], p[t + 1]);
      tau.steps.push_back({p[t], a});
      rec.returns[i] += reward(p[t], a, p[t + 1], map, false, reward_cfg);
    }
    tau.final = p.back();
    tau.reached_goal = map.is_goal(tau.final);
    rec.cumulative_return += rec.returns[i];
    rec.min_obstacle_distance[i] =
        min_distance_core(i, p.size(), n, hazards, [&](std::size_t t) -> const std::vector<Cell>& { return history[t]; });
  }
  return rec;
}

std::vector<EpisodeRecord> evaluate(const GridMap& map, const WorldConfig& world, const RewardConfig& reward_cfg,
                                    const Policy& policy, int episodes, std::uint64_t seed, int threads) {
  const HazardField hazards(map);
  std::vector<EpisodeRecord> records(static_cast<std::size_t>(std::max(0, episodes)));
  parallel_for(records.size(), threads, [&](std::size_t k) {
    Rng rng(derive_seed(seed, {k}));
    records[k] = rollout(map, hazards, world, reward_cfg, policy, rng);
  });
  return records;
}

MetricsReport aggregate(std::span<const EpisodeRecord> records, const TrainingStats& stats, const Timers& timers,
                        int horizon) {
  if (records.empty()) throw Error(ErrorCode::kEmptyInput, "aggregate needs at least one episode record");
  MetricsReport report;
  std::int64_t total = 0, successes = 0, success_steps = 0;
  double distance_sum = 0.0;
  std::map<Cell, std::pair<std::int64_t, std::int64_t>> per_start;  // (successes, attempts)
  for (const auto& rec : records) {
    for (std::size_t i = 0; i < rec.trajectories.size(); ++i) {
      const auto& tau = rec.trajectories[i];
      ++total;
      auto& slot = per_start[tau.first()];
      ++slot.second;
      if (tau.reached_goal) {
        ++successes;
        ++slot.first;
        success_steps += static_cast<std::int64_t>(tau.steps.size());
      }
      distance_sum += rec.min_obstacle_distance[i];
    }
  }
  if (total == 0) throw Error(ErrorCode::kEmptyInput, "episode records contain no agents");
  report.agent_episodes = total;
  report.success_rate = static_cast<double>(successes) / static_cast<double>(total);
  report.no_successes = successes == 0;
  report.mean_path_length =
      successes == 0 ? static_cast<double>(horizon) : static_cast<double>(success_steps) / static_cast<double>(successes);
  double worst = 1.0;
  for (const auto& [cell, counts] : per_start) {
    worst = std::min(worst, static_cast<double>(counts.first) / static_cast<double>(counts.second));
  }
  report.min_agent_success_rate = worst;
  report.expected_min_obstacle_distance = distance_sum / static_cast<double>(total);
  report.policy_updates = stats.policy_updates;
  report.train_time_s = timers.train_s;
  report.run_time_s = timers.run_s;
  return report;
}

}  // namespace mapf::metrics
