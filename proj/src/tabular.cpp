#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ostream>

#include "mapf/baselines.hpp"
#include "mapf/error.hpp"

namespace mapf::baselines {

double QTable::max_value(int cell_index) const {
  double best = values_[key(cell_index, Action::Up)];
  for (int a = 1; a < kNumActions; ++a) best = std::max(best, values_[key(cell_index, action_at(a))]);
  return best;
}

Action QTable::greedy(int cell_index) const {
  int best = 0;
  for (int a = 1; a < kNumActions; ++a) {
    if (values_[key(cell_index, action_at(a))] > values_[key(cell_index, action_at(best))]) best = a;
  }
  return action_at(best);
}

void LearnParams::validate() const {
  auto fail = [](const char* what) { throw Error(ErrorCode::kInvalidConfig, what); };
  if (!(learning_rate > 0.0 && learning_rate <= 1.0)) fail("learn.learning_rate must lie in (0,1]");
  if (!(discount >= 0.0 && discount <= 1.0)) fail("learn.discount must lie in [0,1]");
  if (!(explore_start >= 0.0 && explore_start <= 1.0)) fail("learn.explore_start must lie in [0,1]");
  if (!(explore_end >= 0.0 && explore_end <= 1.0)) fail("learn.explore_end must lie in [0,1]");
  if (explore_end > explore_start) fail("learn.explore_end must not exceed learn.explore_start");
  if (explore_decay_episodes < 0) fail("learn.explore_decay_episodes must be non-negative");
  if (episodes < 0) fail("learn.episodes must be non-negative");
  if (!(time_budget_s >= 0.0)) fail("learn.time_budget_s must be non-negative");
}

double LearnParams::explore_at(std::int64_t episode) const {
  const std::int64_t decay = explore_decay_episodes > 0 ? explore_decay_episodes : std::max<std::int64_t>(1, episodes / 2);
  const double frac = std::min(1.0, static_cast<double>(episode) / static_cast<double>(decay));
  return explore_start + (explore_end - explore_start) * frac;
}

namespace {

using Clock = std::chrono::steady_clock;

// Epsilon-greedy draw; greedy ties are broken uniformly at random during training.
Action choose(const QTable& q, int cell, double explore, Rng& rng) {
  if (rng.bernoulli(explore)) return action_at(static_cast<int>(rng.below(kNumActions)));
  const double best = q.max_value(cell);
  int ties[kNumActions];
  int n = 0;
  for (int a = 0; a < kNumActions; ++a) {
    if (q.at(cell, action_at(a)) == best) ties[n++] = a;
  }
  return action_at(ties[n == 1 ? 0 : rng.below(static_cast<std::uint64_t>(n))]);
}

void validate_inputs(const GridMap& map, const WorldConfig& world, const RewardConfig& reward_cfg, const LearnParams& params) {
  world.validate();
  reward_cfg.validate();
  params.validate();
  if (static_cast<std::size_t>(world.n_agents) > map.starts().size()) {
    throw Error(ErrorCode::kCapacity, "more agents than start cells");
  }
}

struct Transition {
  int cell;
  Action action;
  double reward;
};

// Shared episode loop. on_step(agent, transition, next_cell) fires for every acting
// agent in index order after each joint step.
template <typename OnStep>
void simulate_episode(const GridMap& map, const WorldConfig& world, int horizon, const QTable& q, double explore,
                      Rng& rng, JointStepper& stepper, const RewardConfig& reward_cfg, TrainingStats& stats,
                      OnStep&& on_step) {
  const auto n = static_cast<std::size_t>(world.n_agents);
  const auto starts = sample_initial(map, world.n_agents, rng);
  stepper.reset(starts);
  std::vector<std::uint8_t> active(n, 1), events(n, 0);
  std::vector<Action> actions(n, Action::Stay), applied(n, Action::Stay);
  std::vector<int> before(n);
  std::size_t n_active = n;
  for (std::size_t i = 0; i < n; ++i) {
    if (map.is_goal(starts[i])) {
      active[i] = 0;
      --n_active;
    }
  }
  for (int t = 0; t < horizon && n_active > 0; ++t) {
    for (std::size_t i = 0; i < n; ++i) {
      before[i] = map.index(stepper.cells()[i]);
      if (active[i]) actions[i] = choose(q, before[i], explore, rng);
    }
    stepper.advance(actions, world.action_noise, rng, active, events, applied);
    for (std::size_t i = 0; i < n; ++i) {
      if (!active[i]) continue;
      const Cell next = stepper.cells()[i];
      const double r = reward(map.cell_at(before[i]), applied[i], next, map, events[i] & event::kBlockedByMap, reward_cfg);
      on_step(i, Transition{before[i], actions[i], r}, map.index(next));
      if (events[i] & event::kReachedGoal) {
        active[i] = 0;
        --n_active;
        ++stats.goal_reach_count;
      }
    }
  }
  ++stats.episodes_run;
}

bool out_of_time(const LearnParams& params, Clock::time_point t0, std::int64_t episode) {
  if (params.time_budget_s <= 0.0 || episode % 64 != 0) return false;
  return std::chrono::duration<double>(Clock::now() - t0).count() > params.time_budget_s;
}

}  // namespace

Policy epsilon_greedy_policy(const QTable& q, double epsilon, const GridMap& map) {
  Policy policy = Policy::uniform(map);
  for (Cell c : map.free_cells()) {
    const int idx = map.index(c);
    auto& p = policy.at(idx);
    p.fill(epsilon / kNumActions);
    p[index_of(q.greedy(idx))] += 1.0 - epsilon;
  }
  return policy;
}

LearnResult q_train(const GridMap& map, const WorldConfig& world, const RewardConfig& reward_cfg,
                    const LearnParams& params, Rng& rng) {
  validate_inputs(map, world, reward_cfg, params);
  const auto t0 = Clock::now();
  const int horizon = world.resolved_horizon(map);
  LearnResult out{QTable(map), Policy{}, TrainingStats{}};
  QTable& q = out.q;
  JointStepper stepper(map);
  const std::uint64_t master = rng.next_u64();
  for (std::int64_t e = 0; e < params.episodes; ++e) {
    if (out_of_time(params, t0, e)) break;
    Rng erng(derive_seed(master, {static_cast<std::uint64_t>(e)}));
    simulate_episode(map, world, horizon, q, params.explore_at(e), erng, stepper, reward_cfg, out.stats,
                     [&](std::size_t, const Transition& tr, int next) {
                       const double bootstrap = map.is_goal_index(next) ? 0.0 : params.discount * q.max_value(next);
                       double& value = q.at(tr.cell, tr.action);
                       value += params.learning_rate * (tr.reward + bootstrap - value);
                       ++out.stats.policy_updates;
                     });
  }
  out.policy = epsilon_greedy_policy(q, params.explore_end, map);
  out.stats.wall_time = std::chrono::duration<double>(Clock::now() - t0).count();
  return out;
}

LearnResult mc_train(const GridMap& map, const WorldConfig& world, const RewardConfig& reward_cfg,
                     const LearnParams& params, Rng& rng) {
  validate_inputs(map, world, reward_cfg, params);
  const auto t0 = Clock::now();
  const int horizon = world.resolved_horizon(map);
  LearnResult out{QTable(map), Policy{}, TrainingStats{}};
  QTable& q = out.q;
  ReturnsAccumulator returns(q.size());
  JointStepper stepper(map);
  std::vector<std::vector<Transition>> episode(static_cast<std::size_t>(world.n_agents));
  std::vector<double> tail;
  std::vector<std::int64_t> seen_stamp(q.size(), -1);
  std::int64_t stamp = 0;
  const std::uint64_t master = rng.next_u64();
  for (std::int64_t e = 0; e < params.episodes; ++e) {
    if (out_of_time(params, t0, e)) break;
    for (auto& ep : episode) ep.clear();
    Rng erng(derive_seed(master, {static_cast<std::uint64_t>(e)}));
    simulate_episode(map, world, horizon, q, params.explore_at(e), erng, stepper, reward_cfg, out.stats,
                     [&](std::size_t agent, const Transition& tr, int) { episode[agent].push_back(tr); });
    for (const auto& steps : episode) {
      // Discounted return from each step, then credit each (s,a) at its first occurrence.
      tail.assign(steps.size() + 1, 0.0);
      for (std::size_t k = steps.size(); k-- > 0;) tail[k] = steps[k].reward + params.discount * tail[k + 1];
      ++stamp;
      for (std::size_t k = 0; k < steps.size(); ++k) {
        const auto key = QTable::key(steps[k].cell, steps[k].action);
        if (seen_stamp[key] == stamp) continue;
        seen_stamp[key] = stamp;
        q.at(steps[k].cell, steps[k].action) = returns.add(key, tail[k]);
        ++out.stats.policy_updates;
      }
    }
  }
  out.policy = epsilon_greedy_policy(q, params.explore_end, map);
  out.stats.wall_time = std::chrono::duration<double>(Clock::now() - t0).count();
  return out;
}

std::vector<Cell> greedy_rollout(const QTable& q, const GridMap& map, Cell start, int horizon) {
  std::vector<Cell> cells{start};
  Cell cur = start;
  for (int t = 0; t < horizon && !map.is_goal(cur); ++t) {
    const Cell next = displace(cur, q.greedy(map.index(cur)));
    if (map.is_free(next)) cur = next;
    cells.push_back(cur);
  }
  return cells;
}

void write_qtable(std::ostream& out, const QTable& q, const GridMap& map) {
  char buf[128];
  for (Cell c : map.free_cells()) {
    for (Action a : kAllActions) {
      std::snprintf(buf, sizeof buf, "%d %d %s %.6f\n", c.x, c.y, action_name(a).data(), q.at(c, a));
      out << buf;
    }
  }
}

}  // namespace mapf::baselines
