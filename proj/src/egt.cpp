#include "mapf/egt.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "mapf/error.hpp"
#include "mapf/parallel.hpp"

namespace mapf::egt {

bool CounterTable::any_defined(int cell_index) const {
  for (Action a : kAllActions) {
    if (defined(cell_index, a)) return true;
  }
  return false;
}

void CounterTable::merge(const CounterTable& delta) {
  for (std::size_t k = 0; k < values_.size(); ++k) {
    const auto d = delta.values_[k];
    if (d == kUndefined) continue;
    auto& v = values_[k];
    v = (v == kUndefined ? 0 : v) + d;
  }
}

void EGTParams::validate() const {
  auto fail = [](const char* what) { throw Error(ErrorCode::kInvalidConfig, what); };
  if (!(eta >= 1.0 && eta <= 2.0)) fail("egt.eta must lie in [1,2]");
  if (!(alpha > 1.0)) fail("egt.alpha must exceed 1");
  if (!(beta >= 1.0)) fail("egt.beta must be at least 1");
  if (nu < 1) fail("egt.nu must be a positive integer");
  if (mu < 1) fail("egt.mu must be a positive integer");
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) fail("egt.epsilon must lie in [0,1]");
  if (episodes < 0) fail("egt.episodes must be non-negative");
  if (reconstruct_interval < 1) fail("egt.reconstruct_interval must be positive");
  if (threads < 1) fail("threads must be positive");
}

double fitness(const Trajectory& tau) {
  const auto steps = tau.steps.size();
  if (steps == 0) return 1.0;
  const int d = manhattan(tau.first(), tau.final);
  if (d == 0) return kWorstFitness;
  return static_cast<double>(steps) / static_cast<double>(d);
}

double update_probability(double u, const EGTParams& params) {
  if (u <= params.eta) return 1.0 - std::pow(u - 1.0, params.alpha);
  return 1.0 / u;
}

UpdateResult apply_update(CounterTable& table, const Trajectory& tau, const EGTParams& params, Rng& rng) {
  const double u = fitness(tau);
  std::int64_t delta = 0;
  if (tau.reached_goal) {
    if (rng.uniform01() < update_probability(u, params)) delta = params.nu;
  } else if (u >= params.beta) {
    delta = -params.mu;
  }
  if (delta == 0 || tau.steps.empty()) return {};

  std::vector<std::int64_t> keys;
  keys.reserve(tau.steps.size());
  const int width = table.width();
  for (const auto& step : tau.steps) {
    keys.push_back(static_cast<std::int64_t>(step.cell.y * width + step.cell.x) * kNumActions + index_of(step.action));
  }
  std::sort(keys.begin(), keys.end());
  keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
  for (auto k : keys) table.add(static_cast<int>(k / kNumActions), action_at(static_cast<int>(k % kNumActions)), delta);
  return {true, static_cast<std::int64_t>(keys.size())};
}

Policy construct_policy(const CounterTable& table, double epsilon, const GridMap& map) {
  Policy policy = Policy::uniform(map);
  const double explore = epsilon / kNumActions;
  for (Cell c : map.free_cells()) {
    const int idx = map.index(c);
    double sum = 0.0;
    ActionProbs counts{};
    for (int a = 0; a < kNumActions; ++a) {
      const auto v = table.value_or(idx, action_at(a), 0);
      if (v > 0) {
        counts[a] = static_cast<double>(v);
        sum += counts[a];
      }
    }
    if (sum <= 0.0) continue;  // untouched or all non-positive: uniform
    auto& p = policy.at(idx);
    for (int a = 0; a < kNumActions; ++a) p[a] = (1.0 - epsilon) * (counts[a] / sum) + explore;
  }
  return policy;
}

std::map<Cell, Action> greedy_action_map(const CounterTable& table) {
  std::map<Cell, Action> out;
  for (int y = 0; y < table.height(); ++y) {
    for (int x = 0; x < table.width(); ++x) {
      const int idx = y * table.width() + x;
      std::optional<std::int64_t> best;
      Action best_action = Action::Up;
      for (Action a : kAllActions) {
        if (!table.defined(idx, a)) continue;
        const auto v = table.value_or(idx, a, 0);
        if (!best || v > *best) {
          best = v;
          best_action = a;
        }
      }
      if (best) out.emplace(Cell{x, y}, best_action);
    }
  }
  return out;
}

namespace {

using Clock = std::chrono::steady_clock;

struct EpisodeScratch {
  explicit EpisodeScratch(const GridMap& map) : stepper(map) {}
  JointStepper stepper;
  std::vector<Trajectory> trajectories;
  std::vector<std::uint8_t> active, events;
  std::vector<Action> actions, applied;
};

// One training episode. behavior == nullptr means the uniform policy over all five
// actions. Updates go to `sink`; with a fixed behavior policy they commute, so sinks
// may be per-thread delta tables.
void run_episode(const GridMap& map, const WorldConfig& world, int horizon, const Policy* behavior,
                 const EGTParams& params, Rng& rng, CounterTable& sink, TrainingStats& stats, EpisodeScratch& s) {
  const auto n = static_cast<std::size_t>(world.n_agents);
  const auto starts = sample_initial(map, world.n_agents, rng);
  s.stepper.reset(starts);
  s.trajectories.resize(n);
  s.active.assign(n, 1);
  s.events.assign(n, 0);
  s.actions.assign(n, Action::Stay);
  s.applied.assign(n, Action::Stay);
  std::size_t n_active = n;
  for (std::size_t i = 0; i < n; ++i) {
    s.trajectories[i].steps.clear();
    s.trajectories[i].reached_goal = false;
    if (map.is_goal(starts[i])) {
      s.active[i] = 0;
      --n_active;
    }
  }

  auto submit = [&](std::size_t i, bool reached) {
    auto& tau = s.trajectories[i];
    tau.final = s.stepper.cells()[i];
    tau.reached_goal = reached;
    if (apply_update(sink, tau, params, rng).modified) ++stats.policy_updates;
  };

  for (int t = 0; t < horizon && n_active > 0; ++t) {
    const auto cells = s.stepper.cells();
    for (std::size_t i = 0; i < n; ++i) {
      if (!s.active[i]) continue;
      const int idx = map.index(cells[i]);
      s.actions[i] = behavior ? behavior->sample(idx, rng) : action_at(static_cast<int>(rng.below(kNumActions)));
      s.trajectories[i].steps.push_back({cells[i], s.actions[i]});
    }
    s.stepper.advance(s.actions, world.action_noise, rng, s.active, s.events, s.applied);
    for (std::size_t i = 0; i < n; ++i) {
      if (s.active[i] && (s.events[i] & event::kReachedGoal)) {
        s.active[i] = 0;
        --n_active;
        ++stats.goal_reach_count;
        submit(i, true);
      }
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (s.active[i]) submit(i, false);
  }
  ++stats.episodes_run;
}

void add_stats(TrainingStats& into, const TrainingStats& from) {
  into.episodes_run += from.episodes_run;
  into.policy_updates += from.policy_updates;
  into.goal_reach_count += from.goal_reach_count;
}

// Training state shared by train() and ess_test(): the table plus the episode cursor.
class Trainer {
 public:
  Trainer(const GridMap& map, const WorldConfig& world, const EGTParams& params, std::uint64_t master)
      : map_(map), world_(world), params_(params), master_(master), horizon_(world.resolved_horizon(map)), table_(map) {}

  // Chooses the behavior policy for episode e given the refreshed trained policy.
  // Returns nullptr for the uniform random policy.
  template <typename Chooser>
  void run(std::int64_t count, bool refresh, Chooser&& choose) {
    const std::int64_t end = cursor_ + count;
    while (cursor_ < end) {
      const std::int64_t chunk_end = std::min(end, cursor_ + params_.reconstruct_interval);
      const Policy trained = refresh ? construct_policy(table_, params_.epsilon, map_) : Policy{};
      run_chunk(cursor_, chunk_end, [&](std::int64_t e) { return choose(e, refresh ? &trained : nullptr); });
      cursor_ = chunk_end;
    }
  }

  CounterTable& table() { return table_; }
  TrainingStats& stats() { return stats_; }
  std::uint64_t master() const { return master_; }
  std::int64_t cursor() const { return cursor_; }

 private:
  template <typename Behavior>
  void run_chunk(std::int64_t first, std::int64_t last, Behavior&& behavior_for) {
    const auto n = static_cast<std::size_t>(last - first);
    const auto workers = static_cast<std::size_t>(std::min<std::int64_t>(params_.threads, last - first));
    if (workers <= 1) {
      EpisodeScratch scratch(map_);
      for (std::int64_t e = first; e < last; ++e) {
        Rng rng(derive_seed(master_, {static_cast<std::uint64_t>(e)}));
        run_episode(map_, world_, horizon_, behavior_for(e), params_, rng, table_, stats_, scratch);
      }
      return;
    }
    std::vector<CounterTable> deltas(workers, CounterTable(map_));
    std::vector<TrainingStats> partial(workers);
    parallel_for(workers, static_cast<int>(workers), [&](std::size_t w) {
      EpisodeScratch scratch(map_);
      const std::size_t lo = n * w / workers, hi = n * (w + 1) / workers;
      for (std::size_t k = lo; k < hi; ++k) {
        const std::int64_t e = first + static_cast<std::int64_t>(k);
        Rng rng(derive_seed(master_, {static_cast<std::uint64_t>(e)}));
        run_episode(map_, world_, horizon_, behavior_for(e), params_, rng, deltas[w], partial[w], scratch);
      }
    });
    for (std::size_t w = 0; w < workers; ++w) {
      table_.merge(deltas[w]);
      add_stats(stats_, partial[w]);
    }
  }

  const GridMap& map_;
  const WorldConfig& world_;
  const EGTParams& params_;
  std::uint64_t master_;
  int horizon_;
  CounterTable table_;
  TrainingStats stats_;
  std::int64_t cursor_ = 0;
};

void run_training_phase(Trainer& trainer, const EGTParams& params) {
  const bool iterative = params.behavior_mode == BehaviorMode::Iterative;
  trainer.run(params.episodes, iterative, [](std::int64_t, const Policy* trained) { return trained; });
}

void validate_all(const GridMap& map, const WorldConfig& world, const EGTParams& params, const RewardConfig& reward_cfg) {
  world.validate();
  params.validate();
  reward_cfg.validate();
  if (static_cast<std::size_t>(world.n_agents) > map.starts().size()) {
    throw Error(ErrorCode::kCapacity, "more agents than start cells");
  }
}

}  // namespace

TrainResult train(const GridMap& map, const WorldConfig& world, const EGTParams& params, const RewardConfig& reward_cfg,
                  Rng& rng) {
  validate_all(map, world, params, reward_cfg);
  const auto t0 = Clock::now();
  Trainer trainer(map, world, params, rng.next_u64());
  run_training_phase(trainer, params);
  TrainResult out{construct_policy(trainer.table(), params.epsilon, map), std::move(trainer.table()), trainer.stats()};
  out.stats.wall_time = std::chrono::duration<double>(Clock::now() - t0).count();
  return out;
}

double mean_stretch(const std::vector<metrics::EpisodeRecord>& records, int horizon) {
  double sum = 0.0;
  std::int64_t count = 0;
  for (const auto& rec : records) {
    for (const auto& tau : rec.trajectories) {
      sum += std::min(fitness(tau), static_cast<double>(horizon));
      ++count;
    }
  }
  return count == 0 ? 1.0 : sum / static_cast<double>(count);
}

ESSReport ess_test(const GridMap& map, const WorldConfig& world, const EGTParams& params, const RewardConfig& reward_cfg,
                   const ESSConfig& ess, Rng& rng) {
  validate_all(map, world, params, reward_cfg);
  if (!(ess.p_new >= 0.0 && ess.p_new <= 1.0)) throw Error(ErrorCode::kInvalidConfig, "p_new must lie in [0,1]");
  if (!(ess.extra_episode_fraction >= 0.0)) throw Error(ErrorCode::kInvalidConfig, "extra episode fraction must be >= 0");
  if (ess.eval_episodes < 1) throw Error(ErrorCode::kInvalidConfig, "ESS evaluation needs at least one episode");

  const int horizon = world.resolved_horizon(map);
  Trainer trainer(map, world, params, rng.next_u64());
  run_training_phase(trainer, params);

  const std::uint64_t eval_seed = derive_seed(trainer.master(), {0xE5A1u});
  auto evaluate_fitness = [&](const CounterTable& table) {
    const Policy policy = construct_policy(table, params.epsilon, map);
    const auto records = metrics::evaluate(map, world, reward_cfg, policy, ess.eval_episodes, eval_seed, params.threads);
    return -mean_stretch(records, horizon);
  };

  ESSReport report;
  report.p_new = ess.p_new;
  const auto greedy_before = greedy_action_map(trainer.table());
  report.fitness_before = evaluate_fitness(trainer.table());

  report.extra_episodes = std::llround(ess.extra_episode_fraction * static_cast<double>(params.episodes));
  const bool uniform_invader = ess.invader == Invader::UniformRandom;
  const std::uint64_t master = trainer.master();
  trainer.run(report.extra_episodes, true, [&](std::int64_t e, const Policy* trained) -> const Policy* {
    if (!uniform_invader) return trained;
    Rng pick(derive_seed(master, {static_cast<std::uint64_t>(e), 0x1117u}));
    return pick.bernoulli(ess.p_new) ? nullptr : trained;
  });

  const auto greedy_after = greedy_action_map(trainer.table());
  report.fitness_after = evaluate_fitness(trainer.table());

  std::int64_t same = 0, compared = 0;
  for (const auto& [cell, action] : greedy_before) {
    const auto it = greedy_after.find(cell);
    if (it == greedy_after.end()) continue;
    ++compared;
    if (it->second == action) ++same;
  }
  report.compared_states = compared;
  report.argmax_agreement = compared == 0 ? 1.0 : static_cast<double>(same) / static_cast<double>(compared);
  report.is_ess = report.argmax_agreement >= ess.agreement_threshold &&
                  report.fitness_after >= report.fitness_before - ess.fitness_tolerance;
  return report;
}

void write_counters(std::ostream& out, const CounterTable& table) {
  std::vector<std::string> lines;
  for (int y = 0; y < table.height(); ++y) {
    for (int x = 0; x < table.width(); ++x) {
      for (Action a : kAllActions) {
        if (const auto v = table.get({x, y}, a)) {
          lines.push_back(std::to_string(x) + " " + std::to_string(y) + " " + std::string(action_name(a)) + " " +
                          std::to_string(*v));
        }
      }
    }
  }
  std::sort(lines.begin(), lines.end());
  for (const auto& l : lines) out << l << '\n';
}

CounterTable read_counters(std::istream& in, const GridMap& map) {
  CounterTable table(map);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    Cell c;
    std::string name;
    std::int64_t value;
    if (!(ls >> c.x >> c.y >> name >> value)) {
      throw Error(ErrorCode::kParse, "counter snapshot line " + std::to_string(line_no) + " is malformed");
    }
    const auto a = parse_action(name);
    if (!a || !map.is_free(c)) {
      throw Error(ErrorCode::kParse, "counter snapshot line " + std::to_string(line_no) + " names an invalid entry");
    }
    table.set(c, *a, value);
  }
  return table;
}

}  // namespace mapf::egt
