// End-to-end acceptance checks; prints one PASS/FAIL line per criterion.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "mapf/baselines.hpp"
#include "mapf/bench.hpp"
#include "mapf/egt.hpp"
#include "mapf/metrics.hpp"
#include "oracles.hpp"

using namespace mapf;
using bench::Algorithm;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

int failures = 0;

void report(int id, bool ok, const std::string& detail) {
  std::printf("%s criterion %d: %s\n", ok ? "PASS" : "FAIL", id, detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// A* single-agent path length equals BFS distance on random generated maps.
void astar_matches_bfs() {
  Rng rng(101);
  int mismatches = 0;
  double plan_s = 0.0;
  for (int k = 0; k < 200; ++k) {
    const int size = 10 + static_cast<int>(rng.below(21));
    const GridMap m = bench::gen_map(size, size, 0.2, 0, 1, derive_seed(101, {static_cast<std::uint64_t>(k)}));
    const Cell start = m.starts()[rng.below(m.starts().size())];
    const auto t0 = Clock::now();
    const auto plan = baselines::astar_plan(m, std::vector<Cell>{start}, 4 * size);
    plan_s += seconds_since(t0);
    const int moves = static_cast<int>(plan.paths[0].size()) - 1;
    if (!plan.success[0] || moves != oracle::bfs_to_goal(m, start)) ++mismatches;
  }
  report(1, mismatches == 0 && plan_s < 5.0, fmt("200 single-agent plans, %d mismatches vs BFS, %.3fs", mismatches, plan_s));
}

// Prioritized multi-agent plans contain no vertex or swap conflicts.
void astar_conflict_free() {
  Rng rng(202);
  int vertex = 0, swap = 0, illegal = 0;
  for (int k = 0; k < 100; ++k) {
    const int size = 6 + static_cast<int>(rng.below(10));
    const int agents = 2 + static_cast<int>(rng.below(4));
    const GridMap m = bench::gen_map(size, size, 0.2, 0, agents, derive_seed(202, {static_cast<std::uint64_t>(k)}));
    const auto starts = sample_initial(m, agents, rng);
    const auto plan = baselines::astar_plan(m, starts, 4 * size);
    const auto c = oracle::check_paths(m, plan.paths);
    vertex += c.vertex;
    swap += c.swap;
    illegal += c.illegal;
  }
  report(2, vertex + swap + illegal == 0,
         fmt("100 plans with 2-5 agents: %d vertex, %d swap, %d illegal", vertex, swap, illegal));
}

// Tabular learners on an empty 5x5 grid recover the value-iteration greedy path.
void tabular_match_value_iteration() {
  const GridMap m = GridMap::create(5, 5, {}, {{4, 4}}, [] {
    std::vector<Cell> s;
    for (int y = 0; y < 5; ++y)
      for (int x = 0; x < 5; ++x)
        if (x != 4 || y != 4) s.push_back({x, y});
    return s;
  }());
  baselines::LearnParams params;
  params.episodes = 10000;
  const RewardConfig rc;
  const auto v = oracle::value_iteration(m, rc, params.discount);
  auto optimal_share = [&](const baselines::QTable& q) {
    int hit = 0, total = 0;
    for (Cell c : m.free_cells()) {
      if (m.is_goal(c)) continue;
      ++total;
      const int want = oracle::vi_greedy_length(m, v, rc, params.discount, c, 100);
      const int got = static_cast<int>(baselines::greedy_rollout(q, m, c, 100).size()) - 1;
      const bool reached = m.is_goal(baselines::greedy_rollout(q, m, c, 100).back());
      if (reached && got == want) ++hit;
    }
    return static_cast<double>(hit) / total;
  };
  Rng qrng(303);
  auto t0 = Clock::now();
  const auto q = baselines::q_train(m, WorldConfig{}, rc, params, qrng);
  const double q_s = seconds_since(t0);
  Rng mrng(304);
  t0 = Clock::now();
  const auto mc = baselines::mc_train(m, WorldConfig{}, rc, params, mrng);
  const double mc_s = seconds_since(t0);
  const double q_share = optimal_share(q.q), mc_share = optimal_share(mc.q);
  report(3, q_share == 1.0 && mc_share >= 0.95 && q_s < 30.0 && mc_s < 30.0,
         fmt("5x5 empty grid: qlearn optimal %.3f (%.2fs), mc optimal %.3f (%.2fs)", q_share, q_s, mc_share, mc_s));
}

// EGT on a generated 20x20 map: short paths relative to BFS and high success.
void egt_quality() {
  bench::ExperimentConfig cfg;
  cfg.algorithm = Algorithm::Egt;
  cfg.map.seed = 404;
  cfg.map.goals = 1;
  cfg.seed = 404;
  cfg.eval_episodes = 500;
  const GridMap map = bench::build_map(cfg.map, cfg.world.n_agents);
  const auto t0 = Clock::now();
  const auto out = bench::run_experiment_full(cfg, map);
  const double secs = seconds_since(t0);
  // Same evaluation stream as the run, so BFS is averaged over the starts of the same successes.
  const auto records =
      metrics::evaluate(map, cfg.world, cfg.reward, *out.policy, cfg.eval_episodes, derive_seed(cfg.seed, {2}));
  double bfs_sum = 0.0, path_sum = 0.0;
  int successes = 0;
  for (const auto& rec : records) {
    for (const auto& tau : rec.trajectories) {
      if (!tau.reached_goal) continue;
      ++successes;
      bfs_sum += oracle::bfs_to_goal(map, tau.first());
      path_sum += static_cast<double>(tau.steps.size());
    }
  }
  const double bfs_mean = successes ? bfs_sum / successes : 0.0;
  const double ratio = bfs_mean > 0 ? out.report.mean_path_length / bfs_mean : 0.0;
  const bool consistent = successes > 0 && std::abs(path_sum / successes - out.report.mean_path_length) < 1e-9;
  report(4, consistent && ratio <= 1.5 && out.report.success_rate >= 0.95 && secs < 60.0,
         fmt("20x20 egt: mean path %.2f vs BFS %.2f (ratio %.3f), success %.3f, %.1fs", out.report.mean_path_length,
             bfs_mean, ratio, out.report.success_rate, secs));
}

// With matched episode counts EGT modifies its policy far less often than Monte Carlo.
void egt_update_sparsity() {
  bench::ExperimentConfig cfg;
  cfg.map.width = cfg.map.height = 50;
  cfg.map.seed = 505;
  cfg.seed = 505;
  cfg.eval_episodes = 20;
  cfg.egt.episodes = 20000;
  cfg.learn.episodes = 20000;
  const GridMap map = bench::build_map(cfg.map, cfg.world.n_agents);
  cfg.algorithm = Algorithm::Egt;
  const auto egt_out = bench::run_experiment_full(cfg, map);
  cfg.algorithm = Algorithm::MonteCarlo;
  const auto mc_out = bench::run_experiment_full(cfg, map);
  const auto e = egt_out.report.policy_updates, m = mc_out.report.policy_updates;
  report(5, e <= 0.1 * static_cast<double>(m),
         fmt("50x50, 20000 episodes each: egt updates %lld, mc updates %lld", static_cast<long long>(e),
             static_cast<long long>(m)));
}

// The trained policy resists invasion; invading with itself changes nothing.
void ess_stability() {
  const GridMap map = bench::gen_map(20, 20, 0.2, 0, 1, 606);
  WorldConfig world;
  egt::EGTParams params;
  params.episodes = bench::episode_budget(map, 1, Algorithm::Egt);
  egt::ESSConfig ess;
  ess.p_new = 0.1;
  ess.extra_episode_fraction = 0.1;
  Rng rng(606);
  const auto r = egt::ess_test(map, world, params, RewardConfig{}, ess, rng);
  const bool main_ok = r.argmax_agreement >= 0.95 && r.fitness_after >= r.fitness_before - 0.05;

  egt::ESSConfig self = ess;
  self.invader = egt::Invader::Self;
  self.extra_episode_fraction = 0.0;
  Rng rng_self(606);
  const auto s = egt::ess_test(map, world, params, RewardConfig{}, self, rng_self);
  const bool self_ok = s.argmax_agreement == 1.0 && s.extra_episodes == 0;
  report(6, main_ok && self_ok,
         fmt("uniform invader: agreement %.3f, fitness %.3f -> %.3f; self invader: agreement %.3f, extra %lld",
             r.argmax_agreement, r.fitness_before, r.fitness_after, s.argmax_agreement,
             static_cast<long long>(s.extra_episodes)));
}

// Property checks on random inputs.
void invariants() {
  Rng rng(707);
  std::vector<std::string> broken;

  // Policy rows sum to one.
  double worst_sum = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const int w = 2 + static_cast<int>(rng.below(8)), h = 2 + static_cast<int>(rng.below(8));
    const GridMap m = bench::gen_map(w, h, 0.15, 0, 1, derive_seed(707, {static_cast<std::uint64_t>(trial)}));
    egt::CounterTable table(m);
    for (Cell c : m.free_cells()) {
      for (int a = 0; a < kNumActions; ++a) {
        if (rng.bernoulli(0.5)) table.set(c, action_at(a), static_cast<std::int64_t>(rng.below(41)) - 20);
      }
    }
    const auto policy = egt::construct_policy(table, rng.uniform01() * 0.5, m);
    for (Cell c : m.free_cells()) {
      double sum = 0.0;
      for (double p : policy.at(c)) {
        if (p < 0.0) broken.push_back("negative probability");
        sum += p;
      }
      worst_sum = std::max(worst_sum, std::abs(sum - 1.0));
    }
  }
  if (worst_sum > 1e-9) broken.push_back(fmt("policy row sum off by %.3g", worst_sum));

  // Update probability stays in [0, 1].
  const egt::EGTParams params;
  for (int k = 0; k < 100000; ++k) {
    const double u = 1.0 + rng.uniform01() * 20.0;
    const double p = egt::update_probability(u, params);
    if (!(p >= 0.0 && p <= 1.0)) {
      broken.push_back(fmt("update probability %.6f at u=%.6f", p, u));
      break;
    }
  }

  // Fitness of a goal-reaching walk is at least 1.
  const GridMap open = GridMap::create(12, 12, {}, {{11, 11}}, {{0, 0}});
  int fitness_fail = 0;
  for (int k = 0; k < 2000; ++k) {
    Trajectory tau;
    Cell c{static_cast<int>(rng.below(11)), static_cast<int>(rng.below(11))};
    for (int t = 0; t < 2000 && c != Cell{11, 11}; ++t) {
      Action a = action_at(static_cast<int>(rng.below(5)));
      if (rng.bernoulli(0.5)) a = c.x < 11 ? Action::Right : Action::Down;
      tau.steps.push_back({c, a});
      const Cell n = displace(c, a);
      if (open.is_free(n)) c = n;
    }
    tau.final = c;
    tau.reached_goal = c == Cell{11, 11};
    if (tau.reached_goal && egt::fitness(tau) < 1.0) ++fitness_fail;
  }
  if (fitness_fail) broken.push_back(fmt("%d walks with fitness below 1", fitness_fail));

  // Reward is positive exactly when the goal is entered.
  const RewardConfig rc;
  int reward_fail = 0;
  for (int k = 0; k < 10000; ++k) {
    const Cell s = open.free_cells()[rng.below(open.free_cells().size())];
    if (open.is_goal(s)) continue;
    const Action a = action_at(static_cast<int>(rng.below(5)));
    const auto out = step(open, std::vector<Cell>{s}, std::vector<Action>{a}, 0.0, rng);
    const double r = reward(s, a, out.next_cells[0], open, out.events[0] & event::kBlockedByMap, rc);
    if ((r > 0.0) != open.is_goal(out.next_cells[0])) ++reward_fail;
  }
  if (reward_fail) broken.push_back(fmt("%d reward sign violations", reward_fail));

  // Minimum hazard distance agrees with exhaustive scan.
  int dist_fail = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int w = 2 + static_cast<int>(rng.below(9)), h = 2 + static_cast<int>(rng.below(9));
    std::vector<Cell> obstacles;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        if ((x || y) && rng.bernoulli(0.15)) obstacles.push_back({x, y});
    const GridMap m = GridMap::create(w, h, obstacles, {{0, 0}}, {{0, 0}});
    const auto& free = m.free_cells();
    Trajectory tau;
    const int len = 1 + static_cast<int>(rng.below(6));
    for (int t = 0; t + 1 < len; ++t) tau.steps.push_back({free[rng.below(free.size())], Action::Stay});
    tau.final = free[rng.below(free.size())];
    int want = std::numeric_limits<int>::max();
    for (std::size_t t = 0; t < tau.length(); ++t) want = std::min(want, oracle::hazard_distance(m, tau.cell_at(t)));
    if (metrics::min_obstacle_distance(tau, m, {}) != want) ++dist_fail;
  }
  if (dist_fail) broken.push_back(fmt("%d hazard distance mismatches", dist_fail));

  std::string detail = "normalization, update probability, fitness, reward sign, hazard distance";
  for (const auto& b : broken) detail += "; " + b;
  report(7, broken.empty(), detail);
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// A grid sweep run twice with one thread is byte-identical, through the library and the CLI.
void sweep_determinism() {
  bench::ExperimentConfig cfg;
  cfg.threads = 1;
  cfg.timings = false;
  bench::SweepSpec spec;
  spec.values = {10, 20};
  spec.algorithms = cfg.sweep_algorithms;
  const auto a = bench::run_sweep(spec, cfg), b = bench::run_sweep(spec, cfg);
  const bool lib_ok = a.csv == b.csv && a.summary_csv == b.summary_csv;

  const std::string base = "acceptance_sweep_";
  bool cli_ok = true;
  for (int i = 0; i < 2; ++i) {
    const std::string cmd = std::string(MAPF_BENCH_PATH) +
                            " sweep-grid --seed 1 --threads 1 --set sweep.sizes=10,20 --set timings=false --out " +
                            base + std::to_string(i) + ".csv";
    cli_ok = cli_ok && std::system(cmd.c_str()) == 0;
  }
  const std::string c0 = slurp(base + "0.csv"), c1 = slurp(base + "1.csv");
  cli_ok = cli_ok && !c0.empty() && c0 == c1;
  report(8, lib_ok && cli_ok,
         fmt("library sweep identical: %s; CLI sweep identical: %s (%zu bytes)", lib_ok ? "yes" : "no",
             cli_ok ? "yes" : "no", c0.size()));
}

// Scaling: paths grow with the grid, and EGT cost grows slower with agents than A*.
void scaling() {
  bench::ExperimentConfig cfg;
  cfg.threads = 1;
  bench::SweepSpec grid;
  grid.values = {20, 50, 100};
  grid.algorithms = cfg.sweep_algorithms;
  const auto gs = bench::run_sweep(grid, cfg);
  std::map<Algorithm, std::vector<double>> paths;
  bool rows_ok = true;
  for (const auto& row : gs.rows) {
    paths[row.algorithm].push_back(row.report.mean_path_length);
    rows_ok = rows_ok && row.status == "ok";
  }
  bool monotone = rows_ok;
  std::string detail;
  for (const auto& [alg, p] : paths) {
    detail += std::string(bench::algorithm_name(alg)) + " paths";
    for (std::size_t i = 0; i < p.size(); ++i) {
      detail += fmt(" %.1f", p[i]);
      if (i > 0 && p[i] < p[i - 1]) monotone = false;
    }
    detail += "; ";
  }

  bench::SweepSpec agents;
  agents.axis = bench::SweepAxis::NAgents;
  agents.values = {2, 10, 50};
  agents.algorithms = {Algorithm::AStar, Algorithm::Egt};
  const auto as = bench::run_sweep(agents, cfg);
  std::map<std::pair<Algorithm, int>, double> total;
  for (const auto& row : as.rows) {
    total[{row.algorithm, row.axis_value}] = row.report.train_time_s + row.report.run_time_s;
    rows_ok = rows_ok && row.status == "ok";
  }
  const double egt_ratio = total[{Algorithm::Egt, 50}] / total[{Algorithm::Egt, 2}];
  const double astar_ratio = total[{Algorithm::AStar, 50}] / total[{Algorithm::AStar, 2}];
  detail += fmt("time ratio 50/2 agents: egt %.2f, astar %.2f", egt_ratio, astar_ratio);
  report(9, rows_ok && monotone && egt_ratio < astar_ratio, detail);
}

}  // namespace

int main() {
  astar_matches_bfs();
  astar_conflict_free();
  tabular_match_value_iteration();
  egt_quality();
  egt_update_sparsity();
  ess_stability();
  invariants();
  sweep_determinism();
  scaling();
  std::printf("%d of 9 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
