#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "fixtures.hpp"
#include "mapf/baselines.hpp"
#include "mapf/bench.hpp"
#include "mapf/error.hpp"
#include "oracles.hpp"

using namespace mapf;
using baselines::LearnParams;
using baselines::QTable;

namespace {

int path_moves(const std::vector<Cell>& p) { return static_cast<int>(p.size()) - 1; }

// The single nonzero entry of a table, as (cell index, action, value).
struct Entry {
  int cell = -1;
  Action action = Action::Stay;
  double value = 0.0;
  int nonzero = 0;
};

Entry only_entry(const QTable& q, const GridMap& m) {
  Entry e;
  for (int i = 0; i < m.area(); ++i) {
    for (Action a : kAllActions) {
      if (q.at(i, a) != 0.0) {
        e = {i, a, q.at(i, a), e.nonzero + 1};
      }
    }
  }
  return e;
}

}  // namespace

TEST(AStar, OpenGridCornerToCorner) {
  const GridMap m = fixture::open_map(5, 5, {4, 4});
  const std::vector<Cell> starts{{0, 0}};
  const auto plan = baselines::astar_plan(m, starts, 20);
  ASSERT_TRUE(plan.success[0]);
  EXPECT_EQ(plan.paths[0].size(), 9u);
  EXPECT_EQ(plan.paths[0].front(), (Cell{0, 0}));
  EXPECT_EQ(plan.paths[0].back(), (Cell{4, 4}));
}

TEST(AStar, WallDetourMatchesBfs) {
  const GridMap m = parse_map(
      "S....\n"
      "####.\n"
      ".....\n"
      ".####\n"
      "....G\n");
  const std::vector<Cell> starts{{0, 0}};
  const auto plan = baselines::astar_plan(m, starts, 40);
  ASSERT_TRUE(plan.success[0]);
  EXPECT_EQ(path_moves(plan.paths[0]), oracle::bfs_to_goal(m, {0, 0}));
  EXPECT_EQ(path_moves(plan.paths[0]), 16);
  EXPECT_EQ(oracle::check_paths(m, plan.paths).illegal, 0);
}

TEST(AStar, RandomSingleAgentMatchesBfs) {
  for (std::uint64_t seed = 1; seed <= 60; ++seed) {
    const GridMap m = bench::gen_map(8 + static_cast<int>(seed % 9), 8 + static_cast<int>(seed % 5), 0.25, 0, 1, seed);
    Rng rng(seed);
    const Cell s = m.starts()[rng.below(m.starts().size())];
    const std::vector<Cell> starts{s};
    const auto plan = baselines::astar_plan(m, starts, 4 * std::max(m.width(), m.height()));
    ASSERT_TRUE(plan.success[0] || m.is_goal(s));
    EXPECT_EQ(path_moves(plan.paths[0]), oracle::bfs_to_goal(m, s)) << "seed " << seed;
  }
}

TEST(AStar, CorridorWithPocketMatchesJointSpaceMakespan) {
  // Agent 0 must pass agent 1 to reach the pocket goal; agent 1 steps aside to the far goal.
  const GridMap m = parse_map(
      "###G###\n"
      "S.S...G\n");
  const std::vector<Cell> starts{{0, 1}, {2, 1}};
  const auto plan = baselines::astar_plan(m, starts, 28);
  ASSERT_TRUE(plan.success[0] && plan.success[1]);
  const int makespan = std::max(path_moves(plan.paths[0]), path_moves(plan.paths[1]));
  EXPECT_EQ(makespan, oracle::joint_makespan(m, starts[0], starts[1], 28));
  const auto conflicts = oracle::check_paths(m, plan.paths);
  EXPECT_EQ(conflicts.vertex + conflicts.swap + conflicts.illegal, 0);
}

TEST(AStar, FuzzedMultiAgentPlansAreConflictFree) {
  for (std::uint64_t seed = 1; seed <= 150; ++seed) {
    Rng rng(seed);
    const int n = 2 + static_cast<int>(rng.below(4));
    const int w = 5 + static_cast<int>(rng.below(8)), h = 5 + static_cast<int>(rng.below(8));
    const GridMap m = bench::gen_map(w, h, 0.2 + 0.1 * rng.uniform01(), 0, n, seed);
    const auto starts = sample_initial(m, n, rng);
    const auto plan = baselines::astar_plan(m, starts, 4 * std::max(w, h));
    const auto c = oracle::check_paths(m, plan.paths);
    EXPECT_EQ(c.vertex, 0) << "seed " << seed;
    EXPECT_EQ(c.swap, 0) << "seed " << seed;
    EXPECT_EQ(c.illegal, 0) << "seed " << seed;
    for (std::size_t i = 0; i < starts.size(); ++i) {
      EXPECT_EQ(plan.paths[i].front(), starts[i]);
      EXPECT_EQ(bool(plan.success[i]), m.is_goal(plan.paths[i].back()));
    }
  }
}

TEST(AStar, InvalidStarts) {
  const GridMap m = parse_map("S#.\n..G\n");
  EXPECT_THROW(baselines::astar_plan(m, std::vector<Cell>{{1, 0}}, 10), Error);
  EXPECT_THROW(baselines::astar_plan(m, std::vector<Cell>{{0, 0}, {0, 0}}, 10), Error);
  // Unreachable within the horizon is a failed agent, not an error.
  const auto plan = baselines::astar_plan(m, std::vector<Cell>{{0, 0}}, 2);
  EXPECT_FALSE(plan.success[0]);
}

TEST(QLearning, SingleUpdateFromZeroTable) {
  const GridMap m = parse_map("S.G\n");
  WorldConfig world;
  world.horizon = 1;
  LearnParams p;
  p.learning_rate = 0.5;
  p.discount = 0.9;
  p.episodes = 1;
  bool saw_ordinary = false;
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    Rng rng(seed);
    const auto r = baselines::q_train(m, world, RewardConfig{}, p, rng);
    EXPECT_EQ(r.stats.policy_updates, 1);
    const Entry e = only_entry(r.q, m);
    ASSERT_EQ(e.nonzero, 1);
    const bool blocked = !permissible_actions(m, {0, 0}).contains(e.action);
    EXPECT_DOUBLE_EQ(e.value, blocked ? -2.5 : -0.5);
    saw_ordinary |= !blocked;
  }
  EXPECT_TRUE(saw_ordinary);
}

TEST(QLearning, TerminalTransitionHasNoBootstrap) {
  const GridMap m = parse_map("SG\n");
  WorldConfig world;
  world.horizon = 1;
  for (double gamma : {0.0, 0.5, 1.0}) {
    LearnParams p;
    p.learning_rate = 1.0;
    p.discount = gamma;
    p.episodes = 200;
    p.explore_start = p.explore_end = 1.0;
    Rng rng(5);
    const auto r = baselines::q_train(m, world, RewardConfig{}, p, rng);
    EXPECT_DOUBLE_EQ(r.q.at(Cell{0, 0}, Action::Right), 100.0);
    EXPECT_EQ(r.q.at(Cell{1, 0}, Action::Stay), 0.0);  // goal cells are never updated
  }
}

TEST(QLearning, OptimalTableIsAFixedPoint) {
  // On a 3x3 instance the value-iteration Q* has zero TD error for every transition the
  // library's stepping and reward functions produce.
  const GridMap m = parse_map("S..\n.#.\n..G\n");
  const RewardConfig rc;
  const double gamma = 0.9;
  const auto v = oracle::value_iteration(m, rc, gamma, 1e-12);
  Rng rng(6);
  double worst = 0.0;
  for (int k = 0; k < 5000; ++k) {
    Cell s = m.free_cells()[rng.below(m.free_cells().size())];
    if (m.is_goal(s)) continue;
    const Action a = action_at(static_cast<int>(rng.below(5)));
    const auto out = step(m, std::vector<Cell>{s}, std::vector<Action>{a}, 0.0, rng);
    const Cell next = out.next_cells[0];
    const double r = reward(s, a, next, m, out.events[0] & event::kBlockedByMap, rc);
    const double q_sa = r + (m.is_goal(next) ? 0.0 : gamma * v[m.index(next)]);
    // max_a Q*(s,a) = V*(s); TD error of the greedy action is zero, others are <= 0.
    const double td = q_sa - v[m.index(s)];
    EXPECT_LE(td, 1e-9);
    worst = std::max(worst, td);
  }
  EXPECT_NEAR(worst, 0.0, 1e-9);
}

TEST(QLearning, ConvergesToValueIterationOnSmallMap) {
  const GridMap m = parse_map("SSSS\nS##S\nSSSS\nS#SG\n");
  LearnParams p;
  p.episodes = 6000;
  Rng rng(8);
  const auto r = baselines::q_train(m, WorldConfig{}, RewardConfig{}, p, rng);
  const auto v = oracle::value_iteration(m, RewardConfig{}, p.discount);
  for (Cell c : m.free_cells()) {
    const int want = oracle::vi_greedy_length(m, v, RewardConfig{}, p.discount, c, 50);
    const auto path = baselines::greedy_rollout(r.q, m, c, 50);
    EXPECT_EQ(path_moves(path), want) << "from (" << c.x << "," << c.y << ")";
    EXPECT_EQ(want, oracle::bfs_to_goal(m, c));
  }
}

TEST(MonteCarlo, FirstVisitAverages) {
  baselines::ReturnsAccumulator acc(4);
  EXPECT_DOUBLE_EQ(acc.add(2, 4.0), 4.0);
  EXPECT_DOUBLE_EQ(acc.add(2, 8.0), 6.0);
  EXPECT_EQ(acc.count(2), 2);
  EXPECT_EQ(acc.count(0), 0);
}

TEST(MonteCarlo, AccumulatorMatchesArithmeticMean) {
  Rng rng(10);
  for (int trial = 0; trial < 200; ++trial) {
    baselines::ReturnsAccumulator acc(1);
    const int k = 1 + static_cast<int>(rng.below(500));
    std::vector<double> xs;
    double last = 0.0;
    for (int i = 0; i < k; ++i) {
      xs.push_back(std::round((rng.uniform01() * 200.0 - 100.0) * 8.0) / 8.0);  // dyadic: sums are exact
      last = acc.add(0, xs.back());
    }
    double s = 0.0;
    for (double x : xs) s += x;
    EXPECT_DOUBLE_EQ(last, s / k);
    EXPECT_DOUBLE_EQ(acc.average(0), s / k);
  }
}

TEST(MonteCarlo, SingleEpisodeEstimateIsItsReturn) {
  const GridMap m = parse_map("S.G\n");
  WorldConfig world;
  world.horizon = 1;
  LearnParams p;
  p.episodes = 1;
  Rng rng(3);
  const auto r = baselines::mc_train(m, world, RewardConfig{}, p, rng);
  const Entry e = only_entry(r.q, m);
  ASSERT_EQ(e.nonzero, 1);
  const bool blocked = !permissible_actions(m, {0, 0}).contains(e.action);
  EXPECT_DOUBLE_EQ(e.value, blocked ? -5.0 : -1.0);
  EXPECT_EQ(r.stats.policy_updates, 1);
}

TEST(MonteCarlo, ConvergesOnSmallMap) {
  const GridMap m = fixture::open_map(4, 4, {3, 3});
  LearnParams p;
  p.episodes = 8000;
  Rng rng(11);
  const auto r = baselines::mc_train(m, WorldConfig{}, RewardConfig{}, p, rng);
  int optimal = 0;
  for (Cell c : m.free_cells()) optimal += path_moves(baselines::greedy_rollout(r.q, m, c, 30)) == oracle::bfs_to_goal(m, c);
  EXPECT_GE(optimal, static_cast<int>(0.9 * m.free_cells().size()));
}

TEST(Learners, SeedDeterministic) {
  const GridMap m = parse_map("S...S\n.#.#.\n..G..\n");
  WorldConfig world;
  world.n_agents = 2;
  LearnParams p;
  p.episodes = 400;
  for (auto train : {&baselines::q_train, &baselines::mc_train}) {
    Rng a(77), b(77);
    const auto ra = train(m, world, RewardConfig{}, p, a);
    const auto rb = train(m, world, RewardConfig{}, p, b);
    EXPECT_EQ(ra.q, rb.q);
    EXPECT_EQ(ra.policy, rb.policy);
    EXPECT_EQ(ra.stats.policy_updates, rb.stats.policy_updates);
  }
}

TEST(Learners, EpsilonGreedyExtraction) {
  const GridMap m = fixture::open_map(3, 2, {2, 1});
  QTable q(m);
  q.at(m.index({0, 0}), Action::Right) = 5.0;
  const Policy pol = baselines::epsilon_greedy_policy(q, 0.1, m);
  EXPECT_NEAR(pol.at(Cell{0, 0})[index_of(Action::Right)], 0.92, 1e-12);
  EXPECT_NEAR(pol.at(Cell{0, 0})[index_of(Action::Up)], 0.02, 1e-12);
  // All-zero row: ties go to the first action.
  EXPECT_NEAR(pol.at(Cell{1, 0})[index_of(Action::Up)], 0.92, 1e-12);
}

TEST(Snapshots, QTableAndPlanFormats) {
  const GridMap m = parse_map("SG\n");
  QTable q(m);
  q.at(0, Action::Right) = 12.3456789;
  std::ostringstream qs;
  baselines::write_qtable(qs, q, m);
  EXPECT_NE(qs.str().find("0 0 right 12.345679\n"), std::string::npos);

  baselines::PlanResult plan;
  plan.paths = {{{0, 0}, {1, 0}}};
  std::ostringstream ps;
  baselines::write_plan(ps, plan);
  EXPECT_EQ(ps.str(), "0 0 0 0\n0 1 1 0\n");
}
