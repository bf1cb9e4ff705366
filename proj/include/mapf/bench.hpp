#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mapf/baselines.hpp"
#include "mapf/egt.hpp"
#include "mapf/gridworld.hpp"
#include "mapf/metrics.hpp"

namespace mapf::bench {

enum class Algorithm { Egt, AStar, MonteCarlo, QLearning };

std::string_view algorithm_name(Algorithm a);
Algorithm parse_algorithm(std::string_view name);

struct MapSpec {
  std::string file;  // when set, the generator fields are ignored
  int width = 20;
  int height = 20;
  double density = 0.2;
  int starts = 0;  // 0: every free cell connected to a goal
  int goals = 0;   // 0: one per agent
  std::uint64_t seed = 1;
};

enum class SweepAxis { GridSize, NAgents };

struct SweepSpec {
  SweepAxis axis = SweepAxis::GridSize;
  std::vector<int> values;
  std::vector<Algorithm> algorithms;
  int repetitions = 1;
  std::string output;

  void validate() const;
};

struct ExperimentConfig {
  Algorithm algorithm = Algorithm::Egt;
  MapSpec map;
  WorldConfig world;
  RewardConfig reward;
  egt::EGTParams egt{.episodes = 0};  // 0: budget from episode_budget()
  baselines::LearnParams learn{.episodes = 0};
  int eval_episodes = 200;
  std::uint64_t seed = 1;
  int threads = 1;
  bool timings = true;

  std::vector<int> sweep_sizes = {20, 50, 100};
  std::vector<int> sweep_agents = {2, 10, 50};
  int sweep_agent_grid = 100;
  std::vector<Algorithm> sweep_algorithms = {Algorithm::AStar, Algorithm::Egt, Algorithm::MonteCarlo,
                                             Algorithm::QLearning};
  int sweep_reps = 1;

  egt::ESSConfig ess;
  std::string out;

  void validate() const;
};

/// key=value lines; '#' starts a comment; dotted keys address blocks (egt.eta=1.5).
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::string& path);
/// Applies one key=value setting; throws kInvalidConfig for unknown keys or bad values.
void apply_setting(ExperimentConfig& cfg, std::string_view key, std::string_view value);

/// Random obstacle field at the given density, goals on random free cells, starts on
/// free cells that reach a goal. Deterministic given seed; throws kGeneration when the
/// parameters cannot be satisfied within the retry budget.
GridMap gen_map(int width, int height, double density, int n_starts, int n_goals, std::uint64_t seed);

/// Resolves a map spec (file or generator). n_agents feeds the default goal count.
GridMap build_map(const MapSpec& spec, int n_agents);

/// Default training budget in agent-trajectories (200 * area for egt, 50 * area for the
/// tabular learners), spread over n_agents per episode.
std::int64_t episode_budget(const GridMap& map, int n_agents, Algorithm algorithm);

struct ExperimentOutcome {
  metrics::MetricsReport report;
  std::optional<Policy> policy;
  std::optional<egt::CounterTable> counters;
  std::optional<baselines::QTable> q;
};

/// Train (or plan) then evaluate.
ExperimentOutcome run_experiment_full(const ExperimentConfig& cfg, const GridMap& map);
metrics::MetricsReport run_experiment(const ExperimentConfig& cfg);

/// Evaluates a fixed policy.
metrics::MetricsReport evaluate_policy(const ExperimentConfig& cfg, const GridMap& map, const Policy& policy);

inline constexpr std::string_view kCsvHeader =
    "algorithm,axis,axis_value,rep,seed,mean_path_length,success_rate,min_agent_success_rate,"
    "expected_min_obstacle_distance,policy_updates,train_time_s,run_time_s,status";

inline constexpr std::string_view kSummaryHeader =
    "algorithm,axis,axis_value,reps,mean_path_length,success_rate,min_agent_success_rate,"
    "expected_min_obstacle_distance,policy_updates,train_time_s,run_time_s,total_time_s";

struct SweepRow {
  Algorithm algorithm;
  std::string axis;
  int axis_value;
  int rep;
  std::uint64_t seed;
  metrics::MetricsReport report;
  std::string status;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  std::string csv;
  std::string summary_csv;
};

SweepResult run_sweep(const SweepSpec& spec, const ExperimentConfig& base);

std::string format_row(const SweepRow& row, bool timings);

}  // namespace mapf::bench
