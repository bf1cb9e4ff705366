#include "mapf/bench.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <deque>
#include <fstream>
#include <map>
#include <sstream>

#include "mapf/error.hpp"
#include "mapf/parallel.hpp"

namespace mapf::bench {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value) {
  throw Error(ErrorCode::kInvalidConfig, "invalid value '" + std::string(value) + "' for key " + std::string(key));
}

template <typename T>
T parse_number(std::string_view key, std::string_view value) {
  T out{};
  const auto* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc{} || ptr != end) bad_value(key, value);
  return out;
}

bool parse_bool(std::string_view key, std::string_view value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  bad_value(key, value);
}

std::vector<std::string_view> split_list(std::string_view value) {
  std::vector<std::string_view> out;
  while (!value.empty()) {
    const auto comma = value.find(',');
    out.push_back(trim(value.substr(0, comma)));
    if (comma == std::string_view::npos) break;
    value.remove_prefix(comma + 1);
  }
  return out;
}

std::vector<int> parse_int_list(std::string_view key, std::string_view value) {
  std::vector<int> out;
  for (auto item : split_list(value)) out.push_back(parse_number<int>(key, item));
  return out;
}

std::uint64_t algorithm_tag(Algorithm a) { return static_cast<std::uint64_t>(a) + 1; }

int resolved_goals(const MapSpec& spec, int n_agents) { return spec.goals > 0 ? spec.goals : std::max(1, n_agents); }

}  // namespace

std::string_view algorithm_name(Algorithm a) {
  switch (a) {
    case Algorithm::Egt: return "egt";
    case Algorithm::AStar: return "astar";
    case Algorithm::MonteCarlo: return "mc";
    case Algorithm::QLearning: return "qlearn";
  }
  return "unknown";
}

Algorithm parse_algorithm(std::string_view name) {
  for (Algorithm a : {Algorithm::Egt, Algorithm::AStar, Algorithm::MonteCarlo, Algorithm::QLearning}) {
    if (algorithm_name(a) == name) return a;
  }
  throw Error(ErrorCode::kInvalidConfig, "unknown algorithm '" + std::string(name) + "'");
}

void SweepSpec::validate() const {
  if (values.empty()) throw Error(ErrorCode::kInvalidConfig, "sweep needs at least one axis value");
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] <= values[i - 1]) throw Error(ErrorCode::kInvalidConfig, "sweep axis values must be strictly increasing");
  }
  if (values.front() < 1) throw Error(ErrorCode::kInvalidConfig, "sweep axis values must be positive");
  if (algorithms.empty()) throw Error(ErrorCode::kInvalidConfig, "sweep needs at least one algorithm");
  if (repetitions < 1) throw Error(ErrorCode::kInvalidConfig, "sweep repetitions must be at least 1");
}

void ExperimentConfig::validate() const {
  if (map.file.empty()) {
    if (map.width < 1 || map.height < 1) throw Error(ErrorCode::kInvalidConfig, "map dimensions must be positive");
    if (!(map.density >= 0.0 && map.density < 1.0)) throw Error(ErrorCode::kInvalidConfig, "map.density must lie in [0,1)");
    if (map.starts < 0 || map.goals < 0) throw Error(ErrorCode::kInvalidConfig, "map start/goal counts must be >= 0");
  }
  world.validate();
  reward.validate();
  egt.validate();
  learn.validate();
  if (eval_episodes < 1) throw Error(ErrorCode::kInvalidConfig, "eval.episodes must be at least 1");
  if (threads < 1) throw Error(ErrorCode::kInvalidConfig, "threads must be at least 1");
  if (sweep_reps < 1) throw Error(ErrorCode::kInvalidConfig, "sweep.reps must be at least 1");
}

void apply_setting(ExperimentConfig& cfg, std::string_view key, std::string_view value) {
  key = trim(key);
  value = trim(value);
  auto num_i = [&] { return parse_number<int>(key, value); };
  auto num_i64 = [&] { return parse_number<std::int64_t>(key, value); };
  auto num_u64 = [&] { return parse_number<std::uint64_t>(key, value); };
  auto num_d = [&] { return parse_number<double>(key, value); };

  if (key == "algorithm") cfg.algorithm = parse_algorithm(value);
  else if (key == "seed") cfg.seed = num_u64();
  else if (key == "threads") cfg.threads = num_i();
  else if (key == "out") cfg.out = std::string(value);
  else if (key == "timings") cfg.timings = parse_bool(key, value);
  else if (key == "map.file") cfg.map.file = std::string(value);
  else if (key == "map.width") cfg.map.width = num_i();
  else if (key == "map.height") cfg.map.height = num_i();
  else if (key == "map.size") cfg.map.width = cfg.map.height = num_i();
  else if (key == "map.density") cfg.map.density = num_d();
  else if (key == "map.starts") cfg.map.starts = num_i();
  else if (key == "map.goals") cfg.map.goals = num_i();
  else if (key == "map.seed") cfg.map.seed = num_u64();
  else if (key == "world.agents") cfg.world.n_agents = num_i();
  else if (key == "world.horizon") cfg.world.horizon = num_i();
  else if (key == "world.noise") cfg.world.action_noise = num_d();
  else if (key == "reward.delta1") cfg.reward.delta1 = num_d();
  else if (key == "reward.delta2") cfg.reward.delta2 = num_d();
  else if (key == "reward.delta3") cfg.reward.delta3 = num_d();
  else if (key == "egt.eta") cfg.egt.eta = num_d();
  else if (key == "egt.alpha") cfg.egt.alpha = num_d();
  else if (key == "egt.beta") cfg.egt.beta = num_d();
  else if (key == "egt.nu") cfg.egt.nu = num_i64();
  else if (key == "egt.mu") cfg.egt.mu = num_i64();
  else if (key == "egt.epsilon") cfg.egt.epsilon = num_d();
  else if (key == "egt.episodes") cfg.egt.episodes = num_i64();
  else if (key == "egt.reconstruct_interval") cfg.egt.reconstruct_interval = num_i64();
  else if (key == "egt.behavior") {
    if (value == "faithful") cfg.egt.behavior_mode = egt::BehaviorMode::Faithful;
    else if (value == "iterative") cfg.egt.behavior_mode = egt::BehaviorMode::Iterative;
    else bad_value(key, value);
  }
  else if (key == "learn.learning_rate") cfg.learn.learning_rate = num_d();
  else if (key == "learn.discount") cfg.learn.discount = num_d();
  else if (key == "learn.explore_start") cfg.learn.explore_start = num_d();
  else if (key == "learn.explore_end") cfg.learn.explore_end = num_d();
  else if (key == "learn.explore_decay_episodes") cfg.learn.explore_decay_episodes = num_i64();
  else if (key == "learn.episodes") cfg.learn.episodes = num_i64();
  else if (key == "learn.time_budget_s") cfg.learn.time_budget_s = num_d();
  else if (key == "eval.episodes") cfg.eval_episodes = num_i();
  else if (key == "sweep.sizes") cfg.sweep_sizes = parse_int_list(key, value);
  else if (key == "sweep.agents") cfg.sweep_agents = parse_int_list(key, value);
  else if (key == "sweep.agent_grid") cfg.sweep_agent_grid = num_i();
  else if (key == "sweep.reps") cfg.sweep_reps = num_i();
  else if (key == "sweep.algorithms") {
    cfg.sweep_algorithms.clear();
    for (auto item : split_list(value)) cfg.sweep_algorithms.push_back(parse_algorithm(item));
  }
  else if (key == "ess.p_new") cfg.ess.p_new = num_d();
  else if (key == "ess.extra_fraction") cfg.ess.extra_episode_fraction = num_d();
  else if (key == "ess.eval_episodes") cfg.ess.eval_episodes = num_i();
  else if (key == "ess.agreement_threshold") cfg.ess.agreement_threshold = num_d();
  else if (key == "ess.fitness_tolerance") cfg.ess.fitness_tolerance = num_d();
  else if (key == "ess.invader") {
    if (value == "uniform") cfg.ess.invader = egt::Invader::UniformRandom;
    else if (value == "self") cfg.ess.invader = egt::Invader::Self;
    else bad_value(key, value);
  }
  else throw Error(ErrorCode::kInvalidConfig, "unknown config key '" + std::string(key) + "'");
}

ExperimentConfig parse_config(std::string_view text) {
  ExperimentConfig cfg;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorCode::kInvalidConfig, "config line " + std::to_string(line_no) + " is not key=value");
    }
    apply_setting(cfg, line.substr(0, eq), line.substr(eq + 1));
  }
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

GridMap gen_map(int width, int height, double density, int n_starts, int n_goals, std::uint64_t seed) {
  if (width < 1 || height < 1) throw Error(ErrorCode::kGeneration, "map dimensions must be positive");
  if (!(density >= 0.0 && density < 1.0)) throw Error(ErrorCode::kGeneration, "density must lie in [0,1)");
  if (n_goals < 1 || n_starts < 0) throw Error(ErrorCode::kGeneration, "need at least one goal and n_starts >= 0");
  constexpr int kRetries = 100;
  Rng rng(seed);
  const int area = width * height;
  for (int attempt = 0; attempt < kRetries; ++attempt) {
    std::vector<Cell> obstacles, free;
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        if (rng.bernoulli(density)) obstacles.push_back({x, y});
        else free.push_back({x, y});
      }
    }
    if (static_cast<int>(free.size()) < n_goals + std::max(1, n_starts)) continue;
    // Partial Fisher-Yates for the goals.
    for (int k = 0; k < n_goals; ++k) {
      const auto j = k + static_cast<std::size_t>(rng.below(free.size() - k));
      std::swap(free[k], free[j]);
    }
    std::vector<Cell> goals(free.begin(), free.begin() + n_goals);

    std::vector<int> reach(static_cast<std::size_t>(area), -1);
    std::vector<std::uint8_t> blocked(static_cast<std::size_t>(area), 0);
    for (Cell o : obstacles) blocked[o.y * width + o.x] = 1;
    std::deque<Cell> queue;
    for (Cell g : goals) {
      reach[g.y * width + g.x] = 0;
      queue.push_back(g);
    }
    while (!queue.empty()) {
      const Cell c = queue.front();
      queue.pop_front();
      for (Action a : {Action::Up, Action::Down, Action::Left, Action::Right}) {
        const Cell nb = displace(c, a);
        if (nb.x < 0 || nb.y < 0 || nb.x >= width || nb.y >= height) continue;
        const int ni = nb.y * width + nb.x;
        if (blocked[ni] || reach[ni] >= 0) continue;
        reach[ni] = reach[c.y * width + c.x] + 1;
        queue.push_back(nb);
      }
    }
    std::vector<Cell> candidates;
    for (std::size_t k = static_cast<std::size_t>(n_goals); k < free.size(); ++k) {
      if (reach[free[k].y * width + free[k].x] > 0) candidates.push_back(free[k]);
    }
    std::sort(candidates.begin(), candidates.end(), [](Cell a, Cell b) { return std::tie(a.y, a.x) < std::tie(b.y, b.x); });
    if (candidates.empty() || (n_starts > 0 && static_cast<int>(candidates.size()) < n_starts)) continue;
    std::vector<Cell> starts;
    if (n_starts == 0) {
      starts = std::move(candidates);
    } else {
      for (int k = 0; k < n_starts; ++k) {
        const auto j = k + static_cast<std::size_t>(rng.below(candidates.size() - k));
        std::swap(candidates[k], candidates[j]);
      }
      starts.assign(candidates.begin(), candidates.begin() + n_starts);
    }
    return GridMap::create(width, height, std::move(obstacles), std::move(goals), std::move(starts));
  }
  throw Error(ErrorCode::kGeneration, "could not generate a connected map within the retry budget");
}

GridMap build_map(const MapSpec& spec, int n_agents) {
  if (!spec.file.empty()) return load_map(spec.file);
  return gen_map(spec.width, spec.height, spec.density, spec.starts, resolved_goals(spec, n_agents), spec.seed);
}

std::int64_t episode_budget(const GridMap& map, int n_agents, Algorithm algorithm) {
  const std::int64_t per_cell = algorithm == Algorithm::Egt ? 200 : 50;
  const std::int64_t trajectories = per_cell * map.area();
  return (trajectories + n_agents - 1) / std::max(1, n_agents);
}

metrics::MetricsReport evaluate_policy(const ExperimentConfig& cfg, const GridMap& map, const Policy& policy) {
  const auto t0 = Clock::now();
  const auto records = metrics::evaluate(map, cfg.world, cfg.reward, policy, cfg.eval_episodes,
                                         derive_seed(cfg.seed, {2}), cfg.threads);
  return metrics::aggregate(records, TrainingStats{}, {0.0, seconds_since(t0)}, cfg.world.resolved_horizon(map));
}

ExperimentOutcome run_experiment_full(const ExperimentConfig& cfg, const GridMap& map) {
  cfg.validate();
  if (cfg.eval_episodes < 1) throw Error(ErrorCode::kEmptyInput, "evaluation needs at least one episode");
  const int horizon = cfg.world.resolved_horizon(map);
  const std::uint64_t eval_seed = derive_seed(cfg.seed, {2});
  Rng train_rng(derive_seed(cfg.seed, {1}));
  ExperimentOutcome out;

  if (cfg.algorithm == Algorithm::AStar) {
    if (static_cast<std::size_t>(cfg.world.n_agents) > map.starts().size()) {
      throw Error(ErrorCode::kCapacity, "more agents than start cells");
    }
    const auto t0 = Clock::now();
    const metrics::HazardField hazards(map);
    std::vector<metrics::EpisodeRecord> records(static_cast<std::size_t>(cfg.eval_episodes));
    parallel_for(records.size(), cfg.threads, [&](std::size_t k) {
      Rng rng(derive_seed(eval_seed, {k}));
      const auto starts = sample_initial(map, cfg.world.n_agents, rng);
      const auto plan = baselines::astar_plan(map, starts, horizon);
      records[k] = metrics::record_from_paths(map, hazards, cfg.reward, plan.paths);
    });
    out.report = metrics::aggregate(records, TrainingStats{}, {0.0, seconds_since(t0)}, horizon);
    return out;
  }

  const auto t_train = Clock::now();
  Policy policy;
  TrainingStats stats;
  if (cfg.algorithm == Algorithm::Egt) {
    auto params = cfg.egt;
    if (params.episodes == 0) params.episodes = episode_budget(map, cfg.world.n_agents, Algorithm::Egt);
    params.threads = cfg.threads;
    auto result = egt::train(map, cfg.world, params, cfg.reward, train_rng);
    policy = std::move(result.policy);
    stats = result.stats;
    out.counters = std::move(result.table);
  } else {
    auto params = cfg.learn;
    if (params.episodes == 0) params.episodes = episode_budget(map, cfg.world.n_agents, cfg.algorithm);
    auto result = cfg.algorithm == Algorithm::QLearning ? baselines::q_train(map, cfg.world, cfg.reward, params, train_rng)
                                                        : baselines::mc_train(map, cfg.world, cfg.reward, params, train_rng);
    policy = std::move(result.policy);
    stats = result.stats;
    out.q = std::move(result.q);
  }
  const double train_s = seconds_since(t_train);

  const auto t_run = Clock::now();
  const auto records = metrics::evaluate(map, cfg.world, cfg.reward, policy, cfg.eval_episodes, eval_seed, cfg.threads);
  out.report = metrics::aggregate(records, stats, {train_s, seconds_since(t_run)}, horizon);
  out.policy = std::move(policy);
  return out;
}

metrics::MetricsReport run_experiment(const ExperimentConfig& cfg) {
  const GridMap map = build_map(cfg.map, cfg.world.n_agents);
  return run_experiment_full(cfg, map).report;
}

std::string format_row(const SweepRow& row, bool timings) {
  const auto& r = row.report;
  char buf[512];
  std::snprintf(buf, sizeof buf, "%s,%s,%d,%d,%llu,%.6f,%.6f,%.6f,%.6f,%lld,%.6f,%.6f,%s",
                std::string(algorithm_name(row.algorithm)).c_str(), row.axis.c_str(), row.axis_value, row.rep,
                static_cast<unsigned long long>(row.seed), r.mean_path_length, r.success_rate,
                r.min_agent_success_rate, r.expected_min_obstacle_distance, static_cast<long long>(r.policy_updates),
                timings ? r.train_time_s : 0.0, timings ? r.run_time_s : 0.0, row.status.c_str());
  return buf;
}

SweepResult run_sweep(const SweepSpec& spec, const ExperimentConfig& base) {
  spec.validate();
  const bool grid_axis = spec.axis == SweepAxis::GridSize;
  const std::string axis_name = grid_axis ? "grid_size" : "n_agents";
  const int max_agents = *std::max_element(spec.values.begin(), spec.values.end());

  auto algorithms = spec.algorithms;
  std::sort(algorithms.begin(), algorithms.end(),
            [](Algorithm a, Algorithm b) { return algorithm_name(a) < algorithm_name(b); });
  algorithms.erase(std::unique(algorithms.begin(), algorithms.end()), algorithms.end());

  SweepResult result;
  for (Algorithm alg : algorithms) {
    for (int value : spec.values) {
      for (int rep = 0; rep < spec.repetitions; ++rep) {
        SweepRow row{alg, axis_name, value, rep, 0, {}, "ok"};
        row.seed = derive_seed(base.seed, {algorithm_tag(alg), static_cast<std::uint64_t>(value), static_cast<std::uint64_t>(rep)});
        result.rows.push_back(std::move(row));
      }
    }
  }

  // Cells run concurrently; each cell is single-threaded and fully determined by its seed.
  parallel_for(result.rows.size(), base.threads, [&](std::size_t k) {
    SweepRow& row = result.rows[k];
    ExperimentConfig cfg = base;
    cfg.algorithm = row.algorithm;
    cfg.seed = row.seed;
    cfg.threads = 1;
    if (grid_axis) {
      cfg.map.width = cfg.map.height = row.axis_value;
    } else {
      cfg.world.n_agents = row.axis_value;
      cfg.map.width = cfg.map.height = base.sweep_agent_grid;
      if (cfg.map.goals == 0) cfg.map.goals = max_agents;  // one map for the whole agent axis
    }
    // The map depends on the instance (size, repetition) only, never on the algorithm.
    const int map_key = grid_axis ? row.axis_value : base.sweep_agent_grid;
    cfg.map.seed = derive_seed(base.seed, {0x3a9u, static_cast<std::uint64_t>(map_key), static_cast<std::uint64_t>(row.rep)});
    try {
      const GridMap map = cfg.map.file.empty() ? build_map(cfg.map, cfg.world.n_agents) : load_map(cfg.map.file);
      row.report = run_experiment_full(cfg, map).report;
      if (row.report.no_successes) row.status = "no_successes";
    } catch (const Error& e) {
      row.status = "error:" + std::string(to_string(e.code()));
    }
  });

  std::string csv(kCsvHeader);
  csv += '\n';
  for (const auto& row : result.rows) csv += format_row(row, base.timings) + '\n';
  result.csv = std::move(csv);

  std::string summary(kSummaryHeader);
  summary += '\n';
  std::map<std::pair<std::string, int>, std::vector<const SweepRow*>> cells;
  for (const auto& row : result.rows) {
    if (row.status.rfind("error", 0) == 0) continue;
    cells[{std::string(algorithm_name(row.algorithm)), row.axis_value}].push_back(&row);
  }
  char buf[512];
  for (const auto& [key, rows] : cells) {
    double path = 0, succ = 0, min_succ = 0, dist = 0, updates = 0, train = 0, run = 0;
    for (const SweepRow* r : rows) {
      path += r->report.mean_path_length;
      succ += r->report.success_rate;
      min_succ += r->report.min_agent_success_rate;
      dist += r->report.expected_min_obstacle_distance;
      updates += static_cast<double>(r->report.policy_updates);
      train += base.timings ? r->report.train_time_s : 0.0;
      run += base.timings ? r->report.run_time_s : 0.0;
    }
    const double n = static_cast<double>(rows.size());
    std::snprintf(buf, sizeof buf, "%s,%s,%d,%zu,%.6f,%.6f,%.6f,%.6f,%.1f,%.6f,%.6f,%.6f\n", key.first.c_str(),
                  axis_name.c_str(), key.second, rows.size(), path / n, succ / n, min_succ / n, dist / n, updates / n,
                  train / n, run / n, (train + run) / n);
    summary += buf;
  }
  result.summary_csv = std::move(summary);
  return result;
}

}  // namespace mapf::bench
