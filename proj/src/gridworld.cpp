#include "mapf/gridworld.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <sstream>

#include "mapf/error.hpp"

namespace mapf {

namespace {

constexpr std::array<std::string_view, kNumActions> kActionNames = {"up", "down", "left", "right", "stay"};

std::string describe(Cell c) { return "(" + std::to_string(c.x) + "," + std::to_string(c.y) + ")"; }

}  // namespace

std::string_view action_name(Action a) { return kActionNames[index_of(a)]; }

std::optional<Action> parse_action(std::string_view name) {
  for (int i = 0; i < kNumActions; ++i) {
    if (kActionNames[i] == name) return action_at(i);
  }
  return std::nullopt;
}

Action ActionSet::nth(int i) const {
  for (Action a : kAllActions) {
    if (contains(a) && i-- == 0) return a;
  }
  return Action::Stay;
}

GridMap GridMap::create(int width, int height, std::vector<Cell> obstacles, std::vector<Cell> goals,
                        std::vector<Cell> starts, std::vector<double> start_probs) {
  if (width <= 0 || height <= 0) throw Error(ErrorCode::kInvalidMap, "map dimensions must be positive");
  if (goals.empty()) throw Error(ErrorCode::kEmptyGoals, "map has no goal cells");
  if (starts.empty()) throw Error(ErrorCode::kEmptyStarts, "map has no start cells");

  GridMap map;
  map.width_ = width;
  map.height_ = height;
  map.flags_.assign(static_cast<std::size_t>(width) * height, 0);

  auto mark = [&](const std::vector<Cell>& cells, std::uint8_t flag, const char* what) {
    for (Cell c : cells) {
      if (!map.in_bounds(c)) throw Error(ErrorCode::kInvalidMap, std::string(what) + " cell out of bounds " + describe(c));
      auto& f = map.flags_[map.index(c)];
      if (f & flag) throw Error(ErrorCode::kInvalidMap, std::string("duplicate ") + what + " cell " + describe(c));
      f |= flag;
    }
  };
  mark(obstacles, kObstacle, "obstacle");
  mark(goals, kGoal, "goal");
  mark(starts, kStart, "start");
  for (std::size_t i = 0; i < map.flags_.size(); ++i) {
    const auto f = map.flags_[i];
    if ((f & kObstacle) && (f & (kGoal | kStart))) {
      throw Error(ErrorCode::kInvalidMap, "obstacle overlaps a goal or start at " + describe(map.cell_at(static_cast<int>(i))));
    }
  }

  if (start_probs.empty()) {
    start_probs.assign(starts.size(), 1.0 / static_cast<double>(starts.size()));
  } else {
    map.uniform_starts_ = false;
    if (start_probs.size() != starts.size()) throw Error(ErrorCode::kInvalidMap, "start probability count mismatch");
    double sum = 0.0;
    for (double p : start_probs) {
      if (!(p >= 0.0)) throw Error(ErrorCode::kInvalidMap, "negative start probability");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw Error(ErrorCode::kInvalidMap, "start probabilities do not sum to 1");
  }

  std::sort(obstacles.begin(), obstacles.end(), [](Cell a, Cell b) { return std::tie(a.y, a.x) < std::tie(b.y, b.x); });
  std::sort(goals.begin(), goals.end(), [](Cell a, Cell b) { return std::tie(a.y, a.x) < std::tie(b.y, b.x); });
  map.obstacles_ = std::move(obstacles);
  map.goals_ = std::move(goals);
  map.starts_ = std::move(starts);
  map.start_probs_ = std::move(start_probs);
  map.start_cdf_.resize(map.start_probs_.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < map.start_probs_.size(); ++i) map.start_cdf_[i] = (acc += map.start_probs_[i]);
  for (double& c : map.start_cdf_) c /= acc;
  map.start_cdf_.back() = 1.0;

  map.permissible_.assign(map.flags_.size(), ActionSet{});
  for (int i = 0; i < map.area(); ++i) {
    if (!map.is_free_index(i)) continue;
    const Cell c = map.cell_at(i);
    map.free_cells_.push_back(c);
    ActionSet set;
    for (Action a : kAllActions) {
      if (map.is_free(displace(c, a))) set.insert(a);
    }
    map.permissible_[i] = set;
  }

  const auto dist = map.goal_distances();
  for (Cell s : map.starts_) {
    if (dist[map.index(s)] < 0) {
      throw Error(ErrorCode::kDisconnected, "start " + describe(s) + " cannot reach any goal");
    }
  }
  return map;
}

std::vector<int> GridMap::goal_distances() const {
  std::vector<int> dist(flags_.size(), -1);
  std::deque<int> queue;
  for (Cell g : goals_) {
    dist[index(g)] = 0;
    queue.push_back(index(g));
  }
  while (!queue.empty()) {
    const int cur = queue.front();
    queue.pop_front();
    const Cell c = cell_at(cur);
    for (Action a : {Action::Up, Action::Down, Action::Left, Action::Right}) {
      const Cell n = displace(c, a);
      if (!is_free(n)) continue;
      const int ni = index(n);
      if (dist[ni] >= 0) continue;
      dist[ni] = dist[cur] + 1;
      queue.push_back(ni);
    }
  }
  return dist;
}

GridMap parse_map(std::string_view text) {
  std::vector<std::string_view> rows;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    pos = end + 1;
    if (line.empty() || line.front() == ';') continue;
    rows.push_back(line);
  }
  if (rows.empty()) throw Error(ErrorCode::kInvalidMap, "map text contains no grid rows");

  const int width = static_cast<int>(rows.front().size());
  const int height = static_cast<int>(rows.size());
  std::vector<Cell> obstacles, goals, starts;
  for (int y = 0; y < height; ++y) {
    if (static_cast<int>(rows[y].size()) != width) {
      throw Error(ErrorCode::kNonRectangular, "row " + std::to_string(y) + " has length " +
                                                  std::to_string(rows[y].size()) + ", expected " + std::to_string(width));
    }
    for (int x = 0; x < width; ++x) {
      switch (rows[y][x]) {
        case '.': break;
        case '#': obstacles.push_back({x, y}); break;
        case 'S': starts.push_back({x, y}); break;
        case 'G': goals.push_back({x, y}); break;
        default:
          throw Error(ErrorCode::kUnknownCharacter,
                      std::string("unknown map character '") + rows[y][x] + "' at " + describe({x, y}));
      }
    }
  }
  return GridMap::create(width, height, std::move(obstacles), std::move(goals), std::move(starts));
}

GridMap load_map(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open map file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_map(ss.str());
}

std::string format_map(const GridMap& map) {
  std::string out;
  out.reserve(static_cast<std::size_t>(map.width() + 1) * map.height());
  for (int y = 0; y < map.height(); ++y) {
    for (int x = 0; x < map.width(); ++x) {
      const Cell c{x, y};
      if (map.is_obstacle(c)) out += '#';
      else if (map.is_goal(c)) out += 'G';
      else if (map.is_start(c)) out += 'S';
      else out += '.';
    }
    out += '\n';
  }
  return out;
}

ActionSet permissible_actions(const GridMap& map, Cell s) {
  if (!map.is_free(s)) throw Error(ErrorCode::kInvalidState, "cell " + describe(s) + " is out of bounds or an obstacle");
  return map.permissible(map.index(s));
}

void RewardConfig::validate() const {
  if (!(delta2 < delta1 && delta1 < 0.0 && 0.0 < delta3)) {
    throw Error(ErrorCode::kInvalidConfig, "rewards must satisfy delta2 < delta1 < 0 < delta3");
  }
}

void WorldConfig::validate() const {
  if (n_agents < 1) throw Error(ErrorCode::kInvalidConfig, "n_agents must be positive");
  if (horizon < 0) throw Error(ErrorCode::kInvalidConfig, "horizon must be positive (0 = auto)");
  if (!(action_noise >= 0.0 && action_noise <= 1.0)) throw Error(ErrorCode::kInvalidConfig, "action_noise must lie in [0,1]");
}

int WorldConfig::resolved_horizon(const GridMap& map) const {
  return horizon > 0 ? horizon : 4 * std::max(map.width(), map.height());
}

double reward(Cell /*s*/, Action /*a*/, Cell s_next, const GridMap& map, bool blocked_by_map, const RewardConfig& cfg) {
  if (map.is_goal(s_next)) return cfg.delta3;
  if (blocked_by_map) return cfg.delta2;
  return cfg.delta1;
}

JointStepper::JointStepper(const GridMap& map) : map_(&map), occupant_(static_cast<std::size_t>(map.area()), 0) {}

void JointStepper::clear() {
  for (Cell c : cells_) occupant_[map_->index(c)] = 0;
  cells_.clear();
}

void JointStepper::reset(std::span<const Cell> cells) {
  clear();
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const Cell c = cells[i];
    if (!map_->is_free(c)) {
      clear();
      throw Error(ErrorCode::kInvalidState, "agent cell " + describe(c) + " is out of bounds or an obstacle");
    }
    auto& occ = occupant_[map_->index(c)];
    if (occ != 0) {
      clear();
      throw Error(ErrorCode::kInvalidJointState, "two agents share cell " + describe(c));
    }
    occ = static_cast<std::int32_t>(i + 1);
    cells_.push_back(c);
  }
}

void JointStepper::advance(std::span<const Action> actions, double action_noise, Rng& rng,
                           std::span<const std::uint8_t> active, std::span<std::uint8_t> events,
                           std::span<Action> applied) {
  const GridMap& map = *map_;
  for (std::size_t i = 0; i < cells_.size(); ++i) {
    const Cell cur = cells_[i];
    const int cur_idx = map.index(cur);
    if (!active.empty() && !active[i]) {
      events[i] = map.is_goal_index(cur_idx) ? event::kReachedGoal : 0;
      applied[i] = Action::Stay;
      continue;
    }
    const ActionSet allowed = map.permissible(cur_idx);
    Action a = actions[i];
    if (action_noise > 0.0 && rng.bernoulli(action_noise)) {
      a = allowed.nth(static_cast<int>(rng.below(static_cast<std::uint64_t>(allowed.size()))));
    }
    applied[i] = a;
    std::uint8_t ev = 0;
    if (!allowed.contains(a)) {
      ev = event::kBlockedByMap;
    } else if (a != Action::Stay) {
      const Cell target = displace(cur, a);
      auto& occ = occupant_[map.index(target)];
      // Resolved agents sit on their new cell, unresolved ones on their old cell; both block.
      // This also blocks every swap: the later agent's target is the earlier agent's old cell.
      if (occ != 0) {
        ev = event::kBlockedByAgent;
      } else {
        occupant_[cur_idx] = 0;
        occ = static_cast<std::int32_t>(i + 1);
        cells_[i] = target;
        ev = event::kMoved;
      }
    }
    if (map.is_goal(cells_[i])) ev |= event::kReachedGoal;
    events[i] = ev;
  }
}

StepOutcome step(const GridMap& map, std::span<const Cell> cells, std::span<const Action> actions,
                 double action_noise, Rng& rng, std::span<const std::uint8_t> active) {
  if (actions.size() != cells.size() || (!active.empty() && active.size() != cells.size())) {
    throw Error(ErrorCode::kInvalidJointState, "per-agent input sizes differ");
  }
  JointStepper stepper(map);
  stepper.reset(cells);
  StepOutcome out;
  out.events.resize(cells.size());
  out.applied.resize(cells.size());
  stepper.advance(actions, action_noise, rng, active, out.events, out.applied);
  out.next_cells.assign(stepper.cells().begin(), stepper.cells().end());
  return out;
}

std::vector<Cell> sample_initial(const GridMap& map, int n_agents, Rng& rng) {
  const auto& starts = map.starts();
  const std::size_t n_starts = starts.size();
  if (n_agents < 0 || static_cast<std::size_t>(n_agents) > n_starts) {
    throw Error(ErrorCode::kCapacity, "cannot place " + std::to_string(n_agents) + " agents on " +
                                          std::to_string(n_starts) + " start cells");
  }
  std::vector<Cell> out;
  out.reserve(static_cast<std::size_t>(n_agents));
  std::vector<std::size_t> chosen;
  chosen.reserve(static_cast<std::size_t>(n_agents));
  auto taken = [&](std::size_t k) { return std::find(chosen.begin(), chosen.end(), k) != chosen.end(); };

  if (2 * static_cast<std::size_t>(n_agents) <= n_starts) {
    // Rejecting repeats from the full distribution equals sampling from the
    // renormalized remainder; the acceptance rate stays high while at most half
    // the start cells are used up.
    const auto& cdf = map.start_cdf();
    while (out.size() < static_cast<std::size_t>(n_agents)) {
      std::size_t k;
      if (map.uniform_starts()) {
        k = static_cast<std::size_t>(rng.below(n_starts));
      } else {
        const double r = rng.uniform01();
        k = static_cast<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), r) - cdf.begin());
        if (k >= n_starts) k = n_starts - 1;
        if (map.start_probs()[k] <= 0.0) continue;
      }
      if (taken(k)) continue;
      chosen.push_back(k);
      out.push_back(starts[k]);
    }
    return out;
  }

  std::vector<double> weight = map.start_probs();
  for (int a = 0; a < n_agents; ++a) {
    double total = 0.0;
    std::size_t positive = 0;
    for (double w : weight) {
      total += w;
      if (w > 0.0) ++positive;
    }
    std::size_t k = 0;
    if (positive == 0) {
      // Remaining mass is zero: fall back to any untaken start.
      while (taken(k)) ++k;
    } else {
      double r = rng.uniform01() * total;
      k = n_starts;
      for (std::size_t j = 0; j < n_starts; ++j) {
        if (weight[j] <= 0.0) continue;
        k = j;
        if (r < weight[j]) break;
        r -= weight[j];
      }
    }
    chosen.push_back(k);
    weight[k] = 0.0;
    out.push_back(starts[k]);
  }
  return out;
}

}  // namespace mapf
