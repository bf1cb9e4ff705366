#pragma once

#include <array>
#include <bit>
#include <compare>
#include <cstdint>
#include <cstdlib>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mapf/rng.hpp"

namespace mapf {

struct Cell {
  int x = 0;  // column, grows rightward
  int y = 0;  // row, grows downward
  friend constexpr auto operator<=>(const Cell&, const Cell&) = default;
};

constexpr int manhattan(Cell a, Cell b) { return std::abs(a.x - b.x) + std::abs(a.y - b.y); }

// Order doubles as the greedy tie-break order and the column order of policy snapshots.
enum class Action : std::uint8_t { Up = 0, Down = 1, Left = 2, Right = 3, Stay = 4 };

inline constexpr int kNumActions = 5;
inline constexpr std::array<Action, kNumActions> kAllActions = {Action::Up, Action::Down, Action::Left,
                                                               Action::Right, Action::Stay};

constexpr int index_of(Action a) { return static_cast<int>(a); }
constexpr Action action_at(int i) { return static_cast<Action>(i); }

constexpr Cell displace(Cell c, Action a) {
  switch (a) {
    case Action::Up: return {c.x, c.y - 1};
    case Action::Down: return {c.x, c.y + 1};
    case Action::Left: return {c.x - 1, c.y};
    case Action::Right: return {c.x + 1, c.y};
    case Action::Stay: return c;
  }
  return c;
}

std::string_view action_name(Action a);
std::optional<Action> parse_action(std::string_view name);

/// Bit set over the five actions.
class ActionSet {
 public:
  constexpr ActionSet() = default;
  constexpr void insert(Action a) { bits_ |= static_cast<std::uint8_t>(1u << index_of(a)); }
  constexpr bool contains(Action a) const { return (bits_ >> index_of(a)) & 1u; }
  constexpr int size() const { return std::popcount(static_cast<unsigned>(bits_)); }
  constexpr std::uint8_t bits() const { return bits_; }
  /// i-th member in action order; i < size().
  Action nth(int i) const;
  friend constexpr bool operator==(ActionSet, ActionSet) = default;

 private:
  std::uint8_t bits_ = 0;
};

/// Immutable grid world: bounds, obstacles, goals and the initial distribution.
class GridMap {
 public:
  /// Validates every map invariant; throws Error on violation. Empty start_probs means uniform.
  static GridMap create(int width, int height, std::vector<Cell> obstacles, std::vector<Cell> goals,
                        std::vector<Cell> starts, std::vector<double> start_probs = {});

  int width() const { return width_; }
  int height() const { return height_; }
  int area() const { return width_ * height_; }

  bool in_bounds(Cell c) const { return c.x >= 0 && c.y >= 0 && c.x < width_ && c.y < height_; }
  int index(Cell c) const { return c.y * width_ + c.x; }
  Cell cell_at(int index) const { return {index % width_, index / width_}; }

  bool is_obstacle(Cell c) const { return in_bounds(c) && (flags_[index(c)] & kObstacle); }
  bool is_free(Cell c) const { return in_bounds(c) && !(flags_[index(c)] & kObstacle); }
  bool is_goal(Cell c) const { return in_bounds(c) && (flags_[index(c)] & kGoal); }
  bool is_start(Cell c) const { return in_bounds(c) && (flags_[index(c)] & kStart); }
  bool is_goal_index(int i) const { return flags_[i] & kGoal; }
  bool is_free_index(int i) const { return !(flags_[i] & kObstacle); }

  const std::vector<Cell>& obstacles() const { return obstacles_; }
  const std::vector<Cell>& goals() const { return goals_; }
  const std::vector<Cell>& starts() const { return starts_; }
  const std::vector<double>& start_probs() const { return start_probs_; }
  bool uniform_starts() const { return uniform_starts_; }
  /// Running sum of start_probs (last entry normalized to 1).
  const std::vector<double>& start_cdf() const { return start_cdf_; }
  /// Free cells in row-major order.
  const std::vector<Cell>& free_cells() const { return free_cells_; }

  /// Permissible action set per cell index, precomputed (obstacles read as empty sets).
  ActionSet permissible(int cell_index) const { return permissible_[cell_index]; }

  /// Shortest 4-connected distance from every cell to the nearest goal, -1 if unreachable.
  std::vector<int> goal_distances() const;

 private:
  enum : std::uint8_t { kObstacle = 1, kGoal = 2, kStart = 4 };

  GridMap() = default;

  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> flags_;
  std::vector<ActionSet> permissible_;
  std::vector<Cell> obstacles_;
  std::vector<Cell> goals_;
  std::vector<Cell> starts_;
  std::vector<double> start_probs_;
  std::vector<double> start_cdf_;
  bool uniform_starts_ = true;
  std::vector<Cell> free_cells_;
};

/// Parses the map text format: ';' comments, then a rectangular grid of . # S G.
GridMap parse_map(std::string_view text);
GridMap load_map(const std::string& path);
/// Inverse of parse_map (start probabilities are not encoded; the format implies uniform).
std::string format_map(const GridMap& map);

/// E(s). Throws kInvalidState for obstacle or out-of-bounds cells.
ActionSet permissible_actions(const GridMap& map, Cell s);

struct RewardConfig {
  double delta1 = -1.0;   // ordinary step
  double delta2 = -5.0;   // impermissible action
  double delta3 = 100.0;  // goal reached
  void validate() const;
};

struct WorldConfig {
  int n_agents = 1;
  int horizon = 0;  // 0 selects 4 * max(width, height)
  double action_noise = 0.0;

  void validate() const;
  int resolved_horizon(const GridMap& map) const;
};

double reward(Cell s, Action a, Cell s_next, const GridMap& map, bool blocked_by_map, const RewardConfig& cfg);

namespace event {
inline constexpr std::uint8_t kMoved = 1u << 0;
inline constexpr std::uint8_t kBlockedByMap = 1u << 1;
inline constexpr std::uint8_t kBlockedByAgent = 1u << 2;
inline constexpr std::uint8_t kReachedGoal = 1u << 3;
}  // namespace event

struct StepOutcome {
  std::vector<Cell> next_cells;
  std::vector<std::uint8_t> events;
  std::vector<Action> applied;  // action after noise resampling
};

/// One joint transition. Agents resolve in ascending index order; an agent whose target
/// is occupied (by a resolved agent's new cell or an unresolved agent's current cell)
/// stays put. Inactive agents (active[i] == 0) hold their cell without acting.
StepOutcome step(const GridMap& map, std::span<const Cell> cells, std::span<const Action> actions,
                 double action_noise, Rng& rng, std::span<const std::uint8_t> active = {});

/// Reusable stepping state for hot loops: keeps an occupancy grid between ticks.
class JointStepper {
 public:
  explicit JointStepper(const GridMap& map);

  /// Places agents; throws kInvalidJointState / kInvalidState on bad input.
  void reset(std::span<const Cell> cells);
  /// Advances in place. cells/events/applied are indexed by agent.
  void advance(std::span<const Action> actions, double action_noise, Rng& rng,
               std::span<const std::uint8_t> active, std::span<std::uint8_t> events,
               std::span<Action> applied);
  void clear();

  std::span<const Cell> cells() const { return cells_; }

 private:
  const GridMap* map_;
  std::vector<std::int32_t> occupant_;  // agent id + 1 per cell, 0 when empty
  std::vector<Cell> cells_;
};

/// Draws n distinct start cells weighted by the initial distribution, without replacement.
std::vector<Cell> sample_initial(const GridMap& map, int n_agents, Rng& rng);

}  // namespace mapf
