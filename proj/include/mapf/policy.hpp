#pragma once

#include <array>
#include <iosfwd>
#include <vector>

#include "mapf/gridworld.hpp"

namespace mapf {

using ActionProbs = std::array<double, kNumActions>;

inline constexpr ActionProbs kUniformProbs = {0.2, 0.2, 0.2, 0.2, 0.2};

/// Stationary policy shared by all agents: one action distribution per cell.
class Policy {
 public:
  Policy() = default;
  /// Uniform distribution on every cell.
  Policy(int width, int height) : width_(width), height_(height), probs_(static_cast<std::size_t>(width) * height, kUniformProbs) {}
  static Policy uniform(const GridMap& map) { return Policy(map.width(), map.height()); }

  int width() const { return width_; }
  int height() const { return height_; }

  const ActionProbs& at(int cell_index) const { return probs_[cell_index]; }
  ActionProbs& at(int cell_index) { return probs_[cell_index]; }
  const ActionProbs& at(Cell c) const { return probs_[c.y * width_ + c.x]; }
  ActionProbs& at(Cell c) { return probs_[c.y * width_ + c.x]; }

  Action sample(int cell_index, Rng& rng) const {
    const auto& p = probs_[cell_index];
    double r = rng.uniform01();
    for (int a = 0; a < kNumActions - 1; ++a) {
      if (r < p[a]) return action_at(a);
      r -= p[a];
    }
    return Action::Stay;
  }

  friend bool operator==(const Policy&, const Policy&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<ActionProbs> probs_;
};

/// "x y p_up p_down p_left p_right p_stay", six decimals, one line per free cell.
void write_policy(std::ostream& out, const Policy& policy, const GridMap& map);
/// Cells absent from the snapshot keep the uniform distribution.
Policy read_policy(std::istream& in, const GridMap& map);

struct TrajectoryStep {
  Cell cell;
  Action action;
  friend bool operator==(const TrajectoryStep&, const TrajectoryStep&) = default;
};

/// Alternating state/action sequence ending in a final state.
struct Trajectory {
  std::vector<TrajectoryStep> steps;
  Cell final;
  bool reached_goal = false;

  Cell first() const { return steps.empty() ? final : steps.front().cell; }
  /// Number of states, |tau| = steps + 1.
  std::size_t length() const { return steps.size() + 1; }
  Cell cell_at(std::size_t t) const { return t < steps.size() ? steps[t].cell : final; }
};

}  // namespace mapf
