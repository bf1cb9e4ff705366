#include <algorithm>
#include <climits>
#include <deque>
#include <ostream>
#include <queue>
#include <unordered_map>
#include <unordered_set>

#include "mapf/baselines.hpp"
#include "mapf/error.hpp"

namespace mapf::baselines {

namespace {

std::uint64_t vertex_key(int cell, int t) { return (static_cast<std::uint64_t>(t) << 32) | static_cast<std::uint32_t>(cell); }

std::uint64_t edge_key(int from, int to, int t) {
  return (static_cast<std::uint64_t>(t) << 42) ^ (static_cast<std::uint64_t>(from) << 21) ^ static_cast<std::uint64_t>(to);
}

class ReservationTable {
 public:
  explicit ReservationTable(int area) : park_from_(static_cast<std::size_t>(area), INT_MAX), last_(static_cast<std::size_t>(area), -1) {}

  bool vertex_blocked(int cell, int t) const { return t >= park_from_[cell] || vertices_.contains(vertex_key(cell, t)); }
  // Moving from -> to during [t, t+1] swaps with someone moving to -> from.
  bool swap_blocked(int from, int to, int t) const { return edges_.contains(edge_key(to, from, t)); }
  // An agent may stop for good at `cell` from time t only if nobody uses the cell later.
  bool can_park(int cell, int t) const { return park_from_[cell] == INT_MAX && last_[cell] < t; }

  void reserve(const std::vector<int>& path, bool park) {
    for (int t = 0; t < static_cast<int>(path.size()); ++t) {
      vertices_.insert(vertex_key(path[t], t));
      last_[path[t]] = std::max(last_[path[t]], t);
      if (t + 1 < static_cast<int>(path.size())) edges_.insert(edge_key(path[t], path[t + 1], t));
    }
    if (park) park_from_[path.back()] = std::min(park_from_[path.back()], static_cast<int>(path.size()) - 1);
  }

 private:
  std::unordered_set<std::uint64_t> vertices_;
  std::unordered_set<std::uint64_t> edges_;
  std::vector<int> park_from_;
  std::vector<int> last_;
};

struct Node {
  int cell;
  int t;
  int parent;
};

struct OpenEntry {
  int f;
  int g;
  std::int64_t order;
  int node;
  bool operator>(const OpenEntry& o) const {
    if (f != o.f) return f > o.f;
    if (g != o.g) return g < o.g;  // deeper first on ties
    return order > o.order;
  }
};

// Space-time best-first search. to_goal = true: reach a parkable goal minimizing time,
// guided by `h`. to_goal = false: survive conflict-free until the horizon.
std::vector<int> search(const GridMap& map, const ReservationTable& rt, const std::vector<int>& h, int start, int horizon,
                        bool to_goal, std::int64_t& expanded) {
  std::vector<Node> nodes;
  std::priority_queue<OpenEntry, std::vector<OpenEntry>, std::greater<>> open;
  std::unordered_set<std::uint64_t> closed;
  std::int64_t order = 0;
  auto heuristic = [&](int cell, int t) { return to_goal ? h[cell] : horizon - t; };

  nodes.push_back({start, 0, -1});
  open.push({heuristic(start, 0), 0, order++, 0});
  while (!open.empty()) {
    const OpenEntry top = open.top();
    open.pop();
    const Node cur = nodes[top.node];
    if (!closed.insert(vertex_key(cur.cell, cur.t)).second) continue;
    ++expanded;
    const bool done = to_goal ? (map.is_goal_index(cur.cell) && rt.can_park(cur.cell, cur.t)) : cur.t == horizon;
    if (done) {
      std::vector<int> path;
      for (int k = top.node; k >= 0; k = nodes[k].parent) path.push_back(nodes[k].cell);
      std::reverse(path.begin(), path.end());
      return path;
    }
    if (cur.t >= horizon) continue;
    const ActionSet allowed = map.permissible(cur.cell);
    const Cell c = map.cell_at(cur.cell);
    for (Action a : kAllActions) {
      if (!allowed.contains(a)) continue;
      const int next = map.index(displace(c, a));
      const int nt = cur.t + 1;
      if (rt.vertex_blocked(next, nt) || rt.swap_blocked(cur.cell, next, cur.t)) continue;
      if (closed.contains(vertex_key(next, nt))) continue;
      const int hn = heuristic(next, nt);
      if (to_goal && (hn < 0 || nt + hn > horizon)) continue;
      nodes.push_back({next, nt, top.node});
      open.push({nt + hn, nt, order++, static_cast<int>(nodes.size()) - 1});
    }
  }
  return {};
}

// Manhattan distance to the nearest goal, ignoring obstacles (admissible).
std::vector<int> goal_heuristic(const GridMap& map) {
  std::vector<int> h(static_cast<std::size_t>(map.area()), -1);
  std::deque<int> queue;
  for (Cell g : map.goals()) {
    h[map.index(g)] = 0;
    queue.push_back(map.index(g));
  }
  while (!queue.empty()) {
    const int cur = queue.front();
    queue.pop_front();
    const Cell c = map.cell_at(cur);
    for (Action a : {Action::Up, Action::Down, Action::Left, Action::Right}) {
      const Cell n = displace(c, a);
      if (!map.in_bounds(n) || h[map.index(n)] >= 0) continue;
      h[map.index(n)] = h[cur] + 1;
      queue.push_back(map.index(n));
    }
  }
  return h;
}

}  // namespace

PlanResult astar_plan(const GridMap& map, std::span<const Cell> starts, int horizon) {
  if (horizon < 1) throw Error(ErrorCode::kInvalidConfig, "planning horizon must be positive");
  for (std::size_t i = 0; i < starts.size(); ++i) {
    if (!map.is_free(starts[i])) throw Error(ErrorCode::kInvalidState, "start cell is out of bounds or an obstacle");
    for (std::size_t j = 0; j < i; ++j) {
      if (starts[i] == starts[j]) throw Error(ErrorCode::kInvalidJointState, "two agents share a start cell");
    }
  }
  const auto h = goal_heuristic(map);
  const std::size_t n = starts.size();

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;

  PlanResult result;
  // A stuck agent (no conflict-free path even to survive) is promoted to the front
  // of the priority order and everyone replans; bounded by n attempts.
  for (std::size_t attempt = 0; attempt <= n; ++attempt) {
    ReservationTable rt(map.area());
    result.paths.assign(n, {});
    result.success.assign(n, 0);
    std::optional<std::size_t> stuck;
    for (std::size_t agent : order) {
      const int start = map.index(starts[agent]);
      auto path = search(map, rt, h, start, horizon, true, result.expanded);
      const bool reached = !path.empty();
      if (!reached) path = search(map, rt, h, start, horizon, false, result.expanded);
      if (path.empty()) {
        stuck = agent;
        path.assign(static_cast<std::size_t>(horizon) + 1, start);
      }
      rt.reserve(path, reached);
      result.success[agent] = reached;
      auto& cells = result.paths[agent];
      cells.reserve(path.size());
      for (int idx : path) cells.push_back(map.cell_at(idx));
    }
    if (!stuck || order.front() == *stuck) break;
    order.erase(std::find(order.begin(), order.end(), *stuck));
    order.insert(order.begin(), *stuck);
  }
  return result;
}

void write_plan(std::ostream& out, const PlanResult& plan) {
  for (std::size_t i = 0; i < plan.paths.size(); ++i) {
    for (std::size_t t = 0; t < plan.paths[i].size(); ++t) {
      out << i << ' ' << t << ' ' << plan.paths[i][t].x << ' ' << plan.paths[i][t].y << '\n';
    }
  }
}

}  // namespace mapf::baselines
