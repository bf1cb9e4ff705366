#pragma once

#include <vector>

#include "mapf/gridworld.hpp"

namespace fixture {

/// Obstacle-free w x h map with one goal; every other cell is a start.
inline mapf::GridMap open_map(int w, int h, mapf::Cell goal) {
  std::vector<mapf::Cell> starts;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (mapf::Cell{x, y} != goal) starts.push_back({x, y});
    }
  }
  return mapf::GridMap::create(w, h, {}, {goal}, starts);
}

}  // namespace fixture
