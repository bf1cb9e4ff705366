#include "mapf/policy.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "mapf/error.hpp"

namespace mapf {

void write_policy(std::ostream& out, const Policy& policy, const GridMap& map) {
  char buf[160];
  for (Cell c : map.free_cells()) {
    const auto& p = policy.at(c);
    std::snprintf(buf, sizeof buf, "%d %d %.6f %.6f %.6f %.6f %.6f\n", c.x, c.y, p[0], p[1], p[2], p[3], p[4]);
    out << buf;
  }
}

Policy read_policy(std::istream& in, const GridMap& map) {
  Policy policy = Policy::uniform(map);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line.front() == ';') continue;
    std::istringstream ls(line);
    Cell c;
    ActionProbs p;
    if (!(ls >> c.x >> c.y >> p[0] >> p[1] >> p[2] >> p[3] >> p[4])) {
      throw Error(ErrorCode::kParse, "policy snapshot line " + std::to_string(line_no) + " is malformed");
    }
    if (!map.is_free(c)) {
      throw Error(ErrorCode::kParse, "policy snapshot line " + std::to_string(line_no) + " names a non-free cell");
    }
    double sum = 0.0;
    for (double v : p) {
      if (!(v >= 0.0)) throw Error(ErrorCode::kParse, "negative probability on line " + std::to_string(line_no));
      sum += v;
    }
    // Six-decimal rounding can leave the sum off by a few 1e-6; renormalize.
    if (std::abs(sum - 1.0) > 1e-4) {
      throw Error(ErrorCode::kParse, "probabilities on line " + std::to_string(line_no) + " do not sum to 1");
    }
    for (double& v : p) v /= sum;
    policy.at(c) = p;
  }
  return policy;
}

}  // namespace mapf
