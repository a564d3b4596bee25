#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "brownent/error.hpp"

namespace brownent::detail {

// Integration steps that land exactly on every requested time.
struct Schedule {
  std::vector<double> times;           // recorded times
  bool record_initial = false;
  std::vector<double> step_size;       // per integration step
  std::vector<std::int64_t> record;    // slice index recorded after the step, or -1
};

inline Schedule build_schedule(const std::vector<double>& grid, double dt, bool keep_full) {
  if (grid.empty()) throw Error(ErrorCode::InvalidParameter, "time grid is empty");
  if (!(dt > 0.0) || !std::isfinite(dt)) {
    throw Error(ErrorCode::InvalidParameter, "time step must be positive");
  }
  Schedule s;
  double now = 0.0;
  std::int64_t slice = 0;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const double target = grid[k];
    if (!std::isfinite(target) || target < 0.0) {
      throw Error(ErrorCode::InvalidParameter, "time grid entries must be finite and >= 0");
    }
    if (k > 0 && !(target > grid[k - 1])) {
      throw Error(ErrorCode::InvalidParameter, "time grid must be strictly increasing");
    }
    if (target == 0.0) {
      s.record_initial = true;
      s.times.push_back(0.0);
      ++slice;
      continue;
    }
    const auto n = static_cast<std::size_t>(
        std::max(1.0, std::ceil((target - now) / dt - 1e-9)));
    const double h = (target - now) / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      s.step_size.push_back(h);
      const bool last = i + 1 == n;
      if (last || keep_full) {
        s.record.push_back(slice++);
        s.times.push_back(last ? target : now + static_cast<double>(i + 1) * h);
      } else {
        s.record.push_back(-1);
      }
    }
    now = target;
  }
  return s;
}

}  // namespace brownent::detail
