#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "hiddenvi/linalg.hpp"

namespace hiddenvi {

/// One outer-iteration row of metrics. dist_sq is ||z_t - z*||^2 when the
/// solution is known (0 otherwise).
struct TrajectoryRow {
  std::size_t iter = 0;
  double dist_sq = 0.0;
  double loss_anchor = 0.0;
  double loss_final = 0.0;
  double loss_ratio = 0.0;
  std::size_t inner_steps = 0;
  std::size_t grad_evals = 0;
  bool alpha_flag = false;
  double wall_ms = 0.0;
};

struct TrajectoryRecord {
  std::vector<TrajectoryRow> rows;
  Vector theta_final;
  Vector z_final;
  bool aborted = false;
  std::string abort_reason;
};

}  // namespace hiddenvi
