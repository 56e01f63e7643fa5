#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "hiddenvi/record.hpp"

namespace hiddenvi {

/// Shortest round-trippable decimal: 17 significant digits.
std::string format_g17(double x);

/// RFC-4180 quoting; applied only when a field needs it.
std::string csv_escape(const std::string& field);

/// Fixed per-run schema:
/// iter,dist_sq,loss_anchor,loss_final,loss_ratio,inner_steps,grad_evals,alpha_flag,wall_ms
std::string run_csv_header();
std::string run_csv_line(const TrajectoryRow& row);
void write_run_csv(const std::string& path, const TrajectoryRecord& record);

struct AggregateRow {
  std::size_t iter = 0;
  double mean_dist_sq = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  std::size_t n_runs = 0;
};

/// Mean dist_sq per iteration across runs with a 95% normal-approximation
/// confidence interval. Iterations are truncated to the shortest run.
std::vector<AggregateRow> aggregate_records(const std::vector<TrajectoryRecord>& runs);

/// Fixed aggregate schema: iter,mean_dist_sq,ci_lo,ci_hi,n_runs
void write_aggregate_csv(const std::string& path, const std::vector<AggregateRow>& rows);

}  // namespace hiddenvi
