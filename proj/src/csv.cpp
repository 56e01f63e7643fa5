#include "hiddenvi/csv.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "hiddenvi/errors.hpp"

namespace hiddenvi {

std::string format_g17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::string run_csv_header() {
  return "iter,dist_sq,loss_anchor,loss_final,loss_ratio,inner_steps,grad_evals,alpha_flag,wall_ms";
}

std::string run_csv_line(const TrajectoryRow& row) {
  std::string out = std::to_string(row.iter);
  out += ',';
  out += format_g17(row.dist_sq);
  out += ',';
  out += format_g17(row.loss_anchor);
  out += ',';
  out += format_g17(row.loss_final);
  out += ',';
  out += format_g17(row.loss_ratio);
  out += ',';
  out += std::to_string(row.inner_steps);
  out += ',';
  out += std::to_string(row.grad_evals);
  out += ',';
  out += row.alpha_flag ? '1' : '0';
  out += ',';
  out += format_g17(row.wall_ms);
  return out;
}

void write_run_csv(const std::string& path, const TrajectoryRecord& record) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("write_run_csv: cannot open " + path);
  f << run_csv_header() << '\n';
  for (const TrajectoryRow& row : record.rows) f << run_csv_line(row) << '\n';
}

std::vector<AggregateRow> aggregate_records(const std::vector<TrajectoryRecord>& runs) {
  std::vector<AggregateRow> out;
  if (runs.empty()) return out;
  std::size_t t_min = runs.front().rows.size();
  for (const auto& r : runs) t_min = std::min(t_min, r.rows.size());

  const double n = static_cast<double>(runs.size());
  for (std::size_t t = 0; t < t_min; ++t) {
    double mean = 0.0;
    for (const auto& r : runs) mean += r.rows[t].dist_sq;
    mean /= n;
    double var = 0.0;
    for (const auto& r : runs) {
      const double d = r.rows[t].dist_sq - mean;
      var += d * d;
    }
    var = runs.size() > 1 ? var / (n - 1.0) : 0.0;
    const double half = 1.959963984540054 * std::sqrt(var / n);
    out.push_back({t + 1, mean, mean - half, mean + half, runs.size()});
  }
  return out;
}

void write_aggregate_csv(const std::string& path, const std::vector<AggregateRow>& rows) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("write_aggregate_csv: cannot open " + path);
  f << "iter,mean_dist_sq,ci_lo,ci_hi,n_runs\n";
  for (const AggregateRow& r : rows) {
    f << r.iter << ',' << format_g17(r.mean_dist_sq) << ',' << format_g17(r.ci_lo) << ','
      << format_g17(r.ci_hi) << ',' << r.n_runs << '\n';
  }
}

}  // namespace hiddenvi
