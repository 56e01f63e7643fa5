#include "hiddenvi/counterexample.hpp"

#include <cmath>

#include "hiddenvi/errors.hpp"

namespace hiddenvi {

namespace {
constexpr double kInvSqrt2 = 0.70710678118654752440;
}

CounterexampleSpec CounterexampleSpec::make(double eta) {
  if (eta <= 0.0) throw ConfigError("CounterexampleSpec: eta must be positive");
  CounterexampleSpec spec;
  spec.eta = eta;
  spec.f_matrix = Matrix::from_rows({{1.0, 1.0}, {-1.0, 1.0}});
  spec.q_matrix = Matrix::from_rows({{kInvSqrt2, -kInvSqrt2}, {kInvSqrt2, kInvSqrt2}});
  spec.alpha = kInvSqrt2;
  return spec;
}

Matrix build_p(double eta) {
  const CounterexampleSpec spec = CounterexampleSpec::make(eta);
  Matrix left = sub(Matrix::identity(2), scale(spec.q_matrix, spec.alpha));
  Matrix p = mat_mul(left, scale(spec.f_matrix, eta));

  const Matrix closed = Matrix::from_rows({{0.0, eta}, {-eta, 0.0}});
  if (max_abs(sub(p, closed)) > 1e-12 * std::max(1.0, eta))
    throw NumericalBlowup("build_p: product path disagrees with the closed form");
  return p;
}

double measure_alpha(const CounterexampleSpec& spec, const Vector& z) {
  if (z.size() != 2) throw DimensionMismatch("measure_alpha: z must be 2-dimensional");
  const Vector fz = mat_vec(spec.f_matrix, z);
  const double denom = spec.eta * norm(fz);
  if (denom == 0.0) throw ZeroMatrix("measure_alpha: F z vanishes");
  const Matrix p = build_p(spec.eta);
  const Vector biased = sub(scale(mat_vec(spec.f_matrix, z), spec.eta), mat_vec(p, z));
  return norm(biased) / denom;
}

TrajectoryRecord run_divergence(const CounterexampleSpec& spec, const Vector& z0,
                                std::size_t steps) {
  if (norm_sq(z0) == 0.0) throw ConfigError("run_divergence: z0 must be nonzero");
  const Matrix p = build_p(spec.eta);
  const Matrix step = sub(Matrix::identity(2), p);

  TrajectoryRecord rec;
  rec.rows.reserve(steps);
  Vector z = z0;
  for (std::size_t t = 0; t < steps; ++t) {
    const Vector z_next = mat_vec(step, z);
    TrajectoryRow row;
    row.iter = t + 1;
    row.dist_sq = norm_sq(z);
    row.loss_anchor = norm(z);
    row.loss_final = norm(z_next);
    row.loss_ratio = row.loss_final / row.loss_anchor;
    row.inner_steps = 1;
    row.grad_evals = 1;
    rec.rows.push_back(row);
    z = z_next;
  }
  rec.z_final = z;
  rec.theta_final = z;
  return rec;
}

}  // namespace hiddenvi
