#include "hiddenvi/driver.hpp"

#include <chrono>
#include <cmath>

#include "hiddenvi/errors.hpp"
#include "hiddenvi/rng.hpp"

namespace hiddenvi {

Vector exact_step(const VIOperator& op, const Vector& z, double eta) {
  return project(op.domain(), axpy(z, -eta, op.eval(z)));
}

bool bias_check(const Vector& z_next, const Vector& z_t_star, const Vector& f_t,
                const Vector& f_star, double alpha, double eta) {
  const double lhs = norm(sub(z_next, z_t_star));
  const double rhs = alpha * eta * norm(sub(f_t, f_star));
  return lhs <= rhs + 1e-9;
}

TrajectoryRecord run_outer(std::shared_ptr<const PredictionModel> model, const VIOperator& op,
                           const Vector& theta_init, const OuterConfig& cfg) {
  if (model->output_dim() != op.dim())
    throw DimensionMismatch("run_outer: model output and operator dimensions differ");
  if (theta_init.size() != model->param_dim())
    throw DimensionMismatch("run_outer: theta_init length mismatch");

  TrajectoryRecord rec;
  rec.rows.reserve(cfg.t_outer);
  Vector theta = theta_init;
  const auto z_star = op.solution();

  for (std::size_t t = 0; t < cfg.t_outer; ++t) {
    const auto tic = std::chrono::steady_clock::now();
    TrajectoryRow row;
    row.iter = t + 1;
    try {
      const Vector z = model->forward(theta);
      if (!all_finite(z)) throw NumericalBlowup("run_outer: predictions diverged");
      if (z_star) row.dist_sq = norm_sq(sub(z, *z_star));

      const Vector f_val = op.eval(z);
      const SurrogateLoss loss = build_surrogate(model, theta, f_val, cfg.eta);
      const double anchor = loss.value(theta);
      row.loss_anchor = anchor;

      if (cfg.scripted_update) {
        theta = cfg.scripted_update(loss, theta);
        row.inner_steps = 1;
        row.grad_evals = 1;
        row.loss_final = loss.value(theta);
      } else {
        const double ls = lstar(loss, cfg.lstar_mode);
        InnerResult inner = run_inner(loss, theta, cfg.strategy, ls, anchor);
        theta = std::move(inner.theta);
        row.inner_steps = inner.steps_taken;
        row.grad_evals = inner.grad_evals;
        row.loss_final = inner.final_loss;
        row.alpha_flag = inner.alpha_cap_hit;
      }
      row.loss_ratio = row.loss_anchor == 0.0 ? 0.0 : row.loss_final / row.loss_anchor;
    } catch (const NumericalBlowup& e) {
      rec.aborted = true;
      rec.abort_reason = e.what();
      break;
    }
    if (cfg.measure_wall_time) {
      row.wall_ms = std::chrono::duration<double, std::milli>(
                        std::chrono::steady_clock::now() - tic)
                        .count();
    }
    rec.rows.push_back(row);
  }

  rec.theta_final = theta;
  rec.z_final = model->forward(theta);
  return rec;
}

bool RateBounds::condition2(double big_c, double p) const {
  return alpha <= big_c * std::pow(eta, p);
}

double RateBounds::eta_threshold() const {
  return 2.0 * (mu - alpha * lip) / ((1.0 + alpha * alpha) * lip * lip);
}

RateBounds rate_bounds(double eta, double mu, double lip, double alpha, double c) {
  if (mu <= 0.0 || lip <= 0.0) throw ConfigError("rate_bounds: mu and lip must be positive");
  RateBounds rb;
  rb.eta = eta;
  rb.mu = mu;
  rb.lip = lip;
  rb.alpha = alpha;
  rb.c = c;
  rb.kappa_sq = 1.0 - 2.0 * eta * mu + eta * eta * lip * lip;
  rb.theorem1_factor = 1.0 - 2.0 * eta * mu + 2.0 * alpha * eta * lip +
                       (1.0 + alpha * alpha) * eta * eta * lip * lip;
  rb.stoch_factor = 1.0 - eta * mu + alpha * alpha;
  rb.noise_term = eta * eta * (1.0 + c);
  return rb;
}

TrajectoryRecord quasi_fejer_run(const AffineOperator& op, double eta,
                                 const std::vector<double>& error_schedule, std::size_t t_outer,
                                 std::uint64_t seed) {
  if (error_schedule.size() < t_outer)
    throw ConfigError("quasi_fejer_run: error schedule shorter than the horizon");
  const double mu = *op.monotonicity_constant();
  const double lip = *op.lipschitz_constant();
  const double kappa_sq = 1.0 - 2.0 * eta * mu + eta * eta * lip * lip;
  if (kappa_sq >= 1.0)
    throw InvalidRegime("quasi_fejer_run: exact step is not a contraction at this eta");

  Rng rng(seed);
  const Vector z_star = *op.solution();
  Vector z = add(z_star, Vector(op.dim(), 1.0));  // start at unit offset per coordinate

  TrajectoryRecord rec;
  rec.rows.reserve(t_outer);
  for (std::size_t t = 0; t < t_outer; ++t) {
    Vector z_next = exact_step(op, z, eta);
    if (error_schedule[t] != 0.0) {
      Vector u(op.dim());
      double nu = 0.0;
      do {
        for (double& v : u) v = rng.normal();
        nu = norm(u);
      } while (nu == 0.0);
      z_next = axpy(z_next, error_schedule[t] / nu, u);
    }
    TrajectoryRow row;
    row.iter = t + 1;
    row.dist_sq = norm_sq(sub(z, z_star));
    row.loss_anchor = row.dist_sq;
    row.loss_final = norm_sq(sub(z_next, z_star));
    row.loss_ratio = row.loss_anchor == 0.0 ? 0.0 : row.loss_final / row.loss_anchor;
    row.inner_steps = 1;
    row.grad_evals = 1;
    rec.rows.push_back(row);
    z = std::move(z_next);
  }
  rec.z_final = z;
  rec.theta_final = z;
  return rec;
}

StochasticAuditSummary stochastic_audit(const AffineOperator& op, double eta, double alpha,
                                        double c, double sigma_noise, std::size_t seeds,
                                        std::size_t t_outer, std::uint64_t master_seed) {
  if (op.domain().kind != DomainSpec::Kind::AllSpace)
    throw InvalidRegime("stochastic_audit: unconstrained domain required");
  const double mu = *op.monotonicity_constant();
  if (eta * mu <= alpha * alpha)
    throw InvalidRegime("stochastic_audit: eta*mu must exceed alpha^2 for a finite plateau");

  const std::size_t n = op.dim();
  const Vector z_star = *op.solution();
  const double coord_sd = sigma_noise / std::sqrt(static_cast<double>(n));

  StochasticAuditSummary out;
  out.mean_half_dist_sq.assign(t_outer, 0.0);
  out.se_half_dist_sq.assign(t_outer, 0.0);
  out.plateau_bound =
      eta * eta * (1.0 + c) * sigma_noise * sigma_noise / (eta * mu - alpha * alpha);
  out.eta = eta;
  out.alpha = alpha;
  out.c = c;
  out.sigma = sigma_noise;
  out.seeds = seeds;

  std::vector<double> sum_sq(t_outer, 0.0);
  for (std::size_t s = 0; s < seeds; ++s) {
    Rng rng(mix_seed(master_seed, s));
    Vector z = add(z_star, Vector(n, 1.0));
    for (std::size_t t = 0; t < t_outer; ++t) {
      const double half_dist = 0.5 * norm_sq(sub(z, z_star));
      out.mean_half_dist_sq[t] += half_dist;
      sum_sq[t] += half_dist * half_dist;
      Vector f_hat = op.eval(z);
      if (sigma_noise > 0.0)
        for (double& v : f_hat) v += rng.normal(0.0, coord_sd);
      Vector p = scale(f_hat, eta);
      if (alpha > 0.0) {
        Vector u(n);
        double nu = 0.0;
        do {
          for (double& v : u) v = rng.normal();
          nu = norm(u);
        } while (nu == 0.0);
        p = axpy(p, alpha * eta * norm(f_hat) / nu, u);
      }
      z = sub(z, p);
    }
  }
  const double ns = static_cast<double>(seeds);
  for (std::size_t t = 0; t < t_outer; ++t) {
    out.mean_half_dist_sq[t] /= ns;
    if (seeds > 1) {
      const double var =
          std::max(0.0, (sum_sq[t] - ns * out.mean_half_dist_sq[t] * out.mean_half_dist_sq[t]) /
                            (ns - 1.0));
      out.se_half_dist_sq[t] = std::sqrt(var / ns);
    }
  }
  return out;
}

}  // namespace hiddenvi
