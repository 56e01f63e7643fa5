#pragma once

#include <cstdint>
#include <functional>
#include <memory>

#include "hiddenvi/record.hpp"
#include "hiddenvi/solvers.hpp"
#include "hiddenvi/vi_problems.hpp"

namespace hiddenvi {

struct OuterConfig {
  double eta = 0.1;
  double alpha = 0.0;
  std::size_t t_outer = 1000;
  InnerStrategy strategy{};
  LstarMode lstar_mode = LstarMode::Zero;
  std::uint64_t seed = 0;
  /// When set, replaces the inner loop: theta_{t+1} = scripted(l_t, theta_t).
  std::function<Vector(const SurrogateLoss&, const Vector&)> scripted_update;
  /// Record per-iteration wall time (measured values make CSV bytes
  /// run-dependent; off by default so reruns are byte-identical).
  bool measure_wall_time = false;
};

/// Outer loop: evaluate F(g(theta_t)), build the anchored surrogate, run the
/// inner optimizer, repeat. On numerical blowup the partial record is
/// returned with aborted = true.
TrajectoryRecord run_outer(std::shared_ptr<const PredictionModel> model, const VIOperator& op,
                           const Vector& theta_init, const OuterConfig& cfg);

/// One exact projected step Pi(z - eta F(z)).
Vector exact_step(const VIOperator& op, const Vector& z, double eta);

/// ||z_next - z_t_star|| <= alpha * eta * ||f_t - f_star|| with 1e-9 slack.
bool bias_check(const Vector& z_next, const Vector& z_t_star, const Vector& f_t,
                const Vector& f_star, double alpha, double eta);

struct RateBounds {
  double kappa_sq;          // 1 - 2 eta mu + eta^2 L^2
  double theorem1_factor;   // 1 - 2 eta mu + 2 alpha eta L + (1 + alpha^2) eta^2 L^2
  double stoch_factor;      // 1 - eta mu + alpha^2
  double noise_term;        // eta^2 (1 + c) sigma^2 with sigma = 1
  double c;
  double eta, mu, lip, alpha;

  /// alpha < mu / L (strict).
  bool condition1() const { return alpha < mu / lip; }
  /// alpha <= C eta^p.
  bool condition2(double big_c, double p) const;
  /// 2 (mu - alpha L) / ((1 + alpha^2) L^2), the contraction threshold on eta.
  double eta_threshold() const;
};

RateBounds rate_bounds(double eta, double mu, double lip, double alpha, double c);

/// Contraction iterates with injected errors: z_{t+1} = exact_step(z_t) +
/// eps_t * (random unit vector). Requires kappa^2 < 1 for (op, eta).
/// Rows record dist_sq at z_t, loss_anchor/final the squared distances before
/// and after the step, so loss_ratio is the per-step contraction estimate.
TrajectoryRecord quasi_fejer_run(const AffineOperator& op, double eta,
                                 const std::vector<double>& error_schedule, std::size_t t_outer,
                                 std::uint64_t seed);

struct StochasticAuditSummary {
  /// Empirical mean of 1/2 ||z_t - z*||^2 per iteration, across seeds.
  std::vector<double> mean_half_dist_sq;
  /// Standard error of that mean per iteration.
  std::vector<double> se_half_dist_sq;
  /// eta^2 (1 + c) sigma^2 / (eta mu - alpha^2).
  double plateau_bound = 0.0;
  double eta = 0.0, alpha = 0.0, c = 0.0, sigma = 0.0;
  std::size_t seeds = 0;
};

/// Simulates z_{t+1} = z_t - p_t with p_t = eta F_xi(z_t) + alpha eta
/// ||F_xi(z_t)|| u_t (u_t a random unit vector), the extreme case of the
/// alpha-expected-descent construction; F_xi = F + Gaussian noise with total
/// variance sigma^2. Unconstrained domains only. Throws InvalidRegime unless
/// eta mu > alpha^2.
StochasticAuditSummary stochastic_audit(const AffineOperator& op, double eta, double alpha,
                                        double c, double sigma_noise, std::size_t seeds,
                                        std::size_t t_outer, std::uint64_t master_seed);

}  // namespace hiddenvi
