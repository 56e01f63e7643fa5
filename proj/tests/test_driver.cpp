#include <doctest.h>

#include <cmath>
#include <memory>

#include "hiddenvi/counterexample.hpp"
#include "hiddenvi/driver.hpp"
#include "hiddenvi/errors.hpp"
#include "hiddenvi/rng.hpp"

using namespace hiddenvi;

namespace {

std::shared_ptr<const ProductModel> pennies_model() {
  return std::make_shared<ProductModel>(std::vector<std::shared_ptr<const PredictionModel>>{
      std::make_shared<ScalarSigmoidCelu>(0.5, 1.0), std::make_shared<ScalarSigmoidCelu>(0.7, 1.0)});
}

}  // namespace

TEST_CASE("exact_step") {
  SUBCASE("unconstrained affine step") {
    const AffineOperator op(Matrix::identity(2), {0.0, 0.0}, DomainSpec::all_space(2));
    const Vector z = exact_step(op, {1.0, 0.0}, 0.5);
    CHECK(z[0] == doctest::Approx(0.5));
    CHECK(z[1] == doctest::Approx(0.0));
  }
  SUBCASE("box projection clamps the step") {
    // step target (1-eta) z + eta c = (-0.2, 0.5) for z = (0.1, 0.1), eta = 0.5
    const AffineOperator op(Matrix::identity(2), {-0.5, 0.9},
                            DomainSpec::box({0.0, 0.0}, {1.0, 1.0}));
    const Vector z = exact_step(op, {0.1, 0.1}, 0.5);
    CHECK(z[0] == doctest::Approx(0.0));
    CHECK(z[1] == doctest::Approx(0.5));
  }
  SUBCASE("pennies contraction at eta 0.01") {
    const PenniesOperator op;
    const double kappa_sq =
        rate_bounds(0.01, *op.monotonicity_constant(), *op.lipschitz_constant(), 0.0, 0.0)
            .kappa_sq;
    CHECK(kappa_sq == doctest::Approx(0.98665625).epsilon(1e-12));
    Vector z{0.9, 0.2};
    const Vector z_star = *op.solution();
    for (int t = 0; t < 200; ++t) {
      const Vector z_next = exact_step(op, z, 0.01);
      CHECK(norm_sq(sub(z_next, z_star)) <= kappa_sq * norm_sq(sub(z, z_star)) + 1e-10);
      z = z_next;
    }
  }
}

TEST_CASE("bias_check") {
  CHECK(bias_check({0.3, 0.4}, {0.3, 0.4}, {1.0, 1.0}, {0.0, 0.0}, 0.0, 0.1));
  CHECK_FALSE(bias_check({0.3, 0.5}, {0.3, 0.4}, {1.0, 1.0}, {0.0, 0.0}, 0.0, 0.1));
}

TEST_CASE("rate_bounds") {
  const RateBounds rb = rate_bounds(0.01, 0.75, std::sqrt(16.5625), 0.0, 0.0);
  CHECK(rb.kappa_sq == doctest::Approx(0.98665625).epsilon(1e-14));
  CHECK(rb.theorem1_factor == doctest::Approx(rb.kappa_sq).epsilon(1e-14));

  const double mu = 0.75, lip = std::sqrt(16.5625);
  CHECK_FALSE(rate_bounds(0.01, mu, lip, mu / lip, 0.0).condition1());
  CHECK(rate_bounds(0.01, mu, lip, mu / lip - 1e-6, 0.0).condition1());

  CHECK(rate_bounds(0.1, 1.0, 1.0, 0.05, 0.0).condition2(0.5, 1.0));   // 0.05 <= 0.05
  CHECK_FALSE(rate_bounds(0.1, 1.0, 1.0, 0.06, 0.0).condition2(0.5, 1.0));

  const RateBounds stoch = rate_bounds(0.05, 1.0, 1.0, 0.1, 2.0);
  CHECK(stoch.stoch_factor == doctest::Approx(1.0 - 0.05 + 0.01));
  CHECK(stoch.noise_term == doctest::Approx(0.0025 * 3.0));
  CHECK_THROWS_AS(rate_bounds(0.1, 0.0, 1.0, 0.0, 0.0), ConfigError);
}

TEST_CASE("run_outer with exact inner minimization tracks the projected-gradient path") {
  Rng rng(101);
  Matrix phi(2, 2);
  for (double& v : phi.values()) v = rng.normal();
  phi(0, 0) += 2.0;
  phi(1, 1) += 2.0;
  const auto model = std::make_shared<LinearModel>(phi);
  const PenniesOperator pennies;
  const AffineOperator op(pennies.b_matrix(), pennies.center(), DomainSpec::all_space(2));

  OuterConfig cfg;
  cfg.eta = 0.05;
  cfg.t_outer = 50;
  cfg.strategy.kind = InnerStrategy::Kind::GN;
  const Vector theta0{0.8, -0.3};
  const TrajectoryRecord rec = run_outer(model, op, theta0, cfg);

  Vector z = model->forward(theta0);
  for (const TrajectoryRow& row : rec.rows) {
    CHECK(row.dist_sq == doctest::Approx(norm_sq(sub(z, *op.solution()))).epsilon(1e-10));
    z = exact_step(op, z, cfg.eta);
  }
  CHECK(norm(sub(rec.z_final, z)) <= 1e-10);
}

TEST_CASE("run_outer on pennies with one gn step converges") {
  // eta must sit in the exact-step contraction regime (eta < 2 mu / L^2);
  // at eta = 0.1 the underlying map is expansive and the one-step
  // linearization runs into sigmoid saturation.
  const PenniesOperator op;
  OuterConfig cfg;
  cfg.eta = 0.05;
  cfg.t_outer = 10000;
  cfg.strategy.kind = InnerStrategy::Kind::GN;
  cfg.strategy.stop = InnerStop::fixed(1);
  const TrajectoryRecord rec = run_outer(pennies_model(), op, {1.25, 2.25}, cfg);
  double best = 1e300;
  for (const TrajectoryRow& row : rec.rows) best = std::min(best, row.dist_sq);
  CHECK(best < 1e-8);
}

TEST_CASE("run_outer with the scripted biased direction diverges monotonically") {
  const auto model = std::make_shared<LinearModel>(Matrix::identity(2));
  const Matrix f = Matrix::from_rows({{1.0, 1.0}, {-1.0, 1.0}});
  const AffineOperator op(f, {0.0, 0.0}, DomainSpec::all_space(2));
  const Matrix p = build_p(0.1);

  OuterConfig cfg;
  cfg.eta = 0.1;
  cfg.t_outer = 200;
  cfg.scripted_update = [&p](const SurrogateLoss&, const Vector& theta) {
    return sub(theta, mat_vec(p, theta));
  };
  const TrajectoryRecord rec = run_outer(model, op, {1.0, 0.0}, cfg);
  for (std::size_t t = 0; t + 1 < rec.rows.size(); ++t)
    CHECK(rec.rows[t + 1].dist_sq > rec.rows[t].dist_sq);
}

TEST_CASE("run_outer aborts cleanly on blowup") {
  const auto model = std::make_shared<LinearModel>(Matrix::identity(2));
  const AffineOperator op(Matrix::identity(2), {0.0, 0.0}, DomainSpec::all_space(2));
  OuterConfig cfg;
  cfg.eta = 0.1;
  cfg.t_outer = 400;
  cfg.strategy.kind = InnerStrategy::Kind::GD;
  cfg.strategy.lr = 60.0;  // far beyond the stability threshold
  const TrajectoryRecord rec = run_outer(model, op, {1.0, 1.0}, cfg);
  CHECK(rec.aborted);
  CHECK(rec.rows.size() < 400);
}

TEST_CASE("quasi_fejer_run") {
  const PenniesOperator pennies;
  const AffineOperator op(pennies.b_matrix(), pennies.center(), DomainSpec::all_space(2));

  SUBCASE("eta 0.1 is outside the contraction regime for this operator") {
    CHECK_THROWS_AS(quasi_fejer_run(op, 0.1, std::vector<double>(10, 0.0), 10, 1), InvalidRegime);
  }
  SUBCASE("zero errors contract at exactly kappa^2") {
    const double kappa_sq =
        rate_bounds(0.05, *op.monotonicity_constant(), *op.lipschitz_constant(), 0.0, 0.0)
            .kappa_sq;
    const TrajectoryRecord rec =
        quasi_fejer_run(op, 0.05, std::vector<double>(100, 0.0), 100, 1);
    for (const TrajectoryRow& row : rec.rows)
      CHECK(std::fabs(row.loss_ratio - kappa_sq) <= 1e-10);
  }
  SUBCASE("decaying errors reach a tiny neighbourhood") {
    std::vector<double> eps(10000);
    for (std::size_t t = 0; t < eps.size(); ++t)
      eps[t] = 0.5 / (static_cast<double>(t + 1) * static_cast<double>(t + 1));
    const TrajectoryRecord rec = quasi_fejer_run(op, 0.05, eps, 10000, 2);
    CHECK(std::sqrt(rec.rows.back().loss_final) < 1e-4);
  }
  SUBCASE("constant errors plateau away from the solution") {
    const TrajectoryRecord rec =
        quasi_fejer_run(op, 0.05, std::vector<double>(2000, 0.5), 2000, 3);
    double tail_min = 1e300;
    for (std::size_t t = 1000; t < rec.rows.size(); ++t)
      tail_min = std::min(tail_min, std::sqrt(rec.rows[t].dist_sq));
    CHECK(tail_min > 0.1);
  }
}

TEST_CASE("stochastic_audit") {
  const AffineOperator op(Matrix::identity(2), {0.0, 0.0}, DomainSpec::all_space(2));

  SUBCASE("noiseless case decays deterministically at (1 - eta)^2") {
    const StochasticAuditSummary s = stochastic_audit(op, 0.05, 0.0, 2.0, 0.0, 3, 50, 11);
    const double factor = (1.0 - 0.05) * (1.0 - 0.05);
    for (std::size_t t = 0; t + 1 < s.mean_half_dist_sq.size(); ++t)
      CHECK(s.mean_half_dist_sq[t + 1] ==
            doctest::Approx(factor * s.mean_half_dist_sq[t]).epsilon(1e-10));
  }
  SUBCASE("invalid regime is rejected") {
    CHECK_THROWS_AS(stochastic_audit(op, 0.05, 0.5, 2.0, 1.0, 2, 10, 1), InvalidRegime);
  }
  SUBCASE("plateau bound formula") {
    const StochasticAuditSummary s = stochastic_audit(op, 0.05, 0.0, 2.0, 1.0, 2, 10, 1);
    CHECK(s.plateau_bound == doctest::Approx(0.05 * 0.05 * 3.0 / 0.05));
  }
}
