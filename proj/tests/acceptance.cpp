// Acceptance suite: one check per release criterion, each printed as a
// single pass/fail line with its measured evidence.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <memory>
#include <sstream>
#include <vector>

#include "hiddenvi/counterexample.hpp"
#include "hiddenvi/csv.hpp"
#include "hiddenvi/driver.hpp"
#include "hiddenvi/errors.hpp"
#include "hiddenvi/experiments.hpp"
#include "hiddenvi/rl_pbe.hpp"
#include "hiddenvi/rng.hpp"

using namespace hiddenvi;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::shared_ptr<const ProductModel> pennies_model(double a11 = 0.5, double a21 = 1.0,
                                                  double a12 = 0.7, double a22 = 1.0) {
  return std::make_shared<ProductModel>(std::vector<std::shared_ptr<const PredictionModel>>{
      std::make_shared<ScalarSigmoidCelu>(a11, a21), std::make_shared<ScalarSigmoidCelu>(a12, a22)});
}

// ---------------------------------------------------------------- criterion 1
Outcome c1_counterexample_exactness() {
  Rng rng(1001);
  const CounterexampleSpec spec = CounterexampleSpec::make(0.1);
  double worst_alpha = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    Vector z{rng.normal(), rng.normal()};
    if (norm(z) < 1e-9) continue;
    worst_alpha = std::max(worst_alpha, std::fabs(measure_alpha(spec, z) - 1.0 / std::sqrt(2.0)));
  }
  if (worst_alpha > 1e-12) return {false, "alpha deviation " + format_g17(worst_alpha)};

  for (double eta : {0.01, 0.1, 1.0}) {
    const TrajectoryRecord rec = run_divergence(CounterexampleSpec::make(eta), {1.0, 0.0}, 500);
    const double factor = std::sqrt(1.0 + eta * eta);
    for (const TrajectoryRow& row : rec.rows)
      if (std::fabs(row.loss_ratio - factor) > 1e-9)
        return {false, "growth factor off at eta " + format_g17(eta)};
  }

  const TrajectoryRecord rec = run_divergence(spec, {1.0, 0.0}, 2000);
  const double growth = norm(rec.z_final);
  const double expected = std::pow(1.01, 1000.0);
  if (growth < 0.99 * expected || growth > 1.01 * expected)
    return {false, "2000-step growth " + format_g17(growth)};
  return {true, "alpha dev " + format_g17(worst_alpha) + ", growth " + format_g17(growth)};
}

// ---------------------------------------------------------------- criterion 2
Outcome c2_exact_step_contraction() {
  const PenniesOperator op;
  const double kappa_sq = 0.98665625;
  Vector z{0.9, 0.15};
  const Vector z_star = *op.solution();
  double worst = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const Vector z_next = exact_step(op, z, 0.01);
    const double before = norm_sq(sub(z, z_star));
    const double after = norm_sq(sub(z_next, z_star));
    worst = std::max(worst, after - kappa_sq * before);
    if (after > kappa_sq * before + 1e-10)
      return {false, "violation " + format_g17(after - kappa_sq * before) + " at step " +
                         std::to_string(t)};
    z = z_next;
  }
  return {true, "worst slack " + format_g17(worst)};
}

// ---------------------------------------------------------------- criterion 3
Outcome c3_alpha_descent_contraction() {
  const PenniesOperator pennies;
  const double mu = *pennies.monotonicity_constant();
  const double lip = *pennies.lipschitz_constant();
  const double alpha = 0.1;  // < mu / L = 0.184
  const double eta = 0.9 * rate_bounds(0.0, mu, lip, alpha, 0.0).eta_threshold();
  const double factor = rate_bounds(eta, mu, lip, alpha, 0.0).theorem1_factor;

  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(mix_seed(3003, seed));
    Matrix phi(2, 2);
    for (double& v : phi.values()) v = rng.normal();
    phi(0, 0) += 2.5;
    phi(1, 1) += 2.5;
    const auto model = std::make_shared<LinearModel>(phi);
    const AffineOperator op(pennies.b_matrix(), pennies.center(), DomainSpec::all_space(2));

    OuterConfig cfg;
    cfg.eta = eta;
    cfg.alpha = alpha;
    cfg.t_outer = 400;
    cfg.lstar_mode = LstarMode::Exact;
    cfg.strategy.kind = InnerStrategy::Kind::GN;
    cfg.strategy.stop = InnerStop::alpha({alpha, LstarMode::Exact, 100});
    const TrajectoryRecord rec = run_outer(model, op, {rng.normal(), rng.normal()}, cfg);
    if (rec.aborted) return {false, "run aborted: " + rec.abort_reason};
    for (std::size_t t = 0; t + 1 < rec.rows.size(); ++t)
      if (rec.rows[t + 1].dist_sq > factor * rec.rows[t].dist_sq + 1e-9)
        return {false, "factor violated at seed " + std::to_string(seed) + " t " +
                           std::to_string(t)};
  }
  std::ostringstream ss;
  ss << "eta " << format_g17(eta) << ", factor " << format_g17(factor) << ", 10 seeds";
  return {true, ss.str()};
}

// ---------------------------------------------------------------- criterion 4
Outcome c4_bias_lemma_audit() {
  const PenniesOperator op;
  const double eta = 0.1;
  const Vector f_star = op.eval(*op.solution());

  struct Setup {
    std::string name;
    InnerStrategy strategy;
  };
  std::vector<Setup> setups;
  {
    Setup gn{"gn1", {}};
    gn.strategy.kind = InnerStrategy::Kind::GN;
    gn.strategy.stop = InnerStop::fixed(1);
    setups.push_back(gn);
    for (std::size_t m : {std::size_t{1}, std::size_t{10}, std::size_t{100}}) {
      Setup gd{"gd" + std::to_string(m), {}};
      gd.strategy.kind = InnerStrategy::Kind::GD;
      gd.strategy.lr = 2.0;
      gd.strategy.stop = InnerStop::fixed(m);
      setups.push_back(gd);
    }
  }

  for (const Setup& setup : setups) {
    const auto model = pennies_model();
    Vector theta{1.25, 2.25};
    for (int t = 0; t < 2000; ++t) {
      const Vector z = model->forward(theta);
      const Vector f = op.eval(z);
      const SurrogateLoss loss = build_surrogate(model, theta, f, eta);
      const double anchor = loss.value(theta);

      const InnerResult inner = run_inner(loss, theta, setup.strategy, 0.0, anchor);
      theta = inner.theta;

      // exact projection infimum and the alpha achieved against it
      const Vector v = axpy(z, -eta, f);
      const Vector z_t_star = project(op.domain(), v);
      const double ls = 0.5 * norm_sq(sub(z_t_star, v));
      const double denom = anchor - ls;
      const double alpha_meas =
          denom <= 0.0 ? 0.0 : std::sqrt(std::max(0.0, (inner.final_loss - ls) / denom));

      if (!bias_check(model->forward(theta), z_t_star, f, f_star, alpha_meas, eta))
        return {false, setup.name + " violated at iteration " + std::to_string(t)};
    }
  }
  return {true, "gn1, gd1, gd10, gd100 over 2000 iterations each"};
}

// ---------------------------------------------------------------- criterion 5
std::size_t iters_to_threshold(const TrajectoryRecord& rec, double threshold) {
  for (const TrajectoryRow& row : rec.rows)
    if (row.dist_sq < threshold) return row.iter;
  return static_cast<std::size_t>(-1);
}

Outcome c5_pennies_convergence() {
  const PenniesOperator op;

  OuterConfig gn;
  gn.eta = 0.1;
  gn.t_outer = 10000;
  gn.strategy.kind = InnerStrategy::Kind::GN;
  gn.strategy.stop = InnerStop::fixed(1);
  const TrajectoryRecord rec = run_outer(pennies_model(), op, {1.25, 2.25}, gn);
  const std::size_t hit = iters_to_threshold(rec, 1e-8);
  if (hit == static_cast<std::size_t>(-1))
    return {false, "gn(1) never reached 1e-8 within 10^4 iterations"};

  std::size_t wins = 0;
  const std::size_t trials = 100;
  for (std::uint64_t s = 0; s < trials; ++s) {
    Rng rng(mix_seed(5005, s));
    const Vector theta0{rng.normal(0.0, 4.0), rng.normal(0.0, 4.0)};
    const double a11 = rng.uniform(-1.0, 1.0), a21 = rng.uniform(-1.0, 1.0);
    const double a12 = rng.uniform(-1.0, 1.0), a22 = rng.uniform(-1.0, 1.0);

    auto run_gd = [&](std::size_t m) {
      OuterConfig cfg;
      cfg.eta = 0.1;
      cfg.t_outer = 10000;
      cfg.strategy.kind = InnerStrategy::Kind::GD;
      cfg.strategy.lr = 5.0;
      cfg.strategy.stop = InnerStop::fixed(m);
      return iters_to_threshold(run_outer(pennies_model(a11, a21, a12, a22), op, theta0, cfg),
                                1e-8);
    };
    if (run_gd(10) < run_gd(1)) ++wins;
  }
  std::ostringstream ss;
  ss << "gn(1) hit 1e-8 at iteration " << hit << "; gd(10) beat gd(1) on " << wins << "/"
     << trials;
  return {hit <= 10000 && wins >= 90, ss.str()};
}

// ---------------------------------------------------------------- criterion 6
Outcome c6_rps_convergence() {
  std::size_t gn_converged = 0, gda_nonmonotone = 0;
  const std::size_t trials = 100;
  for (std::uint64_t s = 0; s < trials; ++s) {
    Rng rng(mix_seed(6006, s));
    auto layer = [&rng](std::size_t r, std::size_t c) {
      Matrix m(r, c);
      for (double& v : m.values()) v = rng.uniform(-1.0, 1.0);
      return m;
    };
    const auto model = std::make_shared<ProductModel>(
        std::vector<std::shared_ptr<const PredictionModel>>{
            std::make_shared<SoftmaxMlp>(layer(4, 5), layer(3, 4)),
            std::make_shared<SoftmaxMlp>(layer(4, 5), layer(3, 4))});
    Vector theta0(10);
    for (double& v : theta0) v = rng.normal();
    const RpsOperator op;

    OuterConfig gn;
    gn.eta = 0.1;
    gn.t_outer = 20000;
    gn.strategy.kind = InnerStrategy::Kind::GN;
    const TrajectoryRecord rec = run_outer(model, op, theta0, gn);
    if (!rec.aborted && iters_to_threshold(rec, 1e-6) != static_cast<std::size_t>(-1))
      ++gn_converged;

    OuterConfig gda;
    gda.eta = 0.1;
    gda.t_outer = 5000;
    gda.strategy.kind = InnerStrategy::Kind::GD;
    gda.strategy.lr = 1.0;
    gda.strategy.stop = InnerStop::fixed(1);
    const TrajectoryRecord rec2 = run_outer(model, op, theta0, gda);
    for (std::size_t t = 0; t + 1 < rec2.rows.size(); ++t) {
      if (rec2.rows[t + 1].dist_sq > rec2.rows[t].dist_sq * (1.0 + 1e-12)) {
        ++gda_nonmonotone;
        break;
      }
    }
  }
  std::ostringstream ss;
  ss << "gn(1) converged on " << gn_converged << "/100, gda non-monotone on " << gda_nonmonotone
     << "/100";
  return {gn_converged >= 80 && gda_nonmonotone >= 50, ss.str()};
}

// ---------------------------------------------------------------- criterion 7
Outcome c7_linear_pbe_gap() {
  const std::size_t runs = 200;
  const std::vector<std::size_t> inner_counts{1, 5, 20};
  const std::size_t t_outer = 300;
  const std::size_t burn_in = 50;

  std::vector<std::vector<double>> mean_gap(inner_counts.size(),
                                            std::vector<double>(t_outer, 0.0));
  for (std::size_t mi = 0; mi < inner_counts.size(); ++mi) {
    nlohmann::json j = {{"experiment", "pbe-linear"},
                        {"seeds", 1},
                        {"params", {{"inner_steps", inner_counts[mi]}, {"t_outer", t_outer}}}};
    const ExperimentConfig cfg = ExperimentConfig::from_json(j);
    for (std::size_t r = 0; r < runs; ++r) {
      ExperimentConfig run_cfg = cfg;
      run_cfg.master_seed = 7007;
      const TrajectoryRecord rec = run_experiment_once(run_cfg, r);
      if (rec.rows.size() != t_outer) return {false, "short run"};
      for (std::size_t t = 0; t < t_outer; ++t)
        mean_gap[mi][t] += std::sqrt(rec.rows[t].dist_sq) / static_cast<double>(runs);
    }
  }

  for (std::size_t t = burn_in; t < t_outer; ++t) {
    if (!(mean_gap[0][t] >= mean_gap[1][t] && mean_gap[1][t] >= mean_gap[2][t]))
      return {false, "ordering violated at iteration " + std::to_string(t + 1)};
  }
  const double terminal_ratio = mean_gap[2][t_outer - 1] / mean_gap[0][t_outer - 1];
  std::ostringstream ss;
  ss << "terminal gaps m1 " << format_g17(mean_gap[0][t_outer - 1]) << ", m20 "
     << format_g17(mean_gap[2][t_outer - 1]) << " (ratio " << format_g17(terminal_ratio) << ")";
  return {terminal_ratio < 0.10, ss.str()};
}

// ---------------------------------------------------------------- criterion 8
Outcome c8_estimator_identities() {
  const MarkovChain mc = make_slow_mixing_chain(25, 0.4, 88, 0.9);
  const FeatureMap fm = make_feature_map(25, 5, 89);
  Rng rng(90);
  for (std::size_t len : {std::size_t{1}, std::size_t{10}, std::size_t{1000}}) {
    const auto traj = simulate_trajectory(mc, 0, len, 91 + len);
    EstimatorState est = EstimatorState::zero(25, 5);
    for (const Transition& tr : traj)
      est = update_estimators(est, fm, tr.state, tr.next_state, tr.reward, mc.gamma);
    const RebuiltEstimators reb = rebuild_from_counts(est, fm, mc.gamma);
    const double err = std::max({max_abs(sub(est.d_hat, reb.d)), max_abs(sub(est.c_hat, reb.c)),
                                 norm(sub(est.r_hat, reb.r))});
    if (err > 1e-12)
      return {false, "identity error " + format_g17(err) + " at length " + std::to_string(len)};
  }

  const auto traj = simulate_trajectory(mc, 0, 2000, 92);
  EstimatorState est = EstimatorState::zero(25, 5);
  for (const Transition& tr : traj)
    est = update_estimators(est, fm, tr.state, tr.next_state, tr.reward, mc.gamma);
  double worst = 0.0;
  for (int rep = 0; rep < 50; ++rep) {
    Vector theta(5);
    for (double& v : theta) v = rng.normal();
    const Vector upd = bertsekas_update(theta, est, 0.0);
    worst = std::max(worst, norm(stochastic_linear_surrogate_grad(upd, theta, est)));
  }
  if (worst > 1e-10) return {false, "gradient-zero mismatch " + format_g17(worst)};
  return {true, "identities to 1e-12; gradient zero within " + format_g17(worst)};
}

// ---------------------------------------------------------------- criterion 9
Outcome c9_jacobians() {
  Rng rng(9009);
  auto rand_mat = [&rng](std::size_t r, std::size_t c) {
    Matrix m(r, c);
    for (double& v : m.values()) v = rng.normal();
    return m;
  };
  std::vector<std::pair<std::string, std::shared_ptr<const PredictionModel>>> zoo;
  zoo.emplace_back("linear", std::make_shared<LinearModel>(rand_mat(5, 3)));
  zoo.emplace_back("scalar", std::make_shared<ScalarSigmoidCelu>(0.5, 1.0));
  zoo.emplace_back("softmax", std::make_shared<SoftmaxMlp>(rand_mat(4, 5), rand_mat(3, 4)));
  zoo.emplace_back("product", pennies_model());
  zoo.emplace_back("value-net", std::make_shared<MlpValueNet>(rand_mat(12, 4), 8));

  double worst = 0.0;
  std::string worst_name;
  for (const auto& [name, model] : zoo) {
    for (int rep = 0; rep < 20; ++rep) {
      Vector theta(model->param_dim());
      for (double& v : theta) v = rng.normal();
      const Matrix analytic = model->jacobian(theta);
      Matrix fd(model->output_dim(), model->param_dim());
      Vector tp = theta, tm = theta;
      for (std::size_t k = 0; k < theta.size(); ++k) {
        tp[k] += 1e-5;
        tm[k] -= 1e-5;
        const Vector fp = model->forward(tp);
        const Vector fmv = model->forward(tm);
        for (std::size_t i = 0; i < model->output_dim(); ++i)
          fd(i, k) = (fp[i] - fmv[i]) / 2e-5;
        tp[k] = theta[k];
        tm[k] = theta[k];
      }
      double num = 0.0, den = 1.0;
      for (std::size_t i = 0; i < analytic.values().size(); ++i) {
        num = std::max(num, std::fabs(analytic.values()[i] - fd.values()[i]));
        den = std::max(den, std::fabs(analytic.values()[i]));
      }
      if (num / den > worst) {
        worst = num / den;
        worst_name = name;
      }
    }
  }
  return {worst <= 1e-5, "worst rel err " + format_g17(worst) + " (" + worst_name + ")"};
}

// --------------------------------------------------------------- criterion 10
Outcome c10_pl_composition() {
  Rng rng(1010);
  Matrix phi(5, 5);
  for (double& v : phi.values()) v = rng.normal();
  for (std::size_t i = 0; i < 5; ++i) phi(i, i) += 3.0;
  const auto model = std::make_shared<LinearModel>(phi);
  const double sigma_min = singular_bounds(*model, Vector(5, 0.0)).first;
  Vector target(5);
  for (double& v : target) v = rng.normal();
  const SurrogateLoss loss(model, target, 1.0);
  const double inf_value = loss.value(pinv_solve(phi, target));

  std::size_t violations = 0;
  for (int rep = 0; rep < 1000; ++rep) {
    Vector theta(5);
    for (double& v : theta) v = rng.normal(0.0, 2.0);
    const double lhs = norm_sq(loss.gradient(theta));
    const double rhs = 2.0 * sigma_min * sigma_min * (loss.value(theta) - inf_value);
    if (lhs < rhs) ++violations;
  }
  return {violations == 0, std::to_string(violations) + " violations over 1000 draws"};
}

// --------------------------------------------------------------- criterion 11
Outcome c11_stochastic_plateau() {
  const std::size_t n = 2;
  const AffineOperator op(Matrix::identity(n), Vector(n, 0.0), DomainSpec::all_space(n));
  const double eta = 0.05, alpha = 0.0, c = 2.0, sigma = 1.0;
  const std::size_t seeds = 1000, t_outer = 400;
  const StochasticAuditSummary s =
      stochastic_audit(op, eta, alpha, c, sigma, seeds, t_outer, 1111);

  const double bound = s.plateau_bound;  // eta^2 (1+c) sigma^2 / (eta mu)
  double steady = 0.0;
  for (std::size_t t = t_outer - 50; t < t_outer; ++t) steady += s.mean_half_dist_sq[t];
  steady /= 50.0;
  if (steady > 2.0 * bound)
    return {false, "steady state " + format_g17(steady) + " > 2x bound " + format_g17(bound)};

  // pre-plateau decay: per-step factor within 3 standard errors of (1 - eta mu)
  const double target_factor = 1.0 - eta * 1.0;
  for (std::size_t t = 0; t < 30; ++t) {
    const double ratio = s.mean_half_dist_sq[t + 1] / s.mean_half_dist_sq[t];
    const double se = s.se_half_dist_sq[t + 1] / s.mean_half_dist_sq[t] +
                      ratio * s.se_half_dist_sq[t] / s.mean_half_dist_sq[t];
    if (ratio > target_factor + 3.0 * se)
      return {false, "decay factor " + format_g17(ratio) + " at step " + std::to_string(t)};
  }
  std::ostringstream ss;
  ss << "steady state " << format_g17(steady) << " vs bound " << format_g17(bound);
  return {true, ss.str()};
}

// --------------------------------------------------------------- criterion 12
Outcome c12_quasi_fejer() {
  const PenniesOperator pennies;
  const AffineOperator op(pennies.b_matrix(), pennies.center(), DomainSpec::all_space(2));
  const double eta = 0.05;  // inside the contraction regime (eta < 2 mu / L^2)

  std::vector<double> decaying(10000);
  for (std::size_t t = 0; t < decaying.size(); ++t)
    decaying[t] = 0.5 / (static_cast<double>(t + 1) * static_cast<double>(t + 1));
  const TrajectoryRecord dec = quasi_fejer_run(op, eta, decaying, 10000, 12);
  const double final_dist = std::sqrt(dec.rows.back().loss_final);
  if (final_dist >= 1e-4) return {false, "decaying errors stalled at " + format_g17(final_dist)};

  const TrajectoryRecord con =
      quasi_fejer_run(op, eta, std::vector<double>(10000, 0.5), 10000, 13);
  double tail_min = 1e300;
  for (std::size_t t = 5000; t < con.rows.size(); ++t)
    tail_min = std::min(tail_min, std::sqrt(con.rows[t].dist_sq));
  if (tail_min <= 0.1) return {false, "constant errors did not plateau above 0.1"};

  std::ostringstream ss;
  ss << "decaying final dist " << format_g17(final_dist) << ", constant tail min "
     << format_g17(tail_min);
  return {true, ss.str()};
}

// --------------------------------------------------------------- criterion 13
Outcome c13_nonlinear_ordering() {
  const SyntheticMdp mdp = make_garnet_mdp(50, 5, 8, 0.9, 13);
  const MlpValueNet model(mdp.state_features, 32);
  std::vector<std::size_t> states(50);
  for (std::size_t i = 0; i < 50; ++i) states[i] = i;
  const Vector oracle = mc_value_oracle(mdp, states, 100, horizon_for(0.9), 17);

  const std::size_t seeds = 10, t_outer = 200, burn_in = 30;
  std::vector<double> mean_td(t_outer, 0.0), mean_surr(t_outer, 0.0);

  for (std::uint64_t s = 0; s < seeds; ++s) {
    NonlinearCfg cfg;
    cfg.batch = 64;
    cfg.t_outer = t_outer;
    cfg.lr = 0.05;
    cfg.seed = mix_seed(1313, s);
    cfg.eval_states = states;
    cfg.eval_targets = oracle;

    Rng init(mix_seed(cfg.seed, 0xD1));
    const Vector theta0 = model.init_theta(init);

    cfg.inner_steps = 1;
    const TrajectoryRecord td = td0_batch(model, mdp, theta0, cfg);
    cfg.inner_steps = 10;
    const TrajectoryRecord surr = alg2_inner(model, mdp, theta0, cfg);
    if (td.rows.size() != t_outer || surr.rows.size() != t_outer)
      return {false, "a run aborted"};
    for (std::size_t t = 0; t < t_outer; ++t) {
      mean_td[t] += td.rows[t].dist_sq / static_cast<double>(seeds);
      mean_surr[t] += surr.rows[t].dist_sq / static_cast<double>(seeds);
    }
  }

  std::size_t wins = 0, checkpoints = 0;
  for (std::size_t t = burn_in; t < t_outer; ++t) {
    ++checkpoints;
    if (mean_surr[t] <= mean_td[t]) ++wins;
  }

  // one-step equivalence with the reference TD(0) implementation
  NonlinearCfg eq;
  eq.batch = 32;
  eq.inner_steps = 1;
  eq.t_outer = 25;
  eq.lr = 0.05;
  eq.seed = 0xEE;
  Rng init(mix_seed(0xEE, 0xD1));
  const Vector theta0 = model.init_theta(init);
  const TrajectoryRecord a = alg2_inner(model, mdp, theta0, eq);
  const TrajectoryRecord b = td0_batch(model, mdp, theta0, eq);
  const double eq_err = norm(sub(a.theta_final, b.theta_final));
  if (eq_err > 1e-12) return {false, "one-step equivalence error " + format_g17(eq_err)};

  std::ostringstream ss;
  ss << "surrogate <= td0 at " << wins << "/" << checkpoints
     << " checkpoints; m=1 equivalence err " << format_g17(eq_err);
  return {wins * 5 >= checkpoints * 4, ss.str()};
}

// --------------------------------------------------------------- criterion 14
Outcome c14_gn_equals_phgd() {
  Rng rng(1414);
  auto rand_mat = [&rng](std::size_t r, std::size_t c) {
    Matrix m(r, c);
    for (double& v : m.values()) v = rng.normal();
    return m;
  };
  auto layer = [&rng](std::size_t r, std::size_t c) {
    Matrix m(r, c);
    for (double& v : m.values()) v = rng.uniform(-1.0, 1.0);
    return m;
  };
  std::vector<std::pair<std::string, std::shared_ptr<const PredictionModel>>> zoo;
  zoo.emplace_back("pennies", pennies_model());
  zoo.emplace_back("rps", std::make_shared<ProductModel>(
                              std::vector<std::shared_ptr<const PredictionModel>>{
                                  std::make_shared<SoftmaxMlp>(layer(4, 5), layer(3, 4)),
                                  std::make_shared<SoftmaxMlp>(layer(4, 5), layer(3, 4))}));
  zoo.emplace_back("linear", std::make_shared<LinearModel>(rand_mat(6, 4)));
  zoo.emplace_back("value-net", std::make_shared<MlpValueNet>(rand_mat(30, 6), 16));

  double worst = 0.0;
  for (const auto& [name, model] : zoo) {
    for (int rep = 0; rep < 100; ++rep) {
      Vector theta(model->param_dim());
      for (double& v : theta) v = rng.normal();
      Vector f(model->output_dim());
      for (double& v : f) v = rng.normal();
      const double eta = 0.1;
      const SurrogateLoss loss = build_surrogate(model, theta, f, eta);
      Vector phgd;
      try {
        phgd = sub(theta, scale(pinv_solve(model->jacobian(theta), f), eta));
      } catch (const ZeroMatrix&) {
        continue;
      }
      worst = std::max(worst, norm(sub(gn_step(loss, theta), phgd)));
    }
  }
  return {worst <= 1e-12, "worst gap " + format_g17(worst)};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    std::string name;
    std::function<Outcome()> fn;
  };
  const std::vector<Criterion> criteria = {
      {1, "counterexample exactness", c1_counterexample_exactness},
      {2, "exact-step contraction", c2_exact_step_contraction},
      {3, "alpha-descent contraction audit", c3_alpha_descent_contraction},
      {4, "bias-lemma audit", c4_bias_lemma_audit},
      {5, "pennies convergence", c5_pennies_convergence},
      {6, "rps convergence", c6_rps_convergence},
      {7, "linear value-prediction gap ordering", c7_linear_pbe_gap},
      {8, "estimator identities", c8_estimator_identities},
      {9, "jacobian correctness", c9_jacobians},
      {10, "pl composition", c10_pl_composition},
      {11, "stochastic plateau", c11_stochastic_plateau},
      {12, "quasi-fejer convergence", c12_quasi_fejer},
      {13, "nonlinear value-prediction ordering", c13_nonlinear_ordering},
      {14, "gn step is the preconditioned update", c14_gn_equals_phgd},
  };

  int failures = 0;
  for (const Criterion& c : criteria) {
    const auto tic = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.fn();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - tic).count();
    std::printf("[%s] criterion %2d: %s — %s (%.1f s)\n", out.pass ? "PASS" : "FAIL", c.id,
                c.name.c_str(), out.detail.c_str(), secs);
    std::fflush(stdout);
    if (!out.pass) ++failures;
  }
  if (failures == 0)
    std::printf("all %zu criteria passed\n", criteria.size());
  else
    std::printf("%d criteria FAILED\n", failures);
  return failures == 0 ? 0 : 1;
}
