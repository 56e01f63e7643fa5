#include "hiddenvi/solvers.hpp"

#include <cmath>

#include "hiddenvi/errors.hpp"

namespace hiddenvi {

namespace {

void check_finite(const Vector& v, const char* who) {
  if (!all_finite(v)) throw NumericalBlowup(std::string(who) + ": non-finite values");
}

// Weighted residual pieces for the Gauss-Newton family: with a diagonal
// weight W the normal equations use W^{1/2} Dg and W^{1/2} r.
struct GnSystem {
  Matrix j;
  Vector r;
};

GnSystem gn_system(const SurrogateLoss& s, const Vector& theta) {
  GnSystem sys{s.model().jacobian(theta), s.residual(theta)};
  if (s.weight()) {
    const Vector& w = *s.weight();
    for (std::size_t i = 0; i < sys.j.rows(); ++i) {
      const double sw = std::sqrt(w[i]);
      for (std::size_t k = 0; k < sys.j.cols(); ++k) sys.j(i, k) *= sw;
      sys.r[i] *= sw;
    }
  }
  return sys;
}

}  // namespace

Vector gd_step(const ScalarObjective& s, const Vector& theta, double lr) {
  if (lr <= 0.0) throw ConfigError("gd_step: lr must be positive");
  const Vector g = s.gradient(theta);
  check_finite(g, "gd_step");
  return axpy(theta, -lr, g);
}

Vector gn_step(const SurrogateLoss& s, const Vector& theta, double tol) {
  const GnSystem sys = gn_system(s, theta);
  if (norm_sq(sys.r) == 0.0) return theta;
  const Vector dir = pinv_solve(sys.j, sys.r, tol);
  check_finite(dir, "gn_step");
  return sub(theta, dir);
}

Vector dgn_step(const SurrogateLoss& s, const Vector& theta, double eta_gn, double tol) {
  if (eta_gn <= 0.0 || eta_gn > 1.0) throw ConfigError("dgn_step: eta_gn must be in (0, 1]");
  const GnSystem sys = gn_system(s, theta);
  if (norm_sq(sys.r) == 0.0) return theta;
  const Vector dir = pinv_solve(sys.j, sys.r, tol);
  check_finite(dir, "dgn_step");
  return axpy(theta, -eta_gn, dir);
}

Vector lm_step(const SurrogateLoss& s, const Vector& theta, double lambda) {
  if (lambda <= 0.0) throw ConfigError("lm_step: lambda must be positive");
  const GnSystem sys = gn_system(s, theta);
  Matrix a = gram(sys.j);
  for (std::size_t i = 0; i < a.rows(); ++i) a(i, i) += lambda;
  const Vector dir = solve_spd(a, tmat_vec(sys.j, sys.r));
  check_finite(dir, "lm_step");
  return sub(theta, dir);
}

std::pair<Vector, AdamState> adamw_step(const ScalarObjective& s, const Vector& theta,
                                        AdamState state, const AdamWParams& hyper) {
  if (state.m.size() != theta.size() || state.v.size() != theta.size())
    throw DimensionMismatch("adamw_step: state dimension mismatch");
  const Vector g = s.gradient(theta);
  check_finite(g, "adamw_step");

  state.step_count += 1;
  const double t = static_cast<double>(state.step_count);
  const double bc1 = 1.0 - std::pow(hyper.beta1, t);
  const double bc2 = 1.0 - std::pow(hyper.beta2, t);

  Vector out(theta.size());
  for (std::size_t i = 0; i < theta.size(); ++i) {
    state.m[i] = hyper.beta1 * state.m[i] + (1.0 - hyper.beta1) * g[i];
    state.v[i] = hyper.beta2 * state.v[i] + (1.0 - hyper.beta2) * g[i] * g[i];
    const double m_hat = state.m[i] / bc1;
    const double v_hat = state.v[i] / bc2;
    double x = theta[i] * (1.0 - hyper.lr * hyper.weight_decay);
    x -= hyper.lr * m_hat / (std::sqrt(v_hat) + hyper.eps);
    out[i] = x;
  }
  return {std::move(out), std::move(state)};
}

namespace {

Vector one_step(const ScalarObjective& s, const Vector& theta, const InnerStrategy& st,
                AdamState& adam) {
  switch (st.kind) {
    case InnerStrategy::Kind::GD:
      return gd_step(s, theta, st.lr);
    case InnerStrategy::Kind::AdamW: {
      auto [next, ns] = adamw_step(s, theta, std::move(adam), st.adamw);
      adam = std::move(ns);
      return next;
    }
    case InnerStrategy::Kind::GN:
    case InnerStrategy::Kind::DGN:
    case InnerStrategy::Kind::LM: {
      const auto* ls = dynamic_cast<const SurrogateLoss*>(&s);
      if (ls == nullptr)
        throw UnsupportedModel("run_inner: Jacobian-based steps need a least-squares surrogate");
      if (st.kind == InnerStrategy::Kind::GN) return gn_step(*ls, theta, st.pinv_tol);
      if (st.kind == InnerStrategy::Kind::DGN) return dgn_step(*ls, theta, st.eta_gn, st.pinv_tol);
      return lm_step(*ls, theta, st.lambda);
    }
  }
  return theta;
}

}  // namespace

InnerResult run_inner(const ScalarObjective& s, const Vector& theta_start,
                      const InnerStrategy& strategy, double lstar_value, double loss_anchor) {
  InnerResult res;
  res.theta = theta_start;
  AdamState adam = AdamState::zero(theta_start.size());

  if (strategy.stop.kind == InnerStop::Kind::FixedSteps) {
    double last = loss_anchor;
    for (std::size_t m = 0; m < strategy.stop.fixed_steps; ++m) {
      res.theta = one_step(s, res.theta, strategy, adam);
      ++res.steps_taken;
      ++res.grad_evals;
      last = s.value(res.theta);
      if (!std::isfinite(last)) throw NumericalBlowup("run_inner: loss diverged");
    }
    res.final_loss = strategy.stop.fixed_steps == 0 ? loss_anchor : last;
    return res;
  }

  const AlphaRule& rule = strategy.stop.rule;
  double loss = loss_anchor;
  while (!alpha_satisfied(rule, loss, loss_anchor, lstar_value)) {
    if (res.steps_taken >= rule.max_inner) {
      res.alpha_cap_hit = true;
      break;
    }
    res.theta = one_step(s, res.theta, strategy, adam);
    ++res.steps_taken;
    ++res.grad_evals;
    loss = s.value(res.theta);
    if (!std::isfinite(loss)) throw NumericalBlowup("run_inner: loss diverged");
  }
  res.final_loss = loss;
  return res;
}

}  // namespace hiddenvi
