#pragma once

#include <cstddef>
#include <utility>

#include "hiddenvi/surrogate.hpp"

namespace hiddenvi {

struct AdamWParams {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

/// Explicit optimizer state; passed in and out, never mutated in place.
struct AdamState {
  Vector m, v;
  std::size_t step_count = 0;
  static AdamState zero(std::size_t d) { return {Vector(d, 0.0), Vector(d, 0.0), 0}; }
};

struct InnerStop {
  enum class Kind { FixedSteps, Alpha };
  Kind kind = Kind::FixedSteps;
  std::size_t fixed_steps = 1;
  AlphaRule rule{};

  static InnerStop fixed(std::size_t m) { return {Kind::FixedSteps, m, {}}; }
  static InnerStop alpha(AlphaRule r) { return {Kind::Alpha, 1, r}; }
};

struct InnerStrategy {
  enum class Kind { GD, GN, DGN, LM, AdamW };
  Kind kind = Kind::GN;
  double lr = 0.1;        // GD
  double eta_gn = 1.0;    // DGN
  double lambda = 1e-3;   // LM
  AdamWParams adamw{};
  double pinv_tol = 1e-12;
  InnerStop stop = InnerStop::fixed(1);
};

/// theta - lr * grad(theta). Throws NumericalBlowup on a non-finite gradient.
Vector gd_step(const ScalarObjective& s, const Vector& theta, double lr);

/// Gauss-Newton: theta - pinv(Dg) residual. From the anchor this is exactly one
/// preconditioned hidden-gradient step theta - eta (Dg^T Dg)^+ Dg^T F(z).
Vector gn_step(const SurrogateLoss& s, const Vector& theta, double tol = 1e-12);

/// Damped Gauss-Newton; eta_gn = 1 reproduces gn_step.
Vector dgn_step(const SurrogateLoss& s, const Vector& theta, double eta_gn, double tol = 1e-12);

/// Levenberg-Marquardt: theta - (Dg^T Dg + lambda I)^{-1} Dg^T residual.
Vector lm_step(const SurrogateLoss& s, const Vector& theta, double lambda);

/// Bias-corrected AdamW with decoupled weight decay applied multiplicatively
/// before the adaptive step.
std::pair<Vector, AdamState> adamw_step(const ScalarObjective& s, const Vector& theta,
                                        AdamState state, const AdamWParams& hyper);

struct InnerResult {
  Vector theta;
  std::size_t steps_taken = 0;
  double final_loss = 0.0;
  /// True when the alpha rule ran into its step cap without being satisfied.
  bool alpha_cap_hit = false;
  /// One per gd/adamw gradient or per GN/DGN/LM Jacobian evaluation.
  std::size_t grad_evals = 0;
};

/// Inner loop of the surrogate method: either a fixed number of optimizer
/// steps, or steps until the alpha-descent condition holds (capped).
/// loss_anchor must be the loss at the anchor parameters.
InnerResult run_inner(const ScalarObjective& s, const Vector& theta_start,
                      const InnerStrategy& strategy, double lstar_value, double loss_anchor);

}  // namespace hiddenvi
