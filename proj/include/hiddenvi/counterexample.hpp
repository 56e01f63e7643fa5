#pragma once

#include <cstddef>

#include "hiddenvi/linalg.hpp"
#include "hiddenvi/record.hpp"

namespace hiddenvi {

/// The divergence construction: a biased update direction P z that satisfies
/// the alpha-descent condition with alpha = 1/sqrt(2) on the strongly
/// monotone bilinear operator yet diverges for every step size.
struct CounterexampleSpec {
  double eta = 0.1;
  Matrix f_matrix;   // [[1, 1], [-1, 1]]
  Matrix q_matrix;   // 45-degree rotation
  double alpha = 0.0;

  static CounterexampleSpec make(double eta);
};

/// P = (I - alpha Q) eta F, computed through the product and checked against
/// the closed form [[0, eta], [-eta, 0]].
Matrix build_p(double eta);

/// ||(eta F - P) z|| / (eta ||F z||); constant 1/sqrt(2) for every z != 0.
double measure_alpha(const CounterexampleSpec& spec, const Vector& z);

/// Iterates z_{t+1} = (I - P) z_t. Per-row metrics: dist_sq = ||z_t||^2,
/// loss_anchor = ||z_t||, loss_final = ||z_{t+1}||, so loss_ratio is the
/// per-step growth factor sqrt(1 + eta^2).
TrajectoryRecord run_divergence(const CounterexampleSpec& spec, const Vector& z0,
                                std::size_t steps);

}  // namespace hiddenvi
