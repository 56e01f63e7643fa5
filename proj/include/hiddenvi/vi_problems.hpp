#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "hiddenvi/linalg.hpp"

namespace hiddenvi {

/// Feasible set of the variational inequality in prediction space.
struct DomainSpec {
  enum class Kind { AllSpace, Box, SimplexProduct };

  Kind kind = Kind::AllSpace;
  Vector lower, upper;              // Box
  std::vector<std::size_t> sizes;   // SimplexProduct block sizes

  static DomainSpec all_space(std::size_t dim);
  static DomainSpec box(Vector lo, Vector hi);
  static DomainSpec simplex_product(std::vector<std::size_t> sizes);

  std::size_t dim = 0;
};

/// Euclidean projection: identity on AllSpace, clamp on a Box, sort-based
/// per-block projection on a product of simplices.
Vector project(const DomainSpec& domain, const Vector& z);

/// Operator F of the variational inequality: find z* with
/// <F(z*), z - z*> >= 0 for all z in the domain.
class VIOperator {
 public:
  virtual ~VIOperator() = default;
  virtual std::size_t dim() const = 0;
  virtual Vector eval(const Vector& z) const = 0;
  virtual const DomainSpec& domain() const = 0;
  virtual std::optional<Vector> solution() const { return std::nullopt; }
  /// Strong-monotonicity constant mu, when known.
  virtual std::optional<double> monotonicity_constant() const { return std::nullopt; }
  /// Lipschitz constant L, when known.
  virtual std::optional<double> lipschitz_constant() const { return std::nullopt; }
};

struct ProbeResult {
  double mu_hat;
  double lip_hat;
};

/// Empirical estimates: min of <F(x)-F(y), x-y>/||x-y||^2 and max of
/// ||F(x)-F(y)||/||x-y|| over random pairs from the domain.
ProbeResult monotonicity_probe(const VIOperator& op, std::size_t samples, std::uint64_t seed);

/// F(z) = B (z - center). mu and L are computed from B once at construction.
class AffineOperator : public VIOperator {
 public:
  AffineOperator(Matrix b, Vector center, DomainSpec domain);

  std::size_t dim() const override { return center_.size(); }
  Vector eval(const Vector& z) const override;
  const DomainSpec& domain() const override { return domain_; }
  std::optional<Vector> solution() const override { return center_; }
  std::optional<double> monotonicity_constant() const override { return mu_; }
  std::optional<double> lipschitz_constant() const override { return lip_; }

  const Matrix& b_matrix() const { return b_; }
  const Vector& center() const { return center_; }

 private:
  Matrix b_;
  Vector center_;
  DomainSpec domain_;
  double mu_, lip_;
};

/// Hidden matching pennies: skew bilinear coupling of strength 4 plus a
/// strongly monotone pull of 0.75 toward the mixed equilibrium (1/2, 1/2).
class PenniesOperator final : public AffineOperator {
 public:
  PenniesOperator();
};

Matrix standard_rps_payoff();

/// Hidden rock-paper-scissors over two 3-simplices:
/// F(z) = [A z^2; -A^T z^1] + lambda (z - uniform).
class RpsOperator final : public AffineOperator {
 public:
  explicit RpsOperator(Matrix payoff = standard_rps_payoff(), double lambda = 0.2);

  const Matrix& payoff() const { return payoff_; }
  double lambda_reg() const { return lambda_; }

 private:
  Matrix payoff_;
  double lambda_;
};

/// F(z) = Xi (z - r - gamma P z), the projected-Bellman-error operator of a
/// Markov reward process with stationary distribution xi.
class LinearBellmanOperator final : public VIOperator {
 public:
  LinearBellmanOperator(Vector xi_diag, Matrix p, Vector r, double gamma);

  std::size_t dim() const override { return xi_.size(); }
  Vector eval(const Vector& z) const override;
  const DomainSpec& domain() const override { return domain_; }
  /// The true value function (I - gamma P)^{-1} r, where F vanishes.
  std::optional<Vector> solution() const override { return solution_; }
  std::optional<double> monotonicity_constant() const override { return mu_; }
  std::optional<double> lipschitz_constant() const override { return lip_; }

  const Vector& xi_diag() const { return xi_; }
  const Matrix& p_matrix() const { return p_; }
  const Vector& r_vec() const { return r_; }
  double gamma() const { return gamma_; }

 private:
  Vector xi_;
  Matrix p_;
  Vector r_;
  double gamma_;
  DomainSpec domain_;
  Vector solution_;
  double mu_, lip_;
};

}  // namespace hiddenvi
