#pragma once

#include <memory>
#include <utility>
#include <vector>

#include "hiddenvi/linalg.hpp"
#include "hiddenvi/rng.hpp"

namespace hiddenvi {

double celu(double x);
double celu_deriv(double x);
double sigmoid(double x);

/// Differentiable map from parameters theta in R^d to predictions in R^n,
/// with an analytic Jacobian.
class PredictionModel {
 public:
  virtual ~PredictionModel() = default;

  virtual std::size_t param_dim() const = 0;
  virtual std::size_t output_dim() const = 0;

  virtual Vector forward(const Vector& theta) const = 0;

  /// n x d matrix of partial derivatives d g_i / d theta_j.
  virtual Matrix jacobian(const Vector& theta) const = 0;

  /// jacobian(theta)^T u; overridden where the product can be formed
  /// without materializing the Jacobian.
  virtual Vector vjp(const Vector& theta, const Vector& u) const;

  /// Single prediction coordinate and its parameter gradient.
  virtual double output_at(const Vector& theta, std::size_t i) const;
  virtual Vector output_gradient(const Vector& theta, std::size_t i) const;

  virtual bool is_linear() const { return false; }
  /// True when the closure of the output set is all of R^n.
  virtual bool is_surjective() const { return false; }
};

/// (sigma_min, sigma_max) of the Jacobian at theta, from the extreme
/// eigenvalues of Dg^T Dg.
std::pair<double, double> singular_bounds(const PredictionModel& model, const Vector& theta);

/// g(theta) = Phi theta.
class LinearModel final : public PredictionModel {
 public:
  explicit LinearModel(Matrix phi) : phi_(std::move(phi)) {}

  std::size_t param_dim() const override { return phi_.cols(); }
  std::size_t output_dim() const override { return phi_.rows(); }
  Vector forward(const Vector& theta) const override;
  Matrix jacobian(const Vector&) const override { return phi_; }
  Vector vjp(const Vector&, const Vector& u) const override;
  bool is_linear() const override { return true; }

  const Matrix& phi() const { return phi_; }

 private:
  Matrix phi_;
};

/// Scalar map sigmoid(a2 * celu(a1 * theta)); outputs lie in (0, 1).
class ScalarSigmoidCelu final : public PredictionModel {
 public:
  ScalarSigmoidCelu(double a1, double a2) : a1_(a1), a2_(a2) {}

  std::size_t param_dim() const override { return 1; }
  std::size_t output_dim() const override { return 1; }
  Vector forward(const Vector& theta) const override;
  Matrix jacobian(const Vector& theta) const override;

  double a1() const { return a1_; }
  double a2() const { return a2_; }

 private:
  double a1_, a2_;
};

/// softmax(A2 celu(A1 theta)); with the default game shapes A1 is 4x5 and
/// A2 is 3x4, so d = 5 and n = 3. Outputs lie on the open simplex.
class SoftmaxMlp final : public PredictionModel {
 public:
  SoftmaxMlp(Matrix a1, Matrix a2);

  std::size_t param_dim() const override { return a1_.cols(); }
  std::size_t output_dim() const override { return a2_.rows(); }
  Vector forward(const Vector& theta) const override;
  Matrix jacobian(const Vector& theta) const override;

 private:
  Matrix a1_, a2_;
};

/// Concatenation of independent parts: theta = (theta^1, ..., theta^k) and
/// g(theta) = (g^1(theta^1), ..., g^k(theta^k)). Jacobian is block-diagonal.
class ProductModel final : public PredictionModel {
 public:
  explicit ProductModel(std::vector<std::shared_ptr<const PredictionModel>> parts);

  std::size_t param_dim() const override { return d_; }
  std::size_t output_dim() const override { return n_; }
  Vector forward(const Vector& theta) const override;
  Matrix jacobian(const Vector& theta) const override;
  Vector vjp(const Vector& theta, const Vector& u) const override;

  const std::vector<std::shared_ptr<const PredictionModel>>& parts() const { return parts_; }

 private:
  std::vector<std::shared_ptr<const PredictionModel>> parts_;
  std::size_t d_ = 0, n_ = 0;
};

/// Two-layer tanh value network over a fixed table of per-state features:
/// prediction i = w2 . tanh(W1 x_i + b1) + b2.
/// theta packs [W1 row-major | b1 | w2 | b2].
class MlpValueNet final : public PredictionModel {
 public:
  MlpValueNet(Matrix state_features, std::size_t hidden = 32);

  std::size_t param_dim() const override { return d_; }
  std::size_t output_dim() const override { return features_.rows(); }
  Vector forward(const Vector& theta) const override;
  Matrix jacobian(const Vector& theta) const override;
  Vector vjp(const Vector& theta, const Vector& u) const override;
  double output_at(const Vector& theta, std::size_t i) const override;
  Vector output_gradient(const Vector& theta, std::size_t i) const override;

  std::size_t hidden() const { return hidden_; }
  const Matrix& features() const { return features_; }

  /// Uniform [-1/sqrt(fan_in), 1/sqrt(fan_in)] per layer.
  Vector init_theta(Rng& rng) const;

 private:
  Matrix features_;
  std::size_t hidden_;
  std::size_t d_;
};

}  // namespace hiddenvi
