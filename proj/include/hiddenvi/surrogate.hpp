#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "hiddenvi/linalg.hpp"
#include "hiddenvi/models.hpp"

namespace hiddenvi {

/// Scalar loss over parameters: the interface the inner-loop optimizers see.
class ScalarObjective {
 public:
  virtual ~ScalarObjective() = default;
  virtual std::size_t param_dim() const = 0;
  virtual double value(const Vector& theta) const = 0;
  virtual Vector gradient(const Vector& theta) const = 0;
};

/// Anchored least-squares surrogate
///   l(theta) = 1/2 || g(theta) - target ||^2_W
/// with an optional diagonal weight W. The target is captured at build time,
/// so the loss is an immutable snapshot of the outer iteration.
class SurrogateLoss final : public ScalarObjective {
 public:
  SurrogateLoss(std::shared_ptr<const PredictionModel> model, Vector target, double eta,
                std::optional<Vector> weight = std::nullopt);

  std::size_t param_dim() const override { return model_->param_dim(); }
  double value(const Vector& theta) const override;
  Vector gradient(const Vector& theta) const override;

  /// g(theta) - target (unweighted).
  Vector residual(const Vector& theta) const;

  const PredictionModel& model() const { return *model_; }
  std::shared_ptr<const PredictionModel> model_ptr() const { return model_; }
  const Vector& target() const { return target_; }
  double eta() const { return eta_; }
  const std::optional<Vector>& weight() const { return weight_; }

 private:
  std::shared_ptr<const PredictionModel> model_;
  Vector target_;
  double eta_;
  std::optional<Vector> weight_;
};

/// target = g(theta_t) - eta * f_val. For the Bellman variant pass
/// f_val = Xi^{-1} F(z_t) together with weight Xi, which makes the target the
/// Bellman backup of z_t.
SurrogateLoss build_surrogate(std::shared_ptr<const PredictionModel> model, const Vector& theta_t,
                              const Vector& f_val, double eta,
                              std::optional<Vector> weight = std::nullopt);

/// Three-term mini-batched surrogate:
///   eta^2/2 ||f_hat||^2
///   + eta * <f_hat, g(theta) - anchor> over the linear index set
///   + 1/2 ||g(theta) - anchor||^2 over the quadratic index set,
/// where each data term is the index-set average rescaled to the full sum, so
/// that full index sets with an exact operator estimate recover the
/// deterministic surrogate identically.
class StochasticSurrogate final : public ScalarObjective {
 public:
  StochasticSurrogate(std::shared_ptr<const PredictionModel> model, Vector anchor_preds,
                      Vector f_hat, double eta, std::vector<std::size_t> linear_idx,
                      std::vector<std::size_t> quad_idx);

  std::size_t param_dim() const override { return model_->param_dim(); }
  double value(const Vector& theta) const override;
  Vector gradient(const Vector& theta) const override;

  const Vector& anchor_preds() const { return anchor_; }
  const Vector& f_hat() const { return f_hat_; }
  double eta() const { return eta_; }

 private:
  std::shared_ptr<const PredictionModel> model_;
  Vector anchor_;
  Vector f_hat_;
  double eta_;
  std::vector<std::size_t> lin_idx_, quad_idx_;
  double lin_scale_, quad_scale_;
};

StochasticSurrogate build_stochastic_surrogate(std::shared_ptr<const PredictionModel> model,
                                               const Vector& theta_t, const Vector& f_hat,
                                               double eta, std::vector<std::size_t> linear_idx,
                                               std::vector<std::size_t> quad_idx);

enum class LstarMode { Exact, Zero };

/// Infimum of the surrogate. Exact mode requires a linear model (least-squares
/// optimum through the pseudo-inverse) or a model that is surjective onto R^n
/// (infimum zero); everything else throws UnsupportedModel. Zero mode returns 0.
double lstar(const SurrogateLoss& s, LstarMode mode);

/// Inner-loop stopping rule: stop once the surrogate suboptimality has shrunk
/// by the factor alpha^2, with max_inner as a hard cap.
struct AlphaRule {
  double alpha = 0.5;
  LstarMode lstar_mode = LstarMode::Zero;
  std::size_t max_inner = 1000;
};

bool alpha_satisfied(const AlphaRule& rule, double loss_now, double loss_anchor, double lstar_value);

Vector surrogate_grad(const SurrogateLoss& s, const Vector& theta);

}  // namespace hiddenvi
