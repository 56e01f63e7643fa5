#include "hiddenvi/surrogate.hpp"

#include <cmath>

#include "hiddenvi/errors.hpp"

namespace hiddenvi {

SurrogateLoss::SurrogateLoss(std::shared_ptr<const PredictionModel> model, Vector target,
                             double eta, std::optional<Vector> weight)
    : model_(std::move(model)), target_(std::move(target)), eta_(eta), weight_(std::move(weight)) {
  if (target_.size() != model_->output_dim())
    throw DimensionMismatch("SurrogateLoss: target length mismatch");
  if (weight_ && weight_->size() != target_.size())
    throw DimensionMismatch("SurrogateLoss: weight length mismatch");
}

Vector SurrogateLoss::residual(const Vector& theta) const {
  return sub(model_->forward(theta), target_);
}

double SurrogateLoss::value(const Vector& theta) const {
  const Vector r = residual(theta);
  if (!weight_) return 0.5 * norm_sq(r);
  double s = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) s += (*weight_)[i] * r[i] * r[i];
  return 0.5 * s;
}

Vector SurrogateLoss::gradient(const Vector& theta) const {
  Vector r = residual(theta);
  if (weight_)
    for (std::size_t i = 0; i < r.size(); ++i) r[i] *= (*weight_)[i];
  return model_->vjp(theta, r);
}

SurrogateLoss build_surrogate(std::shared_ptr<const PredictionModel> model, const Vector& theta_t,
                              const Vector& f_val, double eta, std::optional<Vector> weight) {
  if (f_val.size() != model->output_dim())
    throw DimensionMismatch("build_surrogate: operator value length mismatch");
  const Vector anchor = model->forward(theta_t);
  return SurrogateLoss(std::move(model), axpy(anchor, -eta, f_val), eta, std::move(weight));
}

Vector surrogate_grad(const SurrogateLoss& s, const Vector& theta) { return s.gradient(theta); }

StochasticSurrogate::StochasticSurrogate(std::shared_ptr<const PredictionModel> model,
                                         Vector anchor_preds, Vector f_hat, double eta,
                                         std::vector<std::size_t> linear_idx,
                                         std::vector<std::size_t> quad_idx)
    : model_(std::move(model)),
      anchor_(std::move(anchor_preds)),
      f_hat_(std::move(f_hat)),
      eta_(eta),
      lin_idx_(std::move(linear_idx)),
      quad_idx_(std::move(quad_idx)) {
  if (lin_idx_.empty() || quad_idx_.empty())
    throw ConfigError("StochasticSurrogate: empty index set");
  if (f_hat_.size() != lin_idx_.size())
    throw DimensionMismatch("StochasticSurrogate: f_hat must match the linear index set");
  const std::size_t n = model_->output_dim();
  if (anchor_.size() != n) throw DimensionMismatch("StochasticSurrogate: anchor length mismatch");
  for (std::size_t i : lin_idx_)
    if (i >= n) throw DimensionMismatch("StochasticSurrogate: linear index out of range");
  for (std::size_t i : quad_idx_)
    if (i >= n) throw DimensionMismatch("StochasticSurrogate: quadratic index out of range");
  lin_scale_ = static_cast<double>(n) / static_cast<double>(lin_idx_.size());
  quad_scale_ = static_cast<double>(n) / static_cast<double>(quad_idx_.size());
}

double StochasticSurrogate::value(const Vector& theta) const {
  const Vector g = model_->forward(theta);
  double lin = 0.0;
  for (std::size_t k = 0; k < lin_idx_.size(); ++k)
    lin += f_hat_[k] * (g[lin_idx_[k]] - anchor_[lin_idx_[k]]);
  double quad = 0.0;
  for (std::size_t i : quad_idx_) {
    const double dz = g[i] - anchor_[i];
    quad += dz * dz;
  }
  return 0.5 * eta_ * eta_ * norm_sq(f_hat_) + eta_ * lin_scale_ * lin + 0.5 * quad_scale_ * quad;
}

Vector StochasticSurrogate::gradient(const Vector& theta) const {
  const Vector g = model_->forward(theta);
  Vector u(g.size(), 0.0);
  for (std::size_t k = 0; k < lin_idx_.size(); ++k)
    u[lin_idx_[k]] += eta_ * lin_scale_ * f_hat_[k];
  for (std::size_t i : quad_idx_) u[i] += quad_scale_ * (g[i] - anchor_[i]);
  return model_->vjp(theta, u);
}

StochasticSurrogate build_stochastic_surrogate(std::shared_ptr<const PredictionModel> model,
                                               const Vector& theta_t, const Vector& f_hat,
                                               double eta, std::vector<std::size_t> linear_idx,
                                               std::vector<std::size_t> quad_idx) {
  Vector anchor = model->forward(theta_t);
  return StochasticSurrogate(std::move(model), std::move(anchor), f_hat, eta,
                             std::move(linear_idx), std::move(quad_idx));
}

double lstar(const SurrogateLoss& s, LstarMode mode) {
  if (mode == LstarMode::Zero) return 0.0;
  const PredictionModel& m = s.model();
  if (m.is_linear()) {
    const auto& lin = dynamic_cast<const LinearModel&>(m);
    Matrix j = lin.phi();
    Vector b = s.target();
    if (s.weight()) {
      const Vector& w = *s.weight();
      Matrix jw = j;
      Vector bw = b;
      for (std::size_t i = 0; i < j.rows(); ++i) {
        const double sw = std::sqrt(w[i]);
        for (std::size_t k = 0; k < j.cols(); ++k) jw(i, k) *= sw;
        bw[i] *= sw;
      }
      j = std::move(jw);
      b = std::move(bw);
    }
    const Vector theta_star = pinv_solve(j, b);
    return s.value(theta_star);
  }
  if (m.is_surjective()) return 0.0;
  throw UnsupportedModel("lstar: Exact mode needs a linear or output-surjective model");
}

bool alpha_satisfied(const AlphaRule& rule, double loss_now, double loss_anchor,
                     double lstar_value) {
  return loss_now - lstar_value <= rule.alpha * rule.alpha * (loss_anchor - lstar_value);
}

}  // namespace hiddenvi
