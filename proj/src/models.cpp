#include "hiddenvi/models.hpp"

#include <cmath>

#include "hiddenvi/errors.hpp"

namespace hiddenvi {

double celu(double x) { return x > 0.0 ? x : std::expm1(x); }
double celu_deriv(double x) { return x > 0.0 ? 1.0 : std::exp(x); }
double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Vector PredictionModel::vjp(const Vector& theta, const Vector& u) const {
  if (u.size() != output_dim()) throw DimensionMismatch("vjp: cotangent length mismatch");
  return tmat_vec(jacobian(theta), u);
}

double PredictionModel::output_at(const Vector& theta, std::size_t i) const {
  return forward(theta)[i];
}

Vector PredictionModel::output_gradient(const Vector& theta, std::size_t i) const {
  return jacobian(theta).row(i);
}

std::pair<double, double> singular_bounds(const PredictionModel& model, const Vector& theta) {
  const SymEig eig = eigen_sym(gram(model.jacobian(theta)));
  const double lo = std::max(0.0, eig.eigenvalues.front());
  const double hi = std::max(0.0, eig.eigenvalues.back());
  return {std::sqrt(lo), std::sqrt(hi)};
}

Vector LinearModel::forward(const Vector& theta) const {
  if (theta.size() != param_dim()) throw DimensionMismatch("LinearModel: theta length mismatch");
  return mat_vec(phi_, theta);
}

Vector LinearModel::vjp(const Vector&, const Vector& u) const {
  if (u.size() != output_dim()) throw DimensionMismatch("LinearModel: cotangent length mismatch");
  return tmat_vec(phi_, u);
}

Vector ScalarSigmoidCelu::forward(const Vector& theta) const {
  if (theta.size() != 1) throw DimensionMismatch("ScalarSigmoidCelu: theta length mismatch");
  return {sigmoid(a2_ * celu(a1_ * theta[0]))};
}

Matrix ScalarSigmoidCelu::jacobian(const Vector& theta) const {
  if (theta.size() != 1) throw DimensionMismatch("ScalarSigmoidCelu: theta length mismatch");
  const double pre = a1_ * theta[0];
  const double s = sigmoid(a2_ * celu(pre));
  Matrix j(1, 1);
  j(0, 0) = s * (1.0 - s) * a2_ * celu_deriv(pre) * a1_;
  return j;
}

SoftmaxMlp::SoftmaxMlp(Matrix a1, Matrix a2) : a1_(std::move(a1)), a2_(std::move(a2)) {
  if (a2_.cols() != a1_.rows()) throw DimensionMismatch("SoftmaxMlp: layer shapes incompatible");
}

Vector SoftmaxMlp::forward(const Vector& theta) const {
  if (theta.size() != param_dim()) throw DimensionMismatch("SoftmaxMlp: theta length mismatch");
  Vector h = mat_vec(a1_, theta);
  for (double& x : h) x = celu(x);
  Vector logits = mat_vec(a2_, h);
  double mx = logits[0];
  for (double v : logits) mx = std::max(mx, v);
  double z = 0.0;
  Vector p(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - mx);
    z += p[i];
  }
  for (double& v : p) v /= z;
  return p;
}

Matrix SoftmaxMlp::jacobian(const Vector& theta) const {
  if (theta.size() != param_dim()) throw DimensionMismatch("SoftmaxMlp: theta length mismatch");
  const Vector pre = mat_vec(a1_, theta);
  Vector h(pre.size());
  for (std::size_t i = 0; i < pre.size(); ++i) h[i] = celu(pre[i]);
  const Vector p = forward(theta);

  // inner chain: A2 diag(celu'(pre)) A1
  Matrix inner(a2_.rows(), a1_.cols());
  for (std::size_t i = 0; i < a2_.rows(); ++i)
    for (std::size_t k = 0; k < a1_.rows(); ++k) {
      const double w = a2_(i, k) * celu_deriv(pre[k]);
      if (w == 0.0) continue;
      for (std::size_t j = 0; j < a1_.cols(); ++j) inner(i, j) += w * a1_(k, j);
    }

  // softmax jacobian (diag(p) - p p^T) applied on the left
  Matrix j(p.size(), a1_.cols());
  for (std::size_t i = 0; i < p.size(); ++i)
    for (std::size_t jc = 0; jc < a1_.cols(); ++jc) {
      double s = 0.0;
      for (std::size_t k = 0; k < p.size(); ++k) {
        const double soft = (i == k ? p[i] * (1.0 - p[i]) : -p[i] * p[k]);
        s += soft * inner(k, jc);
      }
      j(i, jc) = s;
    }
  return j;
}

ProductModel::ProductModel(std::vector<std::shared_ptr<const PredictionModel>> parts)
    : parts_(std::move(parts)) {
  for (const auto& p : parts_) {
    d_ += p->param_dim();
    n_ += p->output_dim();
  }
}

Vector ProductModel::forward(const Vector& theta) const {
  if (theta.size() != d_) throw DimensionMismatch("ProductModel: theta length mismatch");
  Vector out;
  out.reserve(n_);
  std::size_t off = 0;
  for (const auto& p : parts_) {
    Vector sub_theta(theta.begin() + off, theta.begin() + off + p->param_dim());
    const Vector z = p->forward(sub_theta);
    out.insert(out.end(), z.begin(), z.end());
    off += p->param_dim();
  }
  return out;
}

Matrix ProductModel::jacobian(const Vector& theta) const {
  if (theta.size() != d_) throw DimensionMismatch("ProductModel: theta length mismatch");
  Matrix j(n_, d_);
  std::size_t doff = 0, noff = 0;
  for (const auto& p : parts_) {
    Vector sub_theta(theta.begin() + doff, theta.begin() + doff + p->param_dim());
    const Matrix jb = p->jacobian(sub_theta);
    for (std::size_t i = 0; i < jb.rows(); ++i)
      for (std::size_t k = 0; k < jb.cols(); ++k) j(noff + i, doff + k) = jb(i, k);
    doff += p->param_dim();
    noff += p->output_dim();
  }
  return j;
}

Vector ProductModel::vjp(const Vector& theta, const Vector& u) const {
  if (u.size() != n_) throw DimensionMismatch("ProductModel: cotangent length mismatch");
  Vector out;
  out.reserve(d_);
  std::size_t doff = 0, noff = 0;
  for (const auto& p : parts_) {
    Vector sub_theta(theta.begin() + doff, theta.begin() + doff + p->param_dim());
    Vector sub_u(u.begin() + noff, u.begin() + noff + p->output_dim());
    const Vector g = p->vjp(sub_theta, sub_u);
    out.insert(out.end(), g.begin(), g.end());
    doff += p->param_dim();
    noff += p->output_dim();
  }
  return out;
}

MlpValueNet::MlpValueNet(Matrix state_features, std::size_t hidden)
    : features_(std::move(state_features)), hidden_(hidden) {
  const std::size_t in = features_.cols();
  d_ = hidden_ * in + hidden_ + hidden_ + 1;
}

Vector MlpValueNet::forward(const Vector& theta) const {
  Vector out(output_dim());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = output_at(theta, i);
  return out;
}

double MlpValueNet::output_at(const Vector& theta, std::size_t i) const {
  if (theta.size() != d_) throw DimensionMismatch("MlpValueNet: theta length mismatch");
  const std::size_t in = features_.cols();
  const double* w1 = theta.data();
  const double* b1 = theta.data() + hidden_ * in;
  const double* w2 = b1 + hidden_;
  const double b2 = theta[d_ - 1];

  double v = b2;
  for (std::size_t k = 0; k < hidden_; ++k) {
    double pre = b1[k];
    for (std::size_t j = 0; j < in; ++j) pre += w1[k * in + j] * features_(i, j);
    v += w2[k] * std::tanh(pre);
  }
  return v;
}

Vector MlpValueNet::output_gradient(const Vector& theta, std::size_t i) const {
  Vector g(d_, 0.0);
  if (theta.size() != d_) throw DimensionMismatch("MlpValueNet: theta length mismatch");
  const std::size_t in = features_.cols();
  const double* w1 = theta.data();
  const double* b1 = theta.data() + hidden_ * in;
  const double* w2 = b1 + hidden_;

  for (std::size_t k = 0; k < hidden_; ++k) {
    double pre = b1[k];
    for (std::size_t j = 0; j < in; ++j) pre += w1[k * in + j] * features_(i, j);
    const double h = std::tanh(pre);
    const double dh = 1.0 - h * h;
    const double wdh = w2[k] * dh;
    for (std::size_t j = 0; j < in; ++j) g[k * in + j] = wdh * features_(i, j);
    g[hidden_ * in + k] = wdh;       // b1
    g[hidden_ * in + hidden_ + k] = h;  // w2
  }
  g[d_ - 1] = 1.0;  // b2
  return g;
}

Matrix MlpValueNet::jacobian(const Vector& theta) const {
  Matrix j(output_dim(), d_);
  for (std::size_t i = 0; i < output_dim(); ++i) {
    const Vector g = output_gradient(theta, i);
    for (std::size_t k = 0; k < d_; ++k) j(i, k) = g[k];
  }
  return j;
}

Vector MlpValueNet::vjp(const Vector& theta, const Vector& u) const {
  if (u.size() != output_dim()) throw DimensionMismatch("MlpValueNet: cotangent length mismatch");
  if (theta.size() != d_) throw DimensionMismatch("MlpValueNet: theta length mismatch");
  const std::size_t in = features_.cols();
  const double* w1 = theta.data();
  const double* b1 = theta.data() + hidden_ * in;
  const double* w2 = b1 + hidden_;

  Vector g(d_, 0.0);
  for (std::size_t i = 0; i < output_dim(); ++i) {
    const double ui = u[i];
    if (ui == 0.0) continue;
    for (std::size_t k = 0; k < hidden_; ++k) {
      double pre = b1[k];
      for (std::size_t j = 0; j < in; ++j) pre += w1[k * in + j] * features_(i, j);
      const double h = std::tanh(pre);
      const double dh = 1.0 - h * h;
      const double wdh = ui * w2[k] * dh;
      for (std::size_t j = 0; j < in; ++j) g[k * in + j] += wdh * features_(i, j);
      g[hidden_ * in + k] += wdh;
      g[hidden_ * in + hidden_ + k] += ui * h;
    }
    g[d_ - 1] += ui;
  }
  return g;
}

Vector MlpValueNet::init_theta(Rng& rng) const {
  const std::size_t in = features_.cols();
  Vector theta(d_);
  const double s1 = 1.0 / std::sqrt(static_cast<double>(in));
  const double s2 = 1.0 / std::sqrt(static_cast<double>(hidden_));
  std::size_t idx = 0;
  for (std::size_t k = 0; k < hidden_ * in; ++k) theta[idx++] = rng.uniform(-s1, s1);
  for (std::size_t k = 0; k < hidden_; ++k) theta[idx++] = rng.uniform(-s1, s1);
  for (std::size_t k = 0; k < hidden_; ++k) theta[idx++] = rng.uniform(-s2, s2);
  theta[idx] = rng.uniform(-s2, s2);
  return theta;
}

}  // namespace hiddenvi
