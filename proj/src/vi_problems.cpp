#include "hiddenvi/vi_problems.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hiddenvi/errors.hpp"
#include "hiddenvi/rng.hpp"

namespace hiddenvi {

DomainSpec DomainSpec::all_space(std::size_t dim) {
  DomainSpec d;
  d.kind = Kind::AllSpace;
  d.dim = dim;
  return d;
}

DomainSpec DomainSpec::box(Vector lo, Vector hi) {
  if (lo.size() != hi.size()) throw DimensionMismatch("DomainSpec::box: bound length mismatch");
  for (std::size_t i = 0; i < lo.size(); ++i)
    if (!(lo[i] < hi[i])) throw ConfigError("DomainSpec::box: requires lower < upper");
  DomainSpec d;
  d.kind = Kind::Box;
  d.dim = lo.size();
  d.lower = std::move(lo);
  d.upper = std::move(hi);
  return d;
}

DomainSpec DomainSpec::simplex_product(std::vector<std::size_t> sizes) {
  DomainSpec d;
  d.kind = Kind::SimplexProduct;
  d.sizes = std::move(sizes);
  d.dim = 0;
  for (std::size_t s : d.sizes) {
    if (s == 0) throw ConfigError("DomainSpec::simplex_product: zero block size");
    d.dim += s;
  }
  return d;
}

namespace {

// Projection of one block onto the probability simplex (sort-based).
// The output sum is corrected to 1 within rounding, and inputs already
// feasible to that rounding level are returned unchanged, so re-projection
// is exactly the identity.
void project_simplex_block(Vector& x) {
  const std::size_t n = x.size();
  bool nonneg = true;
  double total = 0.0;
  for (double v : x) {
    if (v < 0.0) nonneg = false;
    total += v;
  }
  if (nonneg && std::fabs(total - 1.0) <= 1e-12) return;

  Vector u = x;
  std::sort(u.begin(), u.end(), std::greater<double>());
  double cum = 0.0, tau = 0.0;
  std::size_t rho = 0;
  for (std::size_t j = 0; j < n; ++j) {
    cum += u[j];
    const double cand = (cum - 1.0) / static_cast<double>(j + 1);
    if (u[j] - cand > 0.0) {
      rho = j + 1;
      tau = cand;
    }
  }
  (void)rho;
  double s = 0.0;
  std::size_t argmax = 0;
  for (std::size_t j = 0; j < n; ++j) {
    x[j] = std::max(x[j] - tau, 0.0);
    s += x[j];
    if (x[j] > x[argmax]) argmax = j;
  }
  x[argmax] += 1.0 - s;
}

}  // namespace

Vector project(const DomainSpec& domain, const Vector& z) {
  switch (domain.kind) {
    case DomainSpec::Kind::AllSpace:
      return z;
    case DomainSpec::Kind::Box: {
      if (z.size() != domain.lower.size()) throw DimensionMismatch("project: box size mismatch");
      Vector out(z.size());
      for (std::size_t i = 0; i < z.size(); ++i)
        out[i] = std::min(std::max(z[i], domain.lower[i]), domain.upper[i]);
      return out;
    }
    case DomainSpec::Kind::SimplexProduct: {
      if (z.size() != domain.dim) throw DimensionMismatch("project: simplex size mismatch");
      Vector out = z;
      std::size_t off = 0;
      for (std::size_t s : domain.sizes) {
        Vector block(out.begin() + off, out.begin() + off + s);
        project_simplex_block(block);
        std::copy(block.begin(), block.end(), out.begin() + off);
        off += s;
      }
      return out;
    }
  }
  return z;
}

namespace {

Vector sample_domain_point(const DomainSpec& domain, Rng& rng) {
  switch (domain.kind) {
    case DomainSpec::Kind::AllSpace: {
      Vector z(domain.dim);
      for (double& v : z) v = rng.normal();
      return z;
    }
    case DomainSpec::Kind::Box: {
      Vector z(domain.dim);
      for (std::size_t i = 0; i < z.size(); ++i)
        z[i] = rng.uniform(domain.lower[i], domain.upper[i]);
      return z;
    }
    case DomainSpec::Kind::SimplexProduct: {
      Vector z;
      z.reserve(domain.dim);
      for (std::size_t s : domain.sizes) {
        Vector block(s);
        double total = 0.0;
        for (double& v : block) {
          v = -std::log(std::max(rng.uniform(), 1e-300));
          total += v;
        }
        for (double& v : block) v /= total;
        z.insert(z.end(), block.begin(), block.end());
      }
      return z;
    }
  }
  return Vector(domain.dim, 0.0);
}

}  // namespace

ProbeResult monotonicity_probe(const VIOperator& op, std::size_t samples, std::uint64_t seed) {
  if (samples < 2) throw ConfigError("monotonicity_probe: samples >= 2 required");
  Rng rng(seed);
  double mu_hat = std::numeric_limits<double>::infinity();
  double lip_hat = 0.0;
  for (std::size_t k = 0; k < samples; ++k) {
    const Vector x = sample_domain_point(op.domain(), rng);
    const Vector y = sample_domain_point(op.domain(), rng);
    const Vector dz = sub(x, y);
    const double dn = norm_sq(dz);
    if (dn == 0.0) continue;
    const Vector df = sub(op.eval(x), op.eval(y));
    mu_hat = std::min(mu_hat, dot(df, dz) / dn);
    lip_hat = std::max(lip_hat, norm(df) / std::sqrt(dn));
  }
  return {mu_hat, lip_hat};
}

AffineOperator::AffineOperator(Matrix b, Vector center, DomainSpec domain)
    : b_(std::move(b)), center_(std::move(center)), domain_(std::move(domain)) {
  if (b_.rows() != b_.cols() || b_.rows() != center_.size())
    throw DimensionMismatch("AffineOperator: shape mismatch");
  Matrix sym = scale(add(b_, transpose(b_)), 0.5);
  mu_ = eigen_sym(sym).eigenvalues.front();
  lip_ = operator_norm(b_);
}

Vector AffineOperator::eval(const Vector& z) const {
  if (z.size() != dim()) throw DimensionMismatch("AffineOperator: z length mismatch");
  return mat_vec(b_, sub(z, center_));
}

PenniesOperator::PenniesOperator()
    : AffineOperator(Matrix::from_rows({{0.75, -4.0}, {4.0, 0.75}}),
                     Vector{0.5, 0.5},
                     DomainSpec::box(Vector{0.0, 0.0}, Vector{1.0, 1.0})) {}

Matrix standard_rps_payoff() {
  return Matrix::from_rows({{0.0, -1.0, 1.0}, {1.0, 0.0, -1.0}, {-1.0, 1.0, 0.0}});
}

namespace {

Matrix rps_matrix(const Matrix& a, double lambda) {
  if (a.rows() != 3 || a.cols() != 3) throw DimensionMismatch("RpsOperator: payoff must be 3x3");
  Matrix b(6, 6);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) {
      b(i, 3 + j) = a(i, j);        // dz1 of <z1, A z2>
      b(3 + i, j) = -a(j, i);       // -A^T z1 for the max player
    }
  for (std::size_t i = 0; i < 6; ++i) b(i, i) += lambda;
  return b;
}

}  // namespace

RpsOperator::RpsOperator(Matrix payoff, double lambda)
    : AffineOperator(rps_matrix(payoff, lambda),
                     Vector(6, 1.0 / 3.0),
                     DomainSpec::simplex_product({3, 3})),
      payoff_(std::move(payoff)),
      lambda_(lambda) {}

LinearBellmanOperator::LinearBellmanOperator(Vector xi_diag, Matrix p, Vector r, double gamma)
    : xi_(std::move(xi_diag)), p_(std::move(p)), r_(std::move(r)), gamma_(gamma) {
  const std::size_t n = xi_.size();
  if (p_.rows() != n || p_.cols() != n || r_.size() != n)
    throw DimensionMismatch("LinearBellmanOperator: shape mismatch");
  domain_ = DomainSpec::all_space(n);

  // z* solves (I - gamma P) z = r.
  Matrix a = Matrix::identity(n);
  a = sub(a, scale(p_, gamma_));
  solution_ = solve_lu(a, r_);

  // F(z) = M (z - z*) with M = Xi (I - gamma P).
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) m(i, j) = xi_[i] * a(i, j);
  mu_ = eigen_sym(scale(add(m, transpose(m)), 0.5)).eigenvalues.front();
  lip_ = operator_norm(m);
}

Vector LinearBellmanOperator::eval(const Vector& z) const {
  if (z.size() != dim()) throw DimensionMismatch("LinearBellmanOperator: z length mismatch");
  Vector out(z.size());
  const Vector pz = mat_vec(p_, z);
  for (std::size_t i = 0; i < z.size(); ++i) out[i] = xi_[i] * (z[i] - r_[i] - gamma_ * pz[i]);
  return out;
}

}  // namespace hiddenvi
