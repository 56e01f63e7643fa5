#include "hiddenvi/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hiddenvi/errors.hpp"

namespace hiddenvi {

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::diag(const Vector& d) {
  Matrix m(d.size(), d.size());
  for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
  return m;
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  Matrix m(r, c);
  std::size_t i = 0;
  for (const auto& row : rows) {
    if (row.size() != c) throw DimensionMismatch("ragged initializer for Matrix");
    std::size_t j = 0;
    for (double v : row) m(i, j++) = v;
    ++i;
  }
  return m;
}

Vector Matrix::row(std::size_t i) const {
  Vector out(cols_);
  for (std::size_t j = 0; j < cols_; ++j) out[j] = (*this)(i, j);
  return out;
}

Vector Matrix::col(std::size_t j) const {
  Vector out(rows_);
  for (std::size_t i = 0; i < rows_; ++i) out[i] = (*this)(i, j);
  return out;
}

double dot(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) throw DimensionMismatch("dot: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm_sq(const Vector& a) { return dot(a, a); }
double norm(const Vector& a) { return std::sqrt(norm_sq(a)); }

Vector add(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) throw DimensionMismatch("add: length mismatch");
  Vector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

Vector sub(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) throw DimensionMismatch("sub: length mismatch");
  Vector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return out;
}

Vector scale(const Vector& a, double s) {
  Vector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * s;
  return out;
}

Vector axpy(const Vector& a, double s, const Vector& b) {
  if (a.size() != b.size()) throw DimensionMismatch("axpy: length mismatch");
  Vector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + s * b[i];
  return out;
}

bool all_finite(const Vector& a) {
  return std::all_of(a.begin(), a.end(), [](double x) { return std::isfinite(x); });
}

Vector mat_vec(const Matrix& m, const Vector& v) {
  if (m.cols() != v.size()) throw DimensionMismatch("mat_vec: shape mismatch");
  Vector out(m.rows(), 0.0);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < m.cols(); ++j) s += m(i, j) * v[j];
    out[i] = s;
  }
  return out;
}

Vector tmat_vec(const Matrix& m, const Vector& v) {
  if (m.rows() != v.size()) throw DimensionMismatch("tmat_vec: shape mismatch");
  Vector out(m.cols(), 0.0);
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) out[j] += m(i, j) * v[i];
  return out;
}

Matrix mat_mul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw DimensionMismatch("mat_mul: shape mismatch");
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) += aik * b(k, j);
    }
  return out;
}

Matrix transpose(const Matrix& m) {
  Matrix out(m.cols(), m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) out(j, i) = m(i, j);
  return out;
}

Matrix add(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw DimensionMismatch("add: shape mismatch");
  Matrix out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.values().size(); ++i) out.values()[i] = a.values()[i] + b.values()[i];
  return out;
}

Matrix sub(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw DimensionMismatch("sub: shape mismatch");
  Matrix out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.values().size(); ++i) out.values()[i] = a.values()[i] - b.values()[i];
  return out;
}

Matrix scale(const Matrix& a, double s) {
  Matrix out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.values().size(); ++i) out.values()[i] = a.values()[i] * s;
  return out;
}

Matrix gram(const Matrix& j) {
  Matrix out(j.cols(), j.cols());
  for (std::size_t k = 0; k < j.rows(); ++k)
    for (std::size_t p = 0; p < j.cols(); ++p) {
      const double v = j(k, p);
      if (v == 0.0) continue;
      for (std::size_t q = 0; q < j.cols(); ++q) out(p, q) += v * j(k, q);
    }
  return out;
}

bool all_finite(const Matrix& m) { return all_finite(m.values()); }

double max_abs(const Matrix& m) {
  double mx = 0.0;
  for (double v : m.values()) mx = std::max(mx, std::fabs(v));
  return mx;
}

SymEig eigen_sym(const Matrix& a) {
  if (a.rows() != a.cols()) throw DimensionMismatch("eigen_sym: square matrix required");
  const std::size_t n = a.rows();
  Matrix d = a;
  Matrix v = Matrix::identity(n);

  double frob = 0.0;
  for (double x : a.values()) frob += x * x;
  frob = std::sqrt(frob);
  const double stop = 1e-15 * std::max(frob, 1e-300);

  const int max_sweeps = 64;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p + 1 < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += d(p, q) * d(p, q);
    if (std::sqrt(2.0 * off) <= stop) break;

    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = d(p, q);
        if (apq == 0.0) continue;
        const double app = d(p, p);
        const double aqq = d(q, q);
        const double phi = 0.5 * std::atan2(2.0 * apq, aqq - app);
        const double c = std::cos(phi);
        const double s = std::sin(phi);

        for (std::size_t k = 0; k < n; ++k) {
          const double dkp = d(k, p);
          const double dkq = d(k, q);
          d(k, p) = c * dkp - s * dkq;
          d(k, q) = s * dkp + c * dkq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double dpk = d(p, k);
          const double dqk = d(q, k);
          d(p, k) = c * dpk - s * dqk;
          d(q, k) = s * dpk + c * dqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t i, std::size_t j) { return d(i, i) < d(j, j); });

  SymEig out;
  out.eigenvalues.resize(n);
  out.eigenvectors = Matrix(n, n);
  for (std::size_t k = 0; k < n; ++k) {
    out.eigenvalues[k] = d(order[k], order[k]);
    for (std::size_t i = 0; i < n; ++i) out.eigenvectors(i, k) = v(i, order[k]);
  }
  return out;
}

Vector solve_spd(const Matrix& a, const Vector& b) {
  if (a.rows() != a.cols()) throw DimensionMismatch("solve_spd: square matrix required");
  if (a.rows() != b.size()) throw DimensionMismatch("solve_spd: rhs length mismatch");
  const std::size_t n = a.rows();

  const double scale = std::max(1.0, max_abs(a));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (std::fabs(a(i, j) - a(j, i)) > 1e-10 * scale)
        throw DimensionMismatch("solve_spd: matrix is not symmetric");

  Matrix l(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double diag = a(j, j);
    for (std::size_t k = 0; k < j; ++k) diag -= l(j, k) * l(j, k);
    if (diag <= 0.0 || !std::isfinite(diag))
      throw NotPositiveDefinite("solve_spd: non-positive pivot at row " + std::to_string(j));
    l(j, j) = std::sqrt(diag);
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / l(j, j);
    }
  }

  Vector y(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = b[i];
    for (std::size_t k = 0; k < i; ++k) s -= l(i, k) * y[k];
    y[i] = s / l(i, i);
  }
  Vector x(n);
  for (std::size_t ii = n; ii-- > 0;) {
    double s = y[ii];
    for (std::size_t k = ii + 1; k < n; ++k) s -= l(k, ii) * x[k];
    x[ii] = s / l(ii, ii);
  }
  return x;
}

Vector solve_lu(const Matrix& a, const Vector& b) {
  if (a.rows() != a.cols()) throw DimensionMismatch("solve_lu: square matrix required");
  if (a.rows() != b.size()) throw DimensionMismatch("solve_lu: rhs length mismatch");
  const std::size_t n = a.rows();
  Matrix m = a;
  Vector x = b;

  for (std::size_t k = 0; k < n; ++k) {
    std::size_t piv = k;
    double best = std::fabs(m(k, k));
    for (std::size_t i = k + 1; i < n; ++i) {
      if (std::fabs(m(i, k)) > best) {
        best = std::fabs(m(i, k));
        piv = i;
      }
    }
    if (best == 0.0) throw SingularMatrix("solve_lu: singular matrix");
    if (piv != k) {
      for (std::size_t j = 0; j < n; ++j) std::swap(m(k, j), m(piv, j));
      std::swap(x[k], x[piv]);
    }
    for (std::size_t i = k + 1; i < n; ++i) {
      const double f = m(i, k) / m(k, k);
      if (f == 0.0) continue;
      for (std::size_t j = k; j < n; ++j) m(i, j) -= f * m(k, j);
      x[i] -= f * x[k];
    }
  }
  for (std::size_t ii = n; ii-- > 0;) {
    double s = x[ii];
    for (std::size_t j = ii + 1; j < n; ++j) s -= m(ii, j) * x[j];
    x[ii] = s / m(ii, ii);
  }
  return x;
}

Vector pinv_solve(const Matrix& j, const Vector& b, double tol) {
  if (j.rows() != b.size()) throw DimensionMismatch("pinv_solve: rhs length mismatch");
  const SymEig eig = eigen_sym(gram(j));
  const std::size_t d = j.cols();
  const double lam_max = eig.eigenvalues.empty() ? 0.0 : eig.eigenvalues.back();
  if (lam_max <= 0.0) throw ZeroMatrix("pinv_solve: all eigenvalues below threshold");
  const double cutoff = tol * lam_max;

  const Vector jtb = tmat_vec(j, b);
  Vector x(d, 0.0);
  for (std::size_t k = 0; k < d; ++k) {
    const double lam = eig.eigenvalues[k];
    if (lam <= cutoff) continue;
    const Vector vk = eig.eigenvectors.col(k);
    const double coef = dot(vk, jtb) / lam;
    for (std::size_t i = 0; i < d; ++i) x[i] += coef * vk[i];
  }
  return x;
}

double operator_norm(const Matrix& m, std::size_t iters) {
  if (m.rows() == 0 || m.cols() == 0) return 0.0;
  Vector x(m.cols(), 1.0);
  double nx = norm(x);
  if (nx == 0.0) return 0.0;
  x = scale(x, 1.0 / nx);
  double lam = 0.0;
  for (std::size_t it = 0; it < iters; ++it) {
    Vector y = tmat_vec(m, mat_vec(m, x));  // (m^T m) x
    const double ny = norm(y);
    if (ny == 0.0) return 0.0;
    lam = ny;
    x = scale(y, 1.0 / ny);
  }
  return std::sqrt(lam);
}

double spectral_radius(const Matrix& m, std::size_t iters) {
  if (m.rows() != m.cols()) throw DimensionMismatch("spectral_radius: square matrix required");
  if (m.rows() == 2) {
    const double tr = m(0, 0) + m(1, 1);
    const double det = m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
    const double disc = tr * tr - 4.0 * det;
    if (disc >= 0.0) {
      const double s = std::sqrt(disc);
      return std::max(std::fabs((tr + s) / 2.0), std::fabs((tr - s) / 2.0));
    }
    return std::sqrt(det);  // complex pair: |lambda|^2 = det
  }
  return operator_norm(m, iters);
}

}  // namespace hiddenvi
