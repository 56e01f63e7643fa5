#pragma once

#include <cstddef>
#include <initializer_list>
#include <vector>

namespace hiddenvi {

using Vector = std::vector<double>;

/// Dense row-major matrix. Sized for the small systems this project solves
/// (parameter dimensions up to a few hundred); no attempt at BLAS performance.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), a_(rows * cols, fill) {}

  static Matrix identity(std::size_t n);
  static Matrix diag(const Vector& d);
  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double& operator()(std::size_t i, std::size_t j) { return a_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return a_[i * cols_ + j]; }

  const std::vector<double>& values() const { return a_; }
  std::vector<double>& values() { return a_; }

  Vector row(std::size_t i) const;
  Vector col(std::size_t j) const;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> a_;
};

// Vector arithmetic.
double dot(const Vector& a, const Vector& b);
double norm_sq(const Vector& a);
double norm(const Vector& a);
Vector add(const Vector& a, const Vector& b);
Vector sub(const Vector& a, const Vector& b);
Vector scale(const Vector& a, double s);
/// a + s*b
Vector axpy(const Vector& a, double s, const Vector& b);
bool all_finite(const Vector& a);

// Matrix arithmetic.
Vector mat_vec(const Matrix& m, const Vector& v);
/// m^T v without forming the transpose.
Vector tmat_vec(const Matrix& m, const Vector& v);
Matrix mat_mul(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& m);
Matrix add(const Matrix& a, const Matrix& b);
Matrix sub(const Matrix& a, const Matrix& b);
Matrix scale(const Matrix& a, double s);
/// j^T j
Matrix gram(const Matrix& j);
bool all_finite(const Matrix& m);
double max_abs(const Matrix& m);

/// Eigenvalues ascending; eigenvectors(:, k) belongs to eigenvalues[k].
struct SymEig {
  Vector eigenvalues;
  Matrix eigenvectors;
};

/// Cyclic Jacobi iteration for a symmetric matrix.
SymEig eigen_sym(const Matrix& a);

/// Cholesky solve of a symmetric positive-definite system.
/// Throws NotPositiveDefinite on a non-positive pivot; no silent regularization.
Vector solve_spd(const Matrix& a, const Vector& b);

/// General square solve via LU with partial pivoting. Throws SingularMatrix.
Vector solve_lu(const Matrix& a, const Vector& b);

/// Minimum-norm least-squares solution of j x = b through the eigendecomposition
/// of j^T j; eigenvalues below tol * (max eigenvalue) are treated as zero.
/// Throws ZeroMatrix when every eigenvalue is below threshold.
Vector pinv_solve(const Matrix& j, const Vector& b, double tol = 1e-12);

/// Largest singular value, sqrt of the dominant eigenvalue of m^T m.
double operator_norm(const Matrix& m, std::size_t iters = 256);

/// Exact spectral radius for 2x2 matrices (eigenvalue formula, complex pairs
/// included); for larger matrices the operator norm is returned as a proxy.
double spectral_radius(const Matrix& m, std::size_t iters = 256);

}  // namespace hiddenvi
