#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace matfun {

// Dense square real matrix, row-major. The universal input and output of every
// matrix function in the library.
class Matrix {
 public:
  Matrix() = default;
  explicit Matrix(std::size_t n, double fill = 0.0) : n_(n), data_(n * n, fill) {}
  Matrix(std::size_t n, std::vector<double> row_major);
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix identity(std::size_t n);
  static Matrix diagonal(std::span<const double> diag);
  static Matrix diagonal(std::initializer_list<double> diag);

  [[nodiscard]] std::size_t n() const noexcept { return n_; }
  [[nodiscard]] std::size_t size() const noexcept { return data_.size(); }

  double& operator()(std::size_t i, std::size_t j) noexcept { return data_[i * n_ + j]; }
  double operator()(std::size_t i, std::size_t j) const noexcept { return data_[i * n_ + j]; }

  [[nodiscard]] std::span<double> data() noexcept { return data_; }
  [[nodiscard]] std::span<const double> data() const noexcept { return data_; }
  [[nodiscard]] const std::vector<double>& values() const noexcept { return data_; }

  [[nodiscard]] bool all_finite() const noexcept;
  [[nodiscard]] Matrix transposed() const;

  Matrix& operator+=(const Matrix& rhs);
  Matrix& operator-=(const Matrix& rhs);
  Matrix& operator*=(double s) noexcept;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t n_ = 0;
  std::vector<double> data_;
};

Matrix operator+(Matrix lhs, const Matrix& rhs);
Matrix operator-(Matrix lhs, const Matrix& rhs);
Matrix operator-(Matrix m);
Matrix operator*(Matrix m, double s);
Matrix operator*(double s, Matrix m);

// Exact dense product in 64-bit arithmetic. Throws on dimension mismatch.
Matrix mat_mul(const Matrix& a, const Matrix& b);
Matrix operator*(const Matrix& a, const Matrix& b);

// Gauss-Jordan inverse with partial pivoting. Throws singular_matrix when a
// pivot magnitude falls to or below `pivot_threshold`.
inline constexpr double kPivotThreshold = 1e-12;
Matrix mat_inverse(const Matrix& a, double pivot_threshold = kPivotThreshold);

// LU determinant with partial pivoting; zero when a pivot is exactly zero.
double determinant(const Matrix& a);

double frobenius_norm(const Matrix& a) noexcept;
double one_norm(const Matrix& a) noexcept;  // max column sum
double entry_l1(const Matrix& a) noexcept;  // sum of absolute entries
double trace(const Matrix& a) noexcept;

// Frobenius distance to the identity; used by the iteration stopping rules.
double distance_to_identity(const Matrix& a) noexcept;

}  // namespace matfun
