#include "matfun/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <utility>

#include "matfun/errors.hpp"

namespace matfun {

namespace {

void require_same_dim(const Matrix& a, const Matrix& b, const char* op) {
  if (a.n() != b.n()) {
    fail(ErrorKind::dimension_mismatch, std::string(op) + ": dimensions " + std::to_string(a.n()) +
                                            " and " + std::to_string(b.n()) + " differ");
  }
}

}  // namespace

Matrix::Matrix(std::size_t n, std::vector<double> row_major) : n_(n), data_(std::move(row_major)) {
  require(data_.size() == n * n, ErrorKind::dimension_mismatch,
          "Matrix: expected " + std::to_string(n * n) + " entries, got " + std::to_string(data_.size()));
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) : n_(rows.size()) {
  data_.reserve(n_ * n_);
  for (const auto& row : rows) {
    require(row.size() == n_, ErrorKind::dimension_mismatch, "Matrix: rows must form a square matrix");
    data_.insert(data_.end(), row.begin(), row.end());
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::diagonal(std::span<const double> diag) {
  Matrix m(diag.size());
  for (std::size_t i = 0; i < diag.size(); ++i) m(i, i) = diag[i];
  return m;
}

Matrix Matrix::diagonal(std::initializer_list<double> diag) {
  return diagonal(std::span<const double>(diag.begin(), diag.size()));
}

bool Matrix::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Matrix Matrix::transposed() const {
  Matrix t(n_);
  for (std::size_t i = 0; i < n_; ++i)
    for (std::size_t j = 0; j < n_; ++j) t(j, i) = (*this)(i, j);
  return t;
}

Matrix& Matrix::operator+=(const Matrix& rhs) {
  require_same_dim(*this, rhs, "operator+");
  for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += rhs.data_[k];
  return *this;
}

Matrix& Matrix::operator-=(const Matrix& rhs) {
  require_same_dim(*this, rhs, "operator-");
  for (std::size_t k = 0; k < data_.size(); ++k) data_[k] -= rhs.data_[k];
  return *this;
}

Matrix& Matrix::operator*=(double s) noexcept {
  for (double& v : data_) v *= s;
  return *this;
}

Matrix operator+(Matrix lhs, const Matrix& rhs) { return lhs += rhs; }
Matrix operator-(Matrix lhs, const Matrix& rhs) { return lhs -= rhs; }
Matrix operator-(Matrix m) { return m *= -1.0; }
Matrix operator*(Matrix m, double s) { return m *= s; }
Matrix operator*(double s, Matrix m) { return m *= s; }

Matrix mat_mul(const Matrix& a, const Matrix& b) {
  require_same_dim(a, b, "mat_mul");
  const std::size_t n = a.n();
  Matrix c(n);
  // i-k-j order keeps the inner loop contiguous in both b and c.
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < n; ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) c(i, j) += aik * b(k, j);
    }
  }
  return c;
}

Matrix operator*(const Matrix& a, const Matrix& b) { return mat_mul(a, b); }

Matrix mat_inverse(const Matrix& a, double pivot_threshold) {
  const std::size_t n = a.n();
  require(n > 0, ErrorKind::invalid_argument, "mat_inverse: empty matrix");
  Matrix work = a;
  Matrix inv = Matrix::identity(n);
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(work(r, col)) > std::abs(work(pivot, col))) pivot = r;
    const double p = work(pivot, col);
    if (!(std::abs(p) > pivot_threshold)) {
      fail(ErrorKind::singular_matrix, "mat_inverse: pivot " + std::to_string(std::abs(p)) +
                                           " in column " + std::to_string(col) + " below threshold");
    }
    if (pivot != col) {
      for (std::size_t j = 0; j < n; ++j) {
        std::swap(work(pivot, j), work(col, j));
        std::swap(inv(pivot, j), inv(col, j));
      }
    }
    const double scale = 1.0 / p;
    for (std::size_t j = 0; j < n; ++j) {
      work(col, j) *= scale;
      inv(col, j) *= scale;
    }
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col) continue;
      const double f = work(r, col);
      if (f == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) {
        work(r, j) -= f * work(col, j);
        inv(r, j) -= f * inv(col, j);
      }
    }
  }
  return inv;
}

double determinant(const Matrix& a) {
  const std::size_t n = a.n();
  Matrix lu = a;
  double det = 1.0;
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(lu(r, col)) > std::abs(lu(pivot, col))) pivot = r;
    if (lu(pivot, col) == 0.0) return 0.0;
    if (pivot != col) {
      for (std::size_t j = 0; j < n; ++j) std::swap(lu(pivot, j), lu(col, j));
      det = -det;
    }
    const double p = lu(col, col);
    det *= p;
    for (std::size_t r = col + 1; r < n; ++r) {
      const double f = lu(r, col) / p;
      for (std::size_t j = col; j < n; ++j) lu(r, j) -= f * lu(col, j);
    }
  }
  return det;
}

double frobenius_norm(const Matrix& a) noexcept {
  // Scaled accumulation so that large entries do not overflow the sum of squares.
  double scale = 0.0;
  double ssq = 1.0;
  for (double v : a.data()) {
    if (v == 0.0) continue;
    const double av = std::abs(v);
    if (scale < av) {
      ssq = 1.0 + ssq * (scale / av) * (scale / av);
      scale = av;
    } else {
      ssq += (av / scale) * (av / scale);
    }
  }
  return scale * std::sqrt(ssq);
}

double one_norm(const Matrix& a) noexcept {
  double best = 0.0;
  for (std::size_t j = 0; j < a.n(); ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.n(); ++i) s += std::abs(a(i, j));
    best = std::max(best, s);
  }
  return best;
}

double entry_l1(const Matrix& a) noexcept {
  return std::accumulate(a.data().begin(), a.data().end(), 0.0,
                         [](double acc, double v) { return acc + std::abs(v); });
}

double trace(const Matrix& a) noexcept {
  double t = 0.0;
  for (std::size_t i = 0; i < a.n(); ++i) t += a(i, i);
  return t;
}

double distance_to_identity(const Matrix& a) noexcept {
  Matrix d = a;
  for (std::size_t i = 0; i < a.n(); ++i) d(i, i) -= 1.0;
  return frobenius_norm(d);
}

}  // namespace matfun
