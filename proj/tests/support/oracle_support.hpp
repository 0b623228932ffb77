#pragma once

// Test-only reference computations. Everything here is deliberately naive and
// shares no code path with the library implementations it checks.

#include <algorithm>
#include <cmath>
#include <complex>
#include <random>
#include <vector>

#include "matfun/matrix.hpp"

namespace matfun::testing {

using cplx = std::complex<double>;
using CMatrix = std::vector<std::vector<cplx>>;

inline Matrix random_matrix(std::size_t n, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix m(n);
  for (double& v : m.data()) v = u(rng);
  return m;
}

// Gaussian entries clipped to [-clip, clip], matching the experiments' input law.
inline Matrix gaussian_matrix(std::size_t n, std::mt19937_64& rng, double clip = 5.0) {
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix m(n);
  for (double& v : m.data()) v = std::clamp(g(rng), -clip, clip);
  return m;
}

inline Matrix scaled_to_norm(Matrix m, double target) {
  double s = 0.0;
  for (double v : m.data()) s += v * v;
  s = std::sqrt(s);
  if (s > 0.0) m *= target / s;
  return m;
}

inline Matrix triple_loop_product(const Matrix& a, const Matrix& b) {
  const std::size_t n = a.n();
  Matrix c(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t l = 0; l < n; ++l) s += a(i, l) * b(l, j);
      c(i, j) = s;
    }
  return c;
}

inline double frob_diff(const Matrix& a, const Matrix& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += (a.data()[k] - b.data()[k]) * (a.data()[k] - b.data()[k]);
  return std::sqrt(s);
}

inline double frob(const Matrix& a) { return frob_diff(a, Matrix(a.n())); }

// Raw truncated power series sum_{k=0}^{terms-1} c_k A^k, no scaling.
template <class Coeff>
Matrix raw_series(const Matrix& a, int terms, Coeff coeff) {
  const std::size_t n = a.n();
  Matrix power = Matrix::identity(n);
  Matrix sum(n);
  for (int k = 0; k < terms; ++k) {
    const double c = coeff(k);
    for (std::size_t i = 0; i < sum.size(); ++i) sum.data()[i] += c * power.data()[i];
    power = triple_loop_product(power, a);
  }
  return sum;
}

inline double inv_factorial(int k) {
  double f = 1.0;
  for (int i = 2; i <= k; ++i) f *= i;
  return 1.0 / f;
}

inline Matrix raw_taylor_exp(const Matrix& a, int terms) {
  return raw_series(a, terms, [](int k) { return inv_factorial(k); });
}

inline Matrix raw_taylor_sin(const Matrix& a, int terms) {
  return raw_series(a, 2 * terms, [](int k) {
    if (k % 2 == 0) return 0.0;
    return ((k / 2) % 2 == 0 ? 1.0 : -1.0) * inv_factorial(k);
  });
}

inline Matrix raw_taylor_cos(const Matrix& a, int terms) {
  return raw_series(a, 2 * terms, [](int k) {
    if (k % 2 == 1) return 0.0;
    return ((k / 2) % 2 == 0 ? 1.0 : -1.0) * inv_factorial(k);
  });
}

// log(I + E) partial sum for ||E|| < 1.
inline Matrix raw_log_series(const Matrix& a, int terms) {
  Matrix e = a;
  for (std::size_t i = 0; i < e.n(); ++i) e(i, i) -= 1.0;
  return raw_series(e, terms, [](int k) {
    if (k == 0) return 0.0;
    return (k % 2 == 1 ? 1.0 : -1.0) / k;
  });
}

inline CMatrix to_complex(const Matrix& a) {
  CMatrix c(a.n(), std::vector<cplx>(a.n()));
  for (std::size_t i = 0; i < a.n(); ++i)
    for (std::size_t j = 0; j < a.n(); ++j) c[i][j] = a(i, j);
  return c;
}

// det(A - lambda I) by complex Gaussian elimination with partial pivoting.
inline cplx char_poly(const Matrix& a, cplx lambda) {
  CMatrix m = to_complex(a);
  const std::size_t n = a.n();
  for (std::size_t i = 0; i < n; ++i) m[i][i] -= lambda;
  cplx det = 1.0;
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t p = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::abs(m[r][c]) > std::abs(m[p][c])) p = r;
    if (std::abs(m[p][c]) == 0.0) return 0.0;
    if (p != c) {
      std::swap(m[p], m[c]);
      det = -det;
    }
    det *= m[c][c];
    for (std::size_t r = c + 1; r < n; ++r) {
      const cplx f = m[r][c] / m[c][c];
      for (std::size_t j = c; j < n; ++j) m[r][j] -= f * m[c][j];
    }
  }
  return det;
}

inline CMatrix cmul(const CMatrix& a, const CMatrix& b) {
  const std::size_t n = a.size();
  CMatrix c(n, std::vector<cplx>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t l = 0; l < n; ++l)
      for (std::size_t j = 0; j < n; ++j) c[i][j] += a[i][l] * b[l][j];
  return c;
}

// Sylvester's formula f(A) = sum_i f(l_i) prod_{j != i} (A - l_j I) / (l_i - l_j),
// valid for distinct eigenvalues. Returns the real part.
template <class F>
Matrix sylvester(const Matrix& a, const std::vector<cplx>& eig, F f) {
  const std::size_t n = a.n();
  const CMatrix ac = to_complex(a);
  CMatrix total(n, std::vector<cplx>(n));
  for (std::size_t i = 0; i < eig.size(); ++i) {
    CMatrix prod(n, std::vector<cplx>(n));
    for (std::size_t k = 0; k < n; ++k) prod[k][k] = 1.0;
    for (std::size_t j = 0; j < eig.size(); ++j) {
      if (j == i) continue;
      CMatrix factor = ac;
      for (std::size_t k = 0; k < n; ++k) factor[k][k] -= eig[j];
      const cplx denom = eig[i] - eig[j];
      for (auto& row : factor)
        for (auto& v : row) v /= denom;
      prod = cmul(prod, factor);
    }
    const cplx fi = f(eig[i]);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < n; ++c) total[r][c] += fi * prod[r][c];
  }
  Matrix out(n);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < n; ++c) out(r, c) = total[r][c].real();
  return out;
}

}  // namespace matfun::testing
