#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include <unsupported/Eigen/MatrixFunctions>

#include "matfun/errors.hpp"
#include "matfun/functions.hpp"
#include "oracle_support.hpp"

using namespace matfun;
using matfun::testing::frob;
using matfun::testing::frob_diff;

namespace {

double rel_diff(const Matrix& got, const Matrix& want) { return frob_diff(got, want) / frob(want); }

Matrix sample_in_domain(MatrixFunction f, std::size_t n, std::mt19937_64& rng) {
  for (;;) {
    Matrix a = matfun::testing::gaussian_matrix(n, rng);
    if (in_domain(f, eigenvalues(a))) return a;
  }
}

// Random Z = I + E with ||E||_2 <= ||E||_F <= 0.5, so cond(Z) <= 3.
Matrix well_conditioned(std::size_t n, std::mt19937_64& rng) {
  Matrix e = matfun::testing::scaled_to_norm(matfun::testing::random_matrix(n, rng), 0.5);
  return Matrix::identity(n) + e;
}

Eigen::MatrixXd to_eigen(const Matrix& a) {
  Eigen::MatrixXd m(a.n(), a.n());
  for (std::size_t i = 0; i < a.n(); ++i)
    for (std::size_t j = 0; j < a.n(); ++j) m(i, j) = a(i, j);
  return m;
}

Matrix from_eigen(const Eigen::MatrixXd& m) {
  Matrix a(static_cast<std::size_t>(m.rows()));
  for (std::size_t i = 0; i < a.n(); ++i)
    for (std::size_t j = 0; j < a.n(); ++j) a(i, j) = m(i, j);
  return a;
}

}  // namespace

// ---- exp ----

TEST(MatExp, ZeroGivesIdentity) { EXPECT_EQ(mat_exp(Matrix(3)), Matrix::identity(3)); }

TEST(MatExp, Diagonal) {
  const Matrix e = mat_exp(Matrix::diagonal({1, 2}));
  EXPECT_NEAR(e(0, 0), std::exp(1.0), 1e-14);
  EXPECT_NEAR(e(1, 1), std::exp(2.0), 1e-13);
  EXPECT_EQ(e(0, 1), 0.0);
  EXPECT_EQ(e(1, 0), 0.0);
}

TEST(MatExp, MatchesRawTaylorForSmallNorm) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    const Matrix a = matfun::testing::scaled_to_norm(matfun::testing::random_matrix(2, rng),
                                                     std::uniform_real_distribution<double>(0.05, 1.0)(rng));
    EXPECT_LE(rel_diff(mat_exp(a), matfun::testing::raw_taylor_exp(a, 30)), 1e-12);
  }
}

TEST(MatExp, NilpotentClosedForm) {
  // exp([[0, t], [0, 0]]) = [[1, t], [0, 1]]
  const Matrix e = mat_exp(Matrix{{0, 7.5}, {0, 0}});
  EXPECT_NEAR(e(0, 1), 7.5, 1e-12);
  EXPECT_NEAR(e(0, 0), 1.0, 1e-14);
  EXPECT_NEAR(e(1, 0), 0.0, 1e-14);
}

TEST(MatExp, OverflowIsReported) {
  try {
    (void)mat_exp(Matrix::diagonal({800.0, 0.0}));
    FAIL() << "expected overflow";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::overflow);
  }
}

TEST(MatExp, InverseIdentity) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 1 + trial % 5;
    const double norm = std::uniform_real_distribution<double>(0.0, 10.0)(rng);
    const Matrix a = matfun::testing::scaled_to_norm(matfun::testing::random_matrix(n, rng), norm);
    EXPECT_LE(frob_diff(mat_mul(mat_exp(a), mat_exp(-a)), Matrix::identity(n)), 1e-7) << "norm " << norm;
  }
}

// ---- log ----

TEST(MatLog, IdentityGivesZero) { EXPECT_EQ(mat_log(Matrix::identity(3)), Matrix(3)); }

TEST(MatLog, Diagonal) {
  const Matrix l = mat_log(Matrix::diagonal({std::numbers::e, std::exp(2.0)}));
  EXPECT_NEAR(l(0, 0), 1.0, 1e-13);
  EXPECT_NEAR(l(1, 1), 2.0, 1e-13);
  EXPECT_NEAR(l(0, 1), 0.0, 1e-14);
}

TEST(MatLog, RoundTripFromExp) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + trial % 4;
    const Matrix b = matfun::testing::random_matrix(n, rng, -0.5, 0.5);
    EXPECT_LE(frob_diff(mat_log(mat_exp(b)), b), 1e-6);
  }
}

TEST(MatLog, ExpOfLogReproducesInput) {
  std::mt19937_64 rng(5);
  for (std::size_t n : {1u, 2u, 3u, 5u}) {
    for (int trial = 0; trial < 100; ++trial) {
      const Matrix a = sample_in_domain(MatrixFunction::log, n, rng);
      EXPECT_LE(rel_diff(mat_exp(mat_log(a)), a), 1e-7);
    }
  }
}

TEST(MatLog, DomainErrors) {
  for (const Matrix& bad : {Matrix::diagonal({-1.0, 2.0}), Matrix::diagonal({0.0, 1.0}), Matrix{{-1, 1e-9}, {-1e-9, -1}}}) {
    try {
      (void)mat_log(bad);
      FAIL() << "expected domain error";
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::domain_error);
    }
  }
}

TEST(MatLog, ComplexPairOffTheAxisIsFine) {
  // eigenvalues -1 +/- 0.5i: off the negative real axis
  const Matrix a{{-1, 0.5}, {-0.5, -1}};
  EXPECT_LE(rel_diff(mat_exp(mat_log(a)), a), 1e-10);
}

TEST(MatSqrt, SquaresBack) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 100; ++trial) {
    const Matrix a = sample_in_domain(MatrixFunction::log, 4, rng);
    const Matrix r = mat_sqrt(a);
    EXPECT_LE(rel_diff(mat_mul(r, r), a), 1e-9);
  }
}

// ---- sign ----

TEST(MatSign, Diagonal) {
  const Matrix s = mat_sign(Matrix::diagonal({2, -3}));
  EXPECT_LE(frob_diff(s, Matrix::diagonal({1, -1})), 1e-14);
}

TEST(MatSign, PositiveSpectrumGivesIdentity) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    Matrix a = matfun::testing::random_matrix(3, rng);
    for (std::size_t i = 0; i < 3; ++i) a(i, i) += 4.0;  // Gershgorin discs in Re > 0
    EXPECT_LE(frob_diff(mat_sign(a), Matrix::identity(3)), 1e-10);
  }
}

TEST(MatSign, MatchesSpectralProjection) {
  std::mt19937_64 rng(8);
  int checked = 0;
  while (checked < 100) {
    const Matrix a = matfun::testing::gaussian_matrix(3, rng);
    const auto ev = eigenvalues(a).eigenvalues;
    // well-separated spectrum only: the oracle divides by eigenvalue gaps
    double gap = 1e300, axis = 1e300;
    for (std::size_t i = 0; i < ev.size(); ++i) {
      axis = std::min(axis, std::abs(ev[i].real()));
      for (std::size_t j = i + 1; j < ev.size(); ++j) gap = std::min(gap, std::abs(ev[i] - ev[j]));
    }
    if (gap < 0.3 || axis < 0.1) continue;
    const Matrix oracle =
        matfun::testing::sylvester(a, ev, [](std::complex<double> z) { return z.real() > 0 ? 1.0 : -1.0; });
    EXPECT_LE(frob_diff(mat_sign(a), oracle), 1e-6);
    ++checked;
  }
}

TEST(MatSign, Invariants) {
  std::mt19937_64 rng(9);
  for (std::size_t n : {1u, 2u, 3u, 5u}) {
    for (int trial = 0; trial < 100; ++trial) {
      const Matrix a = sample_in_domain(MatrixFunction::sign, n, rng);
      const Matrix s = mat_sign(a);
      EXPECT_LE(frob_diff(mat_mul(s, s), Matrix::identity(n)), 1e-6);
      EXPECT_LE(frob_diff(mat_mul(s, a), mat_mul(a, s)), 1e-6 * frob(a));
      EXPECT_LE(frob_diff(mat_sign(s), s), 1e-9);
    }
  }
}

TEST(MatSign, DomainError) {
  try {
    (void)mat_sign(Matrix{{0, 1}, {-1, 0}});
    FAIL() << "expected domain error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::domain_error);
  }
}

// ---- sin / cos ----

TEST(MatSinCos, Zero) {
  const auto sc = mat_sincos(Matrix(2));
  EXPECT_EQ(sc.sin, Matrix(2));
  EXPECT_EQ(sc.cos, Matrix::identity(2));
}

TEST(MatSinCos, HalfPi) {
  const auto sc = mat_sincos(Matrix::diagonal({std::numbers::pi / 2}));
  EXPECT_NEAR(sc.sin(0, 0), 1.0, 1e-14);
  EXPECT_NEAR(sc.cos(0, 0), 0.0, 1e-14);
}

TEST(MatSinCos, MatchRawTaylor) {
  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 200; ++trial) {
    const Matrix a = matfun::testing::scaled_to_norm(matfun::testing::random_matrix(2, rng),
                                                     std::uniform_real_distribution<double>(0.05, 1.0)(rng));
    EXPECT_LE(rel_diff(mat_sin(a), matfun::testing::raw_taylor_sin(a, 20)), 1e-12);
    EXPECT_LE(rel_diff(mat_cos(a), matfun::testing::raw_taylor_cos(a, 20)), 1e-12);
  }
}

TEST(MatSinCos, PythagoreanIdentity) {
  std::mt19937_64 rng(11);
  for (std::size_t n : {1u, 2u, 3u, 5u}) {
    for (int trial = 0; trial < 100; ++trial) {
      const Matrix a = matfun::testing::gaussian_matrix(n, rng);
      const auto sc = mat_sincos(a);
      const Matrix sum = mat_mul(sc.sin, sc.sin) + mat_mul(sc.cos, sc.cos);
      EXPECT_LE(frob_diff(sum, Matrix::identity(n)), 1e-8);
    }
  }
}

// ---- shared properties ----

TEST(MatrixFunctions, CommuteWithArgument) {
  std::mt19937_64 rng(12);
  for (MatrixFunction f : {MatrixFunction::exp, MatrixFunction::sin, MatrixFunction::cos}) {
    for (int trial = 0; trial < 100; ++trial) {
      const Matrix a = matfun::testing::gaussian_matrix(1 + trial % 5, rng);
      const Matrix fa = apply(f, a);
      EXPECT_LE(frob_diff(mat_mul(a, fa), mat_mul(fa, a)), 1e-8 * frob(fa)) << to_string(f);
    }
  }
}

TEST(MatrixFunctions, SimilarityCovariance) {
  std::mt19937_64 rng(13);
  for (MatrixFunction f : kAllFunctions) {
    for (int trial = 0; trial < 50; ++trial) {
      const std::size_t n = 2 + trial % 3;
      const Matrix a = sample_in_domain(f, n, rng);
      const Matrix z = well_conditioned(n, rng);
      const Matrix zi = mat_inverse(z);
      const Matrix similar = mat_mul(mat_mul(z, a), zi);
      if (!in_domain(f, eigenvalues(similar))) continue;
      const Matrix lhs = apply(f, similar);
      const Matrix rhs = mat_mul(mat_mul(z, apply(f, a)), zi);
      EXPECT_LE(rel_diff(lhs, rhs), 1e-5) << to_string(f);
    }
  }
}

TEST(MatrixFunctions, BruteForceSeriesForSmallArguments) {
  std::mt19937_64 rng(14);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + trial % 4;
    const double norm = std::uniform_real_distribution<double>(0.01, 0.5)(rng);
    const Matrix a = matfun::testing::scaled_to_norm(matfun::testing::random_matrix(n, rng), norm);
    EXPECT_LE(frob_diff(mat_exp(a), matfun::testing::raw_taylor_exp(a, 40)), 1e-10);
    EXPECT_LE(frob_diff(mat_sin(a), matfun::testing::raw_taylor_sin(a, 20)), 1e-10);
    EXPECT_LE(frob_diff(mat_cos(a), matfun::testing::raw_taylor_cos(a, 20)), 1e-10);
    // the log series lives around the identity
    const Matrix near_identity = Matrix::identity(n) + a;
    EXPECT_LE(frob_diff(mat_log(near_identity), matfun::testing::raw_log_series(near_identity, 120)), 1e-10);
  }
}

TEST(MatrixFunctions, AgreeWithEigenUnsupportedModule) {
  std::mt19937_64 rng(15);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t n = 1 + trial % 5;
    const Matrix a = matfun::testing::gaussian_matrix(n, rng);
    const Eigen::MatrixXd ea = to_eigen(a);
    EXPECT_LE(rel_diff(mat_exp(a), from_eigen(ea.exp())), 1e-9);
    EXPECT_LE(rel_diff(mat_sin(a), from_eigen(ea.sin())), 1e-8);
    EXPECT_LE(rel_diff(mat_cos(a), from_eigen(ea.cos())), 1e-8);
    if (in_domain(MatrixFunction::log, eigenvalues(a))) {
      EXPECT_LE(rel_diff(mat_log(a), from_eigen(ea.log())), 1e-6);
    }
  }
}

TEST(MatrixFunctions, NamesRoundTrip) {
  for (MatrixFunction f : kAllFunctions) EXPECT_EQ(parse_function(to_string(f)), f);
  EXPECT_FALSE(parse_function("tanh").has_value());
}
