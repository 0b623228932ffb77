#include <gtest/gtest.h>

#include <random>

#include "matfun/errors.hpp"
#include "matfun/matrix.hpp"
#include "oracle_support.hpp"

using namespace matfun;
using matfun::testing::frob_diff;

TEST(MatMul, IdentityIsNeutral) {
  const Matrix a{{1, 2, 3}, {4, 5, 6}, {7, 8, 10}};
  EXPECT_EQ(mat_mul(Matrix::identity(3), a), a);
  EXPECT_EQ(mat_mul(a, Matrix::identity(3)), a);
}

TEST(MatMul, DiagonalProduct) {
  EXPECT_EQ(mat_mul(Matrix::diagonal({2, 3}), Matrix::diagonal({5, 7})), Matrix::diagonal({10, 21}));
}

TEST(MatMul, MatchesTripleLoop) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const Matrix a = matfun::testing::random_matrix(3, rng, -5, 5);
    const Matrix b = matfun::testing::random_matrix(3, rng, -5, 5);
    const Matrix c = mat_mul(a, b);
    const Matrix ref = matfun::testing::triple_loop_product(a, b);
    for (std::size_t k = 0; k < c.size(); ++k) EXPECT_NEAR(c.data()[k], ref.data()[k], 1e-13);
  }
}

TEST(MatMul, DimensionMismatchThrows) {
  try {
    (void)mat_mul(Matrix(2), Matrix(3));
    FAIL() << "expected throw";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::dimension_mismatch);
  }
}

TEST(MatInverse, TrivialCases) {
  EXPECT_EQ(mat_inverse(Matrix::identity(4)), Matrix::identity(4));
  EXPECT_EQ(mat_inverse(Matrix::diagonal({2, 4})), Matrix::diagonal({0.5, 0.25}));
}

TEST(MatInverse, ResidualOnWellConditioned) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    Matrix a = matfun::testing::random_matrix(4, rng);
    for (std::size_t i = 0; i < 4; ++i) a(i, i) += 4.0;  // diagonally dominant
    const Matrix r = mat_mul(a, mat_inverse(a));
    EXPECT_LE(frob_diff(r, Matrix::identity(4)), 1e-8 * 4);
  }
}

TEST(MatInverse, IllConditionedButValidResidual) {
  // condition number about 1e6
  const Matrix a = Matrix::diagonal({1.0, 1e-3, 1e-6});
  Matrix q{{0.36, 0.48, -0.8}, {-0.8, 0.6, 0.0}, {0.48, 0.64, 0.6}};  // orthogonal
  const Matrix m = mat_mul(mat_mul(q, a), q.transposed());
  EXPECT_LE(frob_diff(mat_mul(m, mat_inverse(m)), Matrix::identity(3)), 1e-8 * 3);
}

TEST(MatInverse, SingularThrows) {
  const Matrix s{{1, 2}, {2, 4}};
  try {
    (void)mat_inverse(s);
    FAIL() << "expected throw";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::singular_matrix);
  }
  EXPECT_THROW((void)mat_inverse(Matrix::diagonal({1.0, 1e-13})), Error);
}

TEST(Norms, Basics) {
  const Matrix a{{3, -4}, {0, 0}};
  EXPECT_DOUBLE_EQ(frobenius_norm(a), 5.0);
  EXPECT_DOUBLE_EQ(entry_l1(a), 7.0);
  EXPECT_DOUBLE_EQ(one_norm(a), 4.0);
  EXPECT_DOUBLE_EQ(trace(a), 3.0);
  EXPECT_DOUBLE_EQ(frobenius_norm(Matrix::diagonal({1e200, 1e200})), std::sqrt(2.0) * 1e200);
}

TEST(Determinant, KnownValues) {
  EXPECT_DOUBLE_EQ(determinant(Matrix::diagonal({2, 3, 4})), 24.0);
  EXPECT_NEAR(determinant(Matrix{{0, 1}, {1, 0}}), -1.0, 1e-15);
  EXPECT_EQ(determinant(Matrix{{1, 2}, {2, 4}}), 0.0);
}
