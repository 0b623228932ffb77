#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include <Eigen/SVD>

#include "matfun/errors.hpp"
#include "matfun/spectrum.hpp"
#include "oracle_support.hpp"

using namespace matfun;

namespace {

std::vector<std::complex<double>> sorted(std::vector<std::complex<double>> v) {
  std::sort(v.begin(), v.end(), [](auto a, auto b) {
    return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag();
  });
  return v;
}

}  // namespace

TEST(Eigenvalues, Diagonal) {
  const auto info = eigenvalues(Matrix::diagonal({1, -2, 3}));
  const auto ev = sorted(info.eigenvalues);
  ASSERT_EQ(ev.size(), 3u);
  EXPECT_NEAR(ev[0].real(), -2, 1e-14);
  EXPECT_NEAR(ev[1].real(), 1, 1e-14);
  EXPECT_NEAR(ev[2].real(), 3, 1e-14);
  for (auto z : ev) EXPECT_EQ(z.imag(), 0.0);
  EXPECT_NEAR(info.min_real_abs, 1.0, 1e-14);
  EXPECT_NEAR(info.min_negreal_dist, 0.0, 1e-14);
}

TEST(Eigenvalues, Rotation) {
  const auto info = eigenvalues(Matrix{{0, 1}, {-1, 0}});
  const auto ev = sorted(info.eigenvalues);
  EXPECT_NEAR(ev[0].real(), 0, 1e-14);
  EXPECT_NEAR(ev[0].imag(), -1, 1e-14);
  EXPECT_NEAR(ev[1].imag(), 1, 1e-14);
  EXPECT_NEAR(info.min_real_abs, 0.0, 1e-14);
  EXPECT_NEAR(info.min_negreal_dist, 1.0, 1e-14);
}

TEST(Eigenvalues, CharacteristicPolynomialResidual) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const Matrix a = matfun::testing::gaussian_matrix(3, rng);
    const auto info = eigenvalues(a);
    ASSERT_EQ(info.eigenvalues.size(), 3u);
    for (auto lambda : info.eigenvalues) EXPECT_LE(std::abs(matfun::testing::char_poly(a, lambda)), 1e-6);
  }
}

TEST(Eigenvalues, SumAndProductMatchTraceAndDeterminant) {
  std::mt19937_64 rng(8);
  for (std::size_t n : {1u, 2u, 4u, 7u, 12u, 16u}) {
    for (int trial = 0; trial < 20; ++trial) {
      const Matrix a = matfun::testing::gaussian_matrix(n, rng);
      const auto info = eigenvalues(a);
      std::complex<double> sum = 0.0, prod = 1.0;
      for (auto z : info.eigenvalues) {
        sum += z;
        prod *= z;
      }
      EXPECT_NEAR(sum.real(), trace(a), 1e-9 * (1 + std::abs(trace(a))));
      EXPECT_NEAR(sum.imag(), 0.0, 1e-9);
      EXPECT_NEAR(prod.real(), determinant(a), 1e-8 * (1 + std::abs(determinant(a))));
    }
  }
}

TEST(Eigenvalues, BackwardErrorBySmallestSingularValue) {
  // sigma_min(A - lambda I) is the backward error of lambda as an eigenvalue.
  std::mt19937_64 rng(21);
  for (std::size_t n : {2u, 5u, 9u, 16u}) {
    for (int trial = 0; trial < 25; ++trial) {
      const Matrix a = matfun::testing::gaussian_matrix(n, rng);
      Eigen::MatrixXcd ac(n, n);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) ac(i, j) = a(i, j);
      for (auto lambda : eigenvalues(a).eigenvalues) {
        const Eigen::MatrixXcd shifted = ac - lambda * Eigen::MatrixXcd::Identity(n, n);
        Eigen::JacobiSVD<Eigen::MatrixXcd> svd(shifted);
        EXPECT_LE(svd.singularValues()(n - 1), 1e-8 * frobenius_norm(a));
      }
    }
  }
}

TEST(Eigenvalues, RejectsOversizeAndNonFinite) {
  EXPECT_THROW((void)eigenvalues(Matrix(17)), Error);
  Matrix bad(2);
  bad(0, 0) = std::nan("");
  EXPECT_THROW((void)eigenvalues(bad), Error);
}

TEST(Eigenvalues, HessenbergPreservesSpectrumAndShape) {
  std::mt19937_64 rng(2);
  const Matrix a = matfun::testing::gaussian_matrix(6, rng);
  const Matrix h = hessenberg(a);
  for (std::size_t i = 2; i < 6; ++i)
    for (std::size_t j = 0; j + 1 < i; ++j) EXPECT_EQ(h(i, j), 0.0);
  EXPECT_NEAR(trace(h), trace(a), 1e-12);
  EXPECT_NEAR(frobenius_norm(h), frobenius_norm(a), 1e-12);
}

TEST(Spectrum, NegativeAxisDistance) {
  EXPECT_DOUBLE_EQ(distance_to_negative_real_axis({-3.0, 0.5}), 0.5);
  EXPECT_DOUBLE_EQ(distance_to_negative_real_axis({3.0, 4.0}), 5.0);
  EXPECT_DOUBLE_EQ(distance_to_negative_real_axis({0.0, 0.0}), 0.0);
}
