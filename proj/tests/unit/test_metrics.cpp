#include <gtest/gtest.h>

#include <random>

#include "matfun/errors.hpp"
#include "matfun/metrics.hpp"

using namespace matfun;
using namespace matfun::metrics;

namespace {

Matrix scalar(double v) { return Matrix{{v}}; }

}  // namespace

TEST(ToleranceAccuracy, PerfectPredictions) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g;
  std::vector<Matrix> ys;
  for (int i = 0; i < 50; ++i) {
    Matrix y(3);
    for (double& v : y.data()) v = g(rng);
    ys.push_back(y);
  }
  for (double tau : kDefaultTaus) EXPECT_EQ(tolerance_accuracy(ys, ys, tau), 1.0);
}

TEST(ToleranceAccuracy, HandCheckedCases) {
  const std::vector<Matrix> y{scalar(1.0)};
  const std::vector<Matrix> yhat{scalar(1.03)};
  EXPECT_DOUBLE_EQ(relative_l1_error(yhat[0], y[0]), (1.03 - 1.0) / (1.0 + 1e-7));
  EXPECT_EQ(tolerance_accuracy(yhat, y, 0.05), 1.0);
  EXPECT_EQ(tolerance_accuracy(yhat, y, 0.02), 0.0);

  const std::vector<Matrix> y2{scalar(1.0), scalar(1.0)};
  const std::vector<Matrix> yhat2{scalar(1.0), scalar(1.03)};
  EXPECT_EQ(tolerance_accuracy(yhat2, y2, 0.05), 1.0);
  EXPECT_EQ(tolerance_accuracy(yhat2, y2, 0.02), 0.5);
}

TEST(ToleranceAccuracy, BoundaryIsAFailure) {
  const std::vector<Matrix> y{scalar(1.0)};
  const std::vector<Matrix> yhat{scalar(1.5)};
  EXPECT_EQ(tolerance_accuracy(yhat, y, 0.5, 0.0), 0.0);
  EXPECT_EQ(tolerance_accuracy(yhat, y, std::nextafter(0.5, 1.0), 0.0), 1.0);
}

TEST(ToleranceAccuracy, MalformedCountsAsFailure) {
  const std::vector<Matrix> y{scalar(2.0), scalar(2.0)};
  const std::vector<std::optional<Matrix>> yhat{scalar(2.0), std::nullopt};
  EXPECT_EQ(tolerance_accuracy(yhat, y, 0.05), 0.5);
  EvalErrors e{"exp", "P1000", 1, {}, 0};
  e.add(yhat[0], y[0]);
  e.add(yhat[1], y[1]);
  e.add(Matrix(2), y[0]);  // wrong shape
  EXPECT_EQ(e.malformed, 2u);
  EXPECT_DOUBLE_EQ(e.accuracy(0.05), 1.0 / 3.0);
}

TEST(ToleranceAccuracy, Errors) {
  const std::vector<Matrix> none;
  EXPECT_THROW(tolerance_accuracy(none, none, 0.05), Error);
  const std::vector<Matrix> a{scalar(1.0)};
  const std::vector<Matrix> b{Matrix(2)};
  EXPECT_THROW(tolerance_accuracy(a, b, 0.05), Error);
}

TEST(ToleranceAccuracy, MonotoneInTau) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> noise(0.0, 0.08);
  for (int batch = 0; batch < 100; ++batch) {
    std::vector<Matrix> ys, ps;
    const double level = noise(rng);
    for (int i = 0; i < 40; ++i) {
      Matrix y(2), p(2);
      for (std::size_t k = 0; k < 4; ++k) {
        y.data()[k] = g(rng);
        p.data()[k] = y.data()[k] * (1.0 + level * g(rng));
      }
      ys.push_back(y);
      ps.push_back(p);
    }
    double prev = 1.0;
    for (double tau : {0.1, 0.05, 0.02, 0.01, 0.005, 0.001}) {
      const double acc = tolerance_accuracy(ps, ys, tau);
      EXPECT_LE(acc, prev);
      prev = acc;
    }
  }
}

TEST(ToleranceAccuracy, ScaleInvariantWithoutGuard) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  for (int t = 0; t < 200; ++t) {
    Matrix y(3), p(3);
    for (std::size_t k = 0; k < 9; ++k) {
      y.data()[k] = g(rng);
      p.data()[k] = y.data()[k] + 0.01 * g(rng);
    }
    const double c = 1024.0;  // exact scaling
    EXPECT_EQ(relative_l1_error(c * p, c * y, 0.0), relative_l1_error(p, y, 0.0));
    // the guard breaks invariance for tiny targets
    EXPECT_NE(relative_l1_error(1e-9 * p, 1e-9 * y), relative_l1_error(p, y));
  }
}

TEST(Report, RowsAndCsv) {
  EvalErrors perfect{"sign", "FP15", 3, {}, 0};
  EvalErrors mixed{"exp", "mlp3", 1, {}, 0};
  for (int i = 0; i < 4; ++i) perfect.add(Matrix::identity(3), Matrix::identity(3));
  mixed.add(scalar(1.03), scalar(1.0));
  mixed.add(scalar(1.0), scalar(1.0));
  const std::vector<EvalErrors> all{perfect, mixed};
  const auto rows = report(all);
  ASSERT_EQ(rows.size(), 8u);
  for (int i = 0; i < 4; ++i) EXPECT_EQ(rows[i].accuracy, 1.0);
  for (std::size_t i = 1; i < rows.size(); ++i)
    if (rows[i].function == rows[i - 1].function) EXPECT_LE(rows[i].accuracy, rows[i - 1].accuracy);
  EXPECT_EQ(to_csv(std::span(rows).subspan(4, 2)),
            "function,arch_or_scheme,n,tau,accuracy,n_eval,malformed\n"
            "exp,mlp3,1,0.05,1,2,0\n"
            "exp,mlp3,1,0.02,0.5,2,0\n");
}
