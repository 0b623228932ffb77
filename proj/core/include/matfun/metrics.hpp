#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "matfun/matrix.hpp"

namespace matfun::metrics {

inline constexpr double kDefaultGuard = 1e-7;
inline constexpr double kDefaultTaus[] = {0.05, 0.02, 0.01, 0.005};

// sum |pred - target| / (sum |target| + eps).
double relative_l1_error(const Matrix& pred, const Matrix& target, double eps = kDefaultGuard);

// Fraction of samples whose relative l1 error is strictly below tau. A missing
// prediction (malformed model output) is a failure at every tau.
double tolerance_accuracy(std::span<const std::optional<Matrix>> preds, std::span<const Matrix> targets, double tau,
                          double eps = kDefaultGuard);
double tolerance_accuracy(std::span<const Matrix> preds, std::span<const Matrix> targets, double tau,
                          double eps = kDefaultGuard);

// Per-sample errors of one (function, model) evaluation; malformed outputs are
// stored as +inf.
struct EvalErrors {
  std::string function;
  std::string arch_or_scheme;
  std::size_t n = 0;
  std::vector<double> errors;
  std::size_t malformed = 0;

  void add(const std::optional<Matrix>& pred, const Matrix& target, double eps = kDefaultGuard);
  [[nodiscard]] double accuracy(double tau) const;
};

struct AccuracyRow {
  std::string function;
  std::string arch_or_scheme;
  std::size_t n = 0;
  double tau = 0.0;
  double accuracy = 0.0;
  std::size_t n_eval = 0;
  std::size_t malformed = 0;
};

std::vector<AccuracyRow> report(std::span<const EvalErrors> results,
                                std::span<const double> taus = kDefaultTaus);

// Header `function,arch_or_scheme,n,tau,accuracy,n_eval,malformed`; numbers
// in shortest round-trip form so identical results give identical bytes.
std::string to_csv(std::span<const AccuracyRow> rows);
void write_csv(const std::filesystem::path& path, std::span<const AccuracyRow> rows);

// One row per result with an accuracy column per tau ("acc@0.05", ...).
std::string to_table_csv(std::span<const EvalErrors> results, std::span<const double> taus);

}  // namespace matfun::metrics
