#include "matfun/metrics.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>

#include "matfun/errors.hpp"

namespace matfun::metrics {

namespace {

std::string shortest(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, r.ptr};
}

}  // namespace

double relative_l1_error(const Matrix& pred, const Matrix& target, double eps) {
  require(pred.n() == target.n(), ErrorKind::dimension_mismatch,
          "relative_l1_error: prediction is " + std::to_string(pred.n()) + "x" + std::to_string(pred.n()) +
              ", target " + std::to_string(target.n()) + "x" + std::to_string(target.n()));
  double num = 0.0;
  double den = 0.0;
  for (std::size_t k = 0; k < target.size(); ++k) {
    num += std::abs(pred.data()[k] - target.data()[k]);
    den += std::abs(target.data()[k]);
  }
  return num / (den + eps);
}

double tolerance_accuracy(std::span<const std::optional<Matrix>> preds, std::span<const Matrix> targets, double tau,
                          double eps) {
  require(!targets.empty(), ErrorKind::invalid_argument, "tolerance_accuracy: empty evaluation set");
  require(preds.size() == targets.size(), ErrorKind::dimension_mismatch, "tolerance_accuracy: prediction count differs");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (preds[i] && relative_l1_error(*preds[i], targets[i], eps) < tau) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(targets.size());
}

double tolerance_accuracy(std::span<const Matrix> preds, std::span<const Matrix> targets, double tau, double eps) {
  std::vector<std::optional<Matrix>> wrapped(preds.begin(), preds.end());
  return tolerance_accuracy(wrapped, targets, tau, eps);
}

void EvalErrors::add(const std::optional<Matrix>& pred, const Matrix& target, double eps) {
  if (pred && pred->n() == target.n()) {
    const double e = relative_l1_error(*pred, target, eps);
    errors.push_back(std::isnan(e) ? std::numeric_limits<double>::infinity() : e);
  } else {
    errors.push_back(std::numeric_limits<double>::infinity());
    ++malformed;
  }
}

double EvalErrors::accuracy(double tau) const {
  require(!errors.empty(), ErrorKind::invalid_argument, "accuracy: empty evaluation set");
  std::size_t hits = 0;
  for (double e : errors)
    if (e < tau) ++hits;
  return static_cast<double>(hits) / static_cast<double>(errors.size());
}

std::vector<AccuracyRow> report(std::span<const EvalErrors> results, std::span<const double> taus) {
  std::vector<AccuracyRow> rows;
  for (const EvalErrors& r : results) {
    for (double tau : taus) {
      rows.push_back({r.function, r.arch_or_scheme, r.n, tau, r.accuracy(tau), r.errors.size(), r.malformed});
    }
  }
  return rows;
}

std::string to_csv(std::span<const AccuracyRow> rows) {
  std::string out = "function,arch_or_scheme,n,tau,accuracy,n_eval,malformed\n";
  for (const AccuracyRow& r : rows) {
    out += r.function + "," + r.arch_or_scheme + "," + std::to_string(r.n) + "," + shortest(r.tau) + "," +
           shortest(r.accuracy) + "," + std::to_string(r.n_eval) + "," + std::to_string(r.malformed) + "\n";
  }
  return out;
}

void write_csv(const std::filesystem::path& path, std::span<const AccuracyRow> rows) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorKind::io_error, "cannot write " + path.string());
  out << to_csv(rows);
  require(static_cast<bool>(out), ErrorKind::io_error, "write failed for " + path.string());
}

std::string to_table_csv(std::span<const EvalErrors> results, std::span<const double> taus) {
  std::string out = "function,arch_or_scheme,n";
  for (double tau : taus) out += ",acc@" + shortest(tau);
  out += ",n_eval,malformed\n";
  for (const EvalErrors& e : results) {
    out += e.function + "," + e.arch_or_scheme + "," + std::to_string(e.n);
    for (double tau : taus) out += "," + shortest(e.accuracy(tau));
    out += "," + std::to_string(e.errors.size()) + "," + std::to_string(e.malformed) + "\n";
  }
  return out;
}

}  // namespace matfun::metrics
