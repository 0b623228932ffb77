#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "matfun/relu_construct.hpp"
#include "matfun/relu_network.hpp"

namespace matfun::relu {

enum class CertOracle { identity, exp };

std::string to_string(CertOracle oracle);
CertOracle parse_cert_oracle(const std::string& name);

// Reference map from a flattened input to the expected flattened output.
using OracleFn = std::function<std::vector<double>(std::span<const double>)>;

OracleFn make_oracle(CertOracle oracle, std::size_t input_dim);

struct CertDomain {
  double M = 1.0;              // inputs range over [-M, M]^input_dim
  std::size_t samples = 10000;  // grid points (input_dim 1) or low-discrepancy points
};

struct CertReport {
  std::string oracle;
  std::size_t input_dim = 0;
  double M = 1.0;
  std::size_t points = 0;   // total points evaluated, corners included
  std::size_t corners = 0;
  double max_error = 0.0;   // Euclidean (Frobenius for matrices) norm of net(x) - oracle(x)
  double mean_error = 0.0;
  std::vector<double> worst_input;
  std::size_t width = 0;
  std::size_t depth = 0;
  std::size_t weight_count = 0;

  // Filled when the network came from an ExpNetSpec.
  std::optional<ExpNetSpec> spec;
  double width_shape = 0.0;  // K n^K
  double depth_shape = 0.0;  // 1 + ln K (ln K + ln(2e/eps) + K (ln n + ln M))
  double c1 = 0.0;           // width / width_shape
  double c2 = 0.0;           // depth / depth_shape

  [[nodiscard]] bool within(double epsilon) const { return max_error <= epsilon; }
  [[nodiscard]] nlohmann::json to_json() const;
};

// Sample points used by certify: a uniform grid with both endpoints when the
// input is scalar; otherwise the box corners (input_dim <= 16) followed by
// `samples` Halton points. Row i of the result is point i.
std::vector<std::vector<double>> certification_points(std::size_t input_dim, const CertDomain& domain);

// Radical-inverse Halton sequence, skipping index 0, mapped to [-M, M].
std::vector<double> halton_point(std::size_t index, std::size_t dim, double M);

CertReport certify(const ReluNetwork& net, const OracleFn& oracle, const std::string& oracle_name,
                   const CertDomain& domain);
CertReport certify(const ReluNetwork& net, CertOracle oracle, const CertDomain& domain);

// Adds K, the bound shapes and the measured constants.
void attach_spec(CertReport& report, const ExpNetSpec& spec);

struct CertifiedExpNet {
  ReluNetwork net;
  ExpNetSpec spec;
  CertReport report;
};

// build_exp_net followed by certification on the spec's box; throws
// certification_failed when the sampled error exceeds epsilon.
CertifiedExpNet build_certified_exp_net(const ExpNetSpec& spec, std::size_t samples,
                                        std::size_t weight_budget = kDefaultWeightBudget);

nlohmann::json spec_to_json(const ExpNetSpec& spec);
ExpNetSpec spec_from_json(const nlohmann::json& j);

}  // namespace matfun::relu
