#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "matfun/matrix.hpp"
#include "matfun/relu_network.hpp"

namespace matfun::relu {

// Default cap on scalar weights (nonzero weights plus biases) of any single
// construction. Width grows like K * n^K, so n = 3 already needs a larger cap.
inline constexpr std::size_t kDefaultWeightBudget = 10'000'000;

// ---- approximate squaring and multiplication ----

// Number of sawtooth levels m such that bound^2 * 4^-(m+1) <= delta.
std::size_t squarer_levels(double delta, double bound);

// Sawtooth squarer on [-bound, bound] with exactly `levels` hat compositions.
// x -> |x| / bound = t through relu(x) + relu(-x), then
// t^2 ~= t - sum_{s=1..levels} g_s(t) / 4^s where g_s is the s-fold hat map.
// Width 4, depth levels + 1, sup error bound^2 * 4^-(levels+1).
ReluNetwork build_square_net_levels(std::size_t levels, double bound);

// sup_{|x| <= bound} |net(x) - x^2| <= delta.
ReluNetwork build_square_net(double delta, double bound);

// sup_{|x| <= bound1, |y| <= bound2} |net(x, y) - x y| <= delta, via
// xy = bound1 bound2 ((u + v)^2 - u^2 - v^2) / 2 with u = x / bound1, v = y / bound2.
ReluNetwork build_binary_product(double delta, double bound1, double bound2);

struct ProductNet {
  ReluNetwork net;
  double node_tolerance = 0.0;  // tolerance given to every binary node
  double error_bound = 0.0;     // accumulated worst-case bound, <= delta
  std::size_t nodes = 0;        // binary product nodes in the tree (l - 1)
};

// Balanced binary tree of binary products approximating x_1 * ... * x_l on the
// box prod [-bounds_i, bounds_i]. Every node receives the same tolerance; the
// worst-case error, including the range inflation of approximate intermediate
// products, is kept <= delta.
ProductNet build_lary_product(std::size_t l, double delta, std::span<const double> bounds);

// ---- matrix powers and the exponential ----

// Number of index paths contributing to one entry of A^k: n^(k-1) (1 for k = 0).
std::size_t path_count(std::size_t n, std::size_t k);

// (A^k)_ij as the sum over index paths l_0 = i, ..., l_k = j of
// prod_q a_{l_(q-1) l_q}. Exact path enumeration; used as a combinatorial check.
Matrix matrix_power_by_paths(const Matrix& a, std::size_t k);

struct MatrixPowerNet {
  ReluNetwork net;
  std::size_t products_per_entry = 0;  // n^(k-1) product subnetworks summed per entry
  double product_tolerance = 0.0;      // delta / n^(k-1)
};

// Maps flattened A (row-major, n^2 inputs) to flattened A^k with entrywise error
// <= delta on [-bound, bound]^(n x n). Throws resource_exhausted when the
// assembled network would exceed `weight_budget` scalar weights.
MatrixPowerNet build_matrix_power_net(std::size_t n, std::size_t k, double delta, double bound,
                                      std::size_t weight_budget = kDefaultWeightBudget);

// Taylor order from the width/depth theorem:
// K = ceil(max{e n M, (n M + ln(sqrt 2 / (sqrt(pi) eps))) / ln 2 - 1}).
std::size_t compute_K(std::size_t n, double M, double epsilon);

struct ExpNetSpec {
  std::size_t n = 1;
  double M = 1.0;
  double epsilon = 0.1;
  std::size_t K = 0;
  double delta = 0.0;  // epsilon / (2 e^n)

  static ExpNetSpec make(std::size_t n, double M, double epsilon);
};

// Phi(A) = sum_{j=0..K} P_j(A) / j! with P_0 = I, P_1 = A and P_j the
// matrix-power networks at tolerance spec.delta.
ReluNetwork build_exp_net(const ExpNetSpec& spec, std::size_t weight_budget = kDefaultWeightBudget);

// Estimated scalar weights of build_exp_net without assembling it.
std::size_t estimate_exp_net_weights(const ExpNetSpec& spec);

// Truncated Taylor sum sum_{k=0..K} A^k / k!.
Matrix taylor_partial_sum(const Matrix& a, std::size_t K);

// (1 / sqrt(2 pi)) (1/2)^(K+1) e^(n M); valid for K >= 2 e n M - 1.
double taylor_remainder_bound(std::size_t n, double M, std::size_t K);

// Shapes of the width and depth bounds with unit constants:
// K n^K and 1 + ln K (ln K + ln(2e / eps) + K (ln n + ln M)).
double width_bound_shape(std::size_t n, std::size_t K);
double depth_bound_shape(std::size_t n, double M, double epsilon, std::size_t K);

}  // namespace matfun::relu
