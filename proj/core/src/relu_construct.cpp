#include "matfun/relu_construct.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

#include "matfun/errors.hpp"

namespace matfun::relu {

namespace {

void require_tolerance(double delta, const char* op) {
  require(delta > 0.0 && delta < 1.0, ErrorKind::invalid_argument, std::string(op) + ": delta must lie in (0, 1)");
}

void require_bound(double bound, const char* op) {
  require(bound >= 1.0 && std::isfinite(bound), ErrorKind::invalid_argument, std::string(op) + ": bound must be >= 1");
}

// Levels needed so that the binary product error bound1 bound2 4^-m / 2 <= delta.
std::size_t product_levels(double delta, double bound1, double bound2) {
  std::size_t m = 0;
  while (bound1 * bound2 * std::ldexp(1.0, -2 * static_cast<int>(m)) / 2.0 > delta) ++m;
  return m;
}

struct Budget {
  double range;  // bound on |true product| of the subtree's factors
  double error;  // bound on |approximation - true product|
};

Budget tree_budget(std::span<const double> bounds, std::size_t begin, std::size_t end, double node_tol, bool linear) {
  if (end - begin == 1) return {bounds[begin], 0.0};
  const std::size_t mid = begin + (end - begin + 1) / 2;
  const Budget l = tree_budget(bounds, begin, mid, node_tol, linear);
  const Budget r = tree_budget(bounds, mid, end, node_tol, linear);
  double err = node_tol + l.error * r.range + r.error * l.range;
  if (!linear) err += l.error * r.error;
  return {l.range * r.range, err};
}

ReluNetwork build_tree(std::span<const double> bounds, std::size_t begin, std::size_t end, double node_tol,
                       std::size_t l) {
  if (end - begin == 1) {
    const std::size_t idx = begin;
    return selector(l, std::span<const std::size_t>(&idx, 1));
  }
  const std::size_t mid = begin + (end - begin + 1) / 2;
  const Budget lb = tree_budget(bounds, begin, mid, node_tol, false);
  const Budget rb = tree_budget(bounds, mid, end, node_tol, false);
  std::vector<ReluNetwork> children;
  children.push_back(build_tree(bounds, begin, mid, node_tol, l));
  children.push_back(build_tree(bounds, mid, end, node_tol, l));
  const ReluNetwork node = build_binary_product(node_tol, lb.range + lb.error, rb.range + rb.error);
  return serial(node, parallel_padded(std::move(children)));
}

std::size_t checked_power(std::size_t base, std::size_t exp) {
  std::size_t out = 1;
  for (std::size_t i = 0; i < exp; ++i) {
    require(out <= std::numeric_limits<std::size_t>::max() / std::max<std::size_t>(base, 1), ErrorKind::resource_exhausted,
            "path count overflows");
    out *= base;
  }
  return out;
}

}  // namespace

std::size_t squarer_levels(double delta, double bound) {
  require(delta > 0.0, ErrorKind::invalid_argument, "squarer_levels: delta must be positive");
  std::size_t m = 0;
  while (bound * bound * std::ldexp(1.0, -2 * static_cast<int>(m + 1)) > delta) ++m;
  return m;
}

ReluNetwork build_square_net_levels(std::size_t levels, double bound) {
  require_bound(bound, "build_square_net");
  std::vector<Layer> layers;
  // relu(x), relu(-x)
  layers.push_back(Layer::dense({{1.0}, {-1.0}}, {0.0, 0.0}, Activation::relu));
  const double inv_bound = 1.0 / bound;
  const double out_scale = bound * bound;
  if (levels == 0) {
    layers.push_back(Layer::dense({{out_scale * inv_bound, out_scale * inv_bound}}, {0.0}, Activation::identity));
    return ReluNetwork(std::move(layers));
  }
  // Level 1 reads t = (relu(x) + relu(-x)) / bound: [acc = t, relu(t), relu(t - 1/2), relu(t - 1)].
  layers.push_back(Layer::dense({{inv_bound, inv_bound}, {inv_bound, inv_bound}, {inv_bound, inv_bound}, {inv_bound, inv_bound}},
                                {0.0, 0.0, -0.5, -1.0}, Activation::relu));
  // Level s reads g = 2 h1 - 4 h2 + 2 h3 (the hat map of the previous argument)
  // and updates acc <- acc - g / 4^(s-1).
  for (std::size_t s = 2; s <= levels; ++s) {
    const double w = std::ldexp(1.0, -2 * static_cast<int>(s - 1));
    layers.push_back(Layer::dense({{1.0, -2.0 * w, 4.0 * w, -2.0 * w},
                                   {0.0, 2.0, -4.0, 2.0},
                                   {0.0, 2.0, -4.0, 2.0},
                                   {0.0, 2.0, -4.0, 2.0}},
                                  {0.0, 0.0, -0.5, -1.0}, Activation::relu));
  }
  const double w = std::ldexp(1.0, -2 * static_cast<int>(levels));
  layers.push_back(Layer::dense({{out_scale, -2.0 * w * out_scale, 4.0 * w * out_scale, -2.0 * w * out_scale}}, {0.0},
                                Activation::identity));
  return ReluNetwork(std::move(layers));
}

ReluNetwork build_square_net(double delta, double bound) {
  require_tolerance(delta, "build_square_net");
  require_bound(bound, "build_square_net");
  return build_square_net_levels(squarer_levels(delta, bound), bound);
}

ReluNetwork build_binary_product(double delta, double bound1, double bound2) {
  require_tolerance(delta, "build_binary_product");
  require_bound(bound1, "build_binary_product");
  require_bound(bound2, "build_binary_product");
  // Squarer errors are one-sided (f_m(t) >= t^2), so
  // |e(u+v) - e(u) - e(v)| <= max(4, 2) 4^-(m+1) = 4^-m.
  const std::size_t m = product_levels(delta, bound1, bound2);
  const double a = 1.0 / bound1;
  const double b = 1.0 / bound2;
  std::vector<ReluNetwork> squares;
  squares.push_back(serial(build_square_net_levels(m, 2.0), affine(2, 1, {{0, 0, a}, {0, 1, b}})));
  squares.push_back(serial(build_square_net_levels(m, 1.0), affine(2, 1, {{0, 0, a}})));
  squares.push_back(serial(build_square_net_levels(m, 1.0), affine(2, 1, {{0, 1, b}})));
  const double half = 0.5 * bound1 * bound2;
  const ReluNetwork combine = affine(3, 1, {{0, 0, half}, {0, 1, -half}, {0, 2, -half}});
  return serial(combine, parallel(squares));
}

ProductNet build_lary_product(std::size_t l, double delta, std::span<const double> bounds) {
  require(l >= 1, ErrorKind::invalid_argument, "build_lary_product: l must be >= 1");
  require(bounds.size() == l, ErrorKind::dimension_mismatch, "build_lary_product: need one bound per factor");
  require_tolerance(delta, "build_lary_product");
  for (double b : bounds) require_bound(b, "build_lary_product");

  ProductNet out;
  out.nodes = l - 1;
  if (l == 1) {
    const std::size_t idx = 0;
    out.net = selector(1, std::span<const std::size_t>(&idx, 1));
    return out;
  }
  // Worst-case error is delta_node * S to first order; start there and shrink
  // until the exact recursion (with the quadratic cross terms) fits.
  const double amplification = tree_budget(bounds, 0, l, 1.0, true).error;
  double node_tol = delta / amplification;
  while (tree_budget(bounds, 0, l, node_tol, false).error > delta) node_tol *= 0.95;
  out.node_tolerance = node_tol;
  out.error_bound = tree_budget(bounds, 0, l, node_tol, false).error;
  out.net = build_tree(bounds, 0, l, node_tol, l);
  return out;
}

std::size_t path_count(std::size_t n, std::size_t k) { return k == 0 ? 1 : checked_power(n, k - 1); }

Matrix matrix_power_by_paths(const Matrix& a, std::size_t k) {
  const std::size_t n = a.n();
  if (k == 0) return Matrix::identity(n);
  Matrix out(n);
  const std::size_t paths = path_count(n, k);
  std::vector<std::size_t> inner(k - 1, 0);  // l_1 .. l_(k-1)
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double sum = 0.0;
      for (std::size_t p = 0; p < paths; ++p) {
        std::size_t code = p;
        for (std::size_t q = 0; q + 1 < k; ++q) {
          inner[q] = code % n;
          code /= n;
        }
        double prod = 1.0;
        std::size_t from = i;
        for (std::size_t q = 0; q < k; ++q) {
          const std::size_t to = q + 1 < k ? inner[q] : j;
          prod *= a(from, to);
          from = to;
        }
        sum += prod;
      }
      out(i, j) = sum;
    }
  }
  return out;
}

MatrixPowerNet build_matrix_power_net(std::size_t n, std::size_t k, double delta, double bound,
                                      std::size_t weight_budget) {
  require(n >= 1, ErrorKind::invalid_argument, "build_matrix_power_net: n must be >= 1");
  require_tolerance(delta, "build_matrix_power_net");
  require_bound(bound, "build_matrix_power_net");
  const std::size_t d = n * n;
  MatrixPowerNet out;
  out.products_per_entry = path_count(n, k);

  if (k == 0) {
    std::vector<double> bias(d, 0.0);
    for (std::size_t i = 0; i < n; ++i) bias[i * n + i] = 1.0;
    out.net = affine(d, d, {}, std::move(bias));
    return out;
  }
  if (k == 1) {
    std::vector<std::size_t> all(d);
    std::iota(all.begin(), all.end(), 0);
    out.net = selector(d, all);
    return out;
  }

  const std::size_t paths = out.products_per_entry;
  const std::size_t instances = paths * d;
  // k * n^(k-1) factors per entry is the first thing to blow up; refuse before
  // building even the template.
  require(k * paths <= weight_budget, ErrorKind::resource_exhausted,
          "build_matrix_power_net: n^(k-1) * k = " + std::to_string(k * paths) + " exceeds the weight budget " +
              std::to_string(weight_budget));
  out.product_tolerance = delta / static_cast<double>(paths);
  const std::vector<double> bounds(k, bound);
  const ProductNet product = build_lary_product(k, std::min(out.product_tolerance, 0.5), bounds);
  const double estimate = static_cast<double>(instances) * static_cast<double>(product.net.weight_count());
  require(estimate <= static_cast<double>(weight_budget), ErrorKind::resource_exhausted,
          "build_matrix_power_net: about " + std::to_string(static_cast<std::size_t>(estimate)) +
              " weights needed for A^" + std::to_string(k) + " (budget " + std::to_string(weight_budget) + ")");

  std::vector<ReluNetwork> nets;
  nets.reserve(instances);
  std::vector<std::size_t> mapping(k);
  std::vector<Triplet> sum_weights;
  sum_weights.reserve(instances);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t p = 0; p < paths; ++p) {
        std::size_t code = p;
        std::size_t from = i;
        for (std::size_t q = 0; q < k; ++q) {
          std::size_t to = j;
          if (q + 1 < k) {
            to = code % n;
            code /= n;
          }
          mapping[q] = from * n + to;
          from = to;
        }
        sum_weights.push_back({i * n + j, nets.size(), 1.0});
        nets.push_back(remap_inputs(product.net, d, mapping));
      }
    }
  }
  const ReluNetwork stacked = parallel(nets);
  nets.clear();
  out.net = serial(affine(instances, d, sum_weights), stacked);
  return out;
}

std::size_t compute_K(std::size_t n, double M, double epsilon) {
  require(n >= 1, ErrorKind::invalid_argument, "compute_K: n must be >= 1");
  require(M >= 1.0, ErrorKind::invalid_argument, "compute_K: M must be >= 1");
  require(epsilon > 0.0, ErrorKind::invalid_argument, "compute_K: epsilon must be positive");
  const double nM = static_cast<double>(n) * M;
  const double first = std::numbers::e * nM;
  const double second =
      (nM + std::log(std::numbers::sqrt2 / (std::sqrt(std::numbers::pi) * epsilon))) / std::numbers::ln2 - 1.0;
  return static_cast<std::size_t>(std::max(1.0, std::ceil(std::max(first, second))));
}

ExpNetSpec ExpNetSpec::make(std::size_t n, double M, double epsilon) {
  ExpNetSpec spec;
  spec.n = n;
  spec.M = M;
  spec.epsilon = epsilon;
  spec.K = compute_K(n, M, epsilon);
  spec.delta = epsilon / (2.0 * std::exp(static_cast<double>(n)));
  return spec;
}

std::size_t estimate_exp_net_weights(const ExpNetSpec& spec) {
  const std::size_t d = spec.n * spec.n;
  double total = 2.0 * static_cast<double>(d);
  for (std::size_t j = 2; j <= spec.K; ++j) {
    const std::size_t paths = path_count(spec.n, j);
    const double tol = std::min(spec.delta / static_cast<double>(paths), 0.5);
    const std::vector<double> bounds(j, spec.M);
    total += static_cast<double>(paths * d) *
             static_cast<double>(build_lary_product(j, tol, bounds).net.weight_count());
  }
  return static_cast<std::size_t>(std::min(total, 1e18));
}

ReluNetwork build_exp_net(const ExpNetSpec& spec, std::size_t weight_budget) {
  require(spec.K >= 1, ErrorKind::invalid_argument, "build_exp_net: K must be >= 1");
  require(spec.epsilon > 0.0 && spec.delta > 0.0, ErrorKind::invalid_argument, "build_exp_net: invalid tolerances");
  const std::size_t n = spec.n;
  const std::size_t d = n * n;

  for (std::size_t j = 2; j <= spec.K; ++j) {
    require(j * path_count(n, j) <= weight_budget, ErrorKind::resource_exhausted,
            "build_exp_net: n^(k-1) * k exceeds the weight budget at k = " + std::to_string(j));
  }
  const std::size_t estimate = estimate_exp_net_weights(spec);
  require(estimate <= weight_budget, ErrorKind::resource_exhausted,
          "build_exp_net: about " + std::to_string(estimate) + " weights needed (budget " +
              std::to_string(weight_budget) + ")");

  std::vector<ReluNetwork> powers;
  std::vector<Triplet> combine;
  double factorial = 1.0;
  for (std::size_t j = 1; j <= spec.K; ++j) {
    factorial *= static_cast<double>(j);
    powers.push_back(build_matrix_power_net(n, j, std::min(spec.delta, 0.5), spec.M, weight_budget).net);
    for (std::size_t e = 0; e < d; ++e) combine.push_back({e, (j - 1) * d + e, 1.0 / factorial});
  }
  std::vector<double> identity(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) identity[i * n + i] = 1.0;
  ReluNetwork net = serial(affine(spec.K * d, d, combine, std::move(identity)), parallel_padded(std::move(powers)));
  require(net.weight_count() <= weight_budget, ErrorKind::resource_exhausted,
          "build_exp_net: assembled network has " + std::to_string(net.weight_count()) + " weights");
  return net;
}

Matrix taylor_partial_sum(const Matrix& a, std::size_t K) {
  const std::size_t n = a.n();
  Matrix sum = Matrix::identity(n);
  Matrix term = Matrix::identity(n);
  for (std::size_t k = 1; k <= K; ++k) {
    term = mat_mul(term, a) * (1.0 / static_cast<double>(k));
    sum += term;
  }
  return sum;
}

double taylor_remainder_bound(std::size_t n, double M, std::size_t K) {
  return std::exp(static_cast<double>(n) * M) * std::ldexp(1.0, -static_cast<int>(K + 1)) /
         std::sqrt(2.0 * std::numbers::pi);
}

double width_bound_shape(std::size_t n, std::size_t K) {
  return static_cast<double>(K) * std::pow(static_cast<double>(n), static_cast<double>(K));
}

double depth_bound_shape(std::size_t n, double M, double epsilon, std::size_t K) {
  const double lnK = std::log(static_cast<double>(K));
  return 1.0 + lnK * (lnK + std::log(2.0 * std::numbers::e / epsilon) +
                      static_cast<double>(K) * (std::log(static_cast<double>(n)) + std::log(M)));
}

}  // namespace matfun::relu
