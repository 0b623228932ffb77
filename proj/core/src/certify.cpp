#include "matfun/certify.hpp"

#include <algorithm>
#include <cmath>

#include "matfun/errors.hpp"
#include "matfun/functions.hpp"
#include "matfun/matrix.hpp"
#include "matfun/parallel.hpp"

namespace matfun::relu {

namespace {

constexpr std::size_t kMaxCornerDim = 16;

const std::vector<std::size_t>& primes() {
  static const std::vector<std::size_t> table = [] {
    std::vector<std::size_t> p;
    for (std::size_t c = 2; p.size() < 256; ++c) {
      bool prime = true;
      for (std::size_t q : p) {
        if (q * q > c) break;
        if (c % q == 0) {
          prime = false;
          break;
        }
      }
      if (prime) p.push_back(c);
    }
    return p;
  }();
  return table;
}

double radical_inverse(std::size_t index, std::size_t base) {
  double result = 0.0;
  double f = 1.0 / static_cast<double>(base);
  while (index > 0) {
    result += f * static_cast<double>(index % base);
    index /= base;
    f /= static_cast<double>(base);
  }
  return result;
}

struct PointPlan {
  std::size_t dim;
  double M;
  bool grid;
  std::size_t corners;
  std::size_t total;

  PointPlan(std::size_t input_dim, const CertDomain& domain) : dim(input_dim), M(domain.M) {
    require(domain.M > 0.0, ErrorKind::invalid_argument, "certify: M must be positive");
    grid = input_dim == 1;
    corners = !grid && input_dim <= kMaxCornerDim ? std::size_t{1} << input_dim : 0;
    total = grid ? std::max<std::size_t>(domain.samples, 2) : corners + domain.samples;
  }

  void fill(std::size_t i, std::vector<double>& x) const {
    x.resize(dim);
    if (grid) {
      x[0] = -M + 2.0 * M * static_cast<double>(i) / static_cast<double>(total - 1);
      if (i + 1 == total) x[0] = M;
      return;
    }
    if (i < corners) {
      for (std::size_t d = 0; d < dim; ++d) x[d] = (i >> d) & 1U ? M : -M;
      return;
    }
    x = halton_point(i - corners + 1, dim, M);
  }
};

}  // namespace

std::string to_string(CertOracle oracle) { return oracle == CertOracle::identity ? "identity" : "exp"; }

CertOracle parse_cert_oracle(const std::string& name) {
  if (name == "identity") return CertOracle::identity;
  if (name == "exp") return CertOracle::exp;
  fail(ErrorKind::invalid_argument, "unknown certification oracle '" + name + "'");
}

OracleFn make_oracle(CertOracle oracle, std::size_t input_dim) {
  if (oracle == CertOracle::identity) {
    return [](std::span<const double> x) { return std::vector<double>(x.begin(), x.end()); };
  }
  const auto n = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(input_dim))));
  require(n * n == input_dim, ErrorKind::dimension_mismatch,
          "exp oracle: input dimension " + std::to_string(input_dim) + " is not a square");
  return [n](std::span<const double> x) {
    return mat_exp(Matrix(n, std::vector<double>(x.begin(), x.end()))).values();
  };
}

std::vector<double> halton_point(std::size_t index, std::size_t dim, double M) {
  require(dim <= primes().size(), ErrorKind::invalid_argument, "halton_point: dimension too large");
  std::vector<double> x(dim);
  for (std::size_t d = 0; d < dim; ++d) x[d] = -M + 2.0 * M * radical_inverse(index, primes()[d]);
  return x;
}

std::vector<std::vector<double>> certification_points(std::size_t input_dim, const CertDomain& domain) {
  const PointPlan plan(input_dim, domain);
  std::vector<std::vector<double>> pts(plan.total);
  for (std::size_t i = 0; i < plan.total; ++i) plan.fill(i, pts[i]);
  return pts;
}

CertReport certify(const ReluNetwork& net, const OracleFn& oracle, const std::string& oracle_name,
                   const CertDomain& domain) {
  const PointPlan plan(net.input_dim(), domain);

  struct Partial {
    double max_error = -1.0;
    double sum = 0.0;
    std::vector<double> worst;
  };
  const std::size_t chunks = std::min<std::size_t>(plan.total, 64);
  std::vector<Partial> partial(chunks);
  parallel_chunks(plan.total, chunks, [&](std::size_t begin, std::size_t end, std::size_t chunk) {
    Evaluator eval(net);
    std::vector<double> x;
    Partial& p = partial[chunk];
    for (std::size_t i = begin; i < end; ++i) {
      plan.fill(i, x);
      const auto y = eval(x);
      const std::vector<double> ref = oracle(x);
      require(ref.size() == y.size(), ErrorKind::dimension_mismatch, "certify: oracle output size differs from network");
      double sq = 0.0;
      for (std::size_t k = 0; k < y.size(); ++k) sq += (y[k] - ref[k]) * (y[k] - ref[k]);
      const double err = std::sqrt(sq);
      p.sum += err;
      if (err > p.max_error || std::isnan(err)) {
        p.max_error = std::isnan(err) ? INFINITY : err;
        p.worst = x;
      }
    }
  });

  CertReport r;
  r.oracle = oracle_name;
  r.input_dim = net.input_dim();
  r.M = domain.M;
  r.points = plan.total;
  r.corners = plan.corners;
  double sum = 0.0;
  r.max_error = 0.0;
  for (const Partial& p : partial) {
    sum += p.sum;
    if (p.max_error > r.max_error || r.worst_input.empty()) {
      r.max_error = std::max(p.max_error, 0.0);
      r.worst_input = p.worst;
    }
  }
  r.mean_error = sum / static_cast<double>(plan.total);
  r.width = net.width();
  r.depth = net.depth();
  r.weight_count = net.weight_count();
  return r;
}

CertReport certify(const ReluNetwork& net, CertOracle oracle, const CertDomain& domain) {
  return certify(net, make_oracle(oracle, net.input_dim()), to_string(oracle), domain);
}

void attach_spec(CertReport& report, const ExpNetSpec& spec) {
  report.spec = spec;
  report.width_shape = width_bound_shape(spec.n, spec.K);
  report.depth_shape = depth_bound_shape(spec.n, spec.M, spec.epsilon, spec.K);
  report.c1 = static_cast<double>(report.width) / report.width_shape;
  report.c2 = static_cast<double>(report.depth) / report.depth_shape;
}

nlohmann::json CertReport::to_json() const {
  nlohmann::json j{{"oracle", oracle},         {"input_dim", input_dim},   {"M", M},
                   {"points", points},         {"corners", corners},       {"max_error", max_error},
                   {"mean_error", mean_error}, {"worst_input", worst_input}, {"width", width},
                   {"depth", depth},           {"weight_count", weight_count}};
  if (spec) {
    j["spec"] = spec_to_json(*spec);
    j["width_shape"] = width_shape;
    j["depth_shape"] = depth_shape;
    j["c1"] = c1;
    j["c2"] = c2;
    j["passed"] = max_error <= spec->epsilon;
  }
  return j;
}

CertifiedExpNet build_certified_exp_net(const ExpNetSpec& spec, std::size_t samples, std::size_t weight_budget) {
  CertifiedExpNet out{build_exp_net(spec, weight_budget), spec, {}};
  out.report = certify(out.net, CertOracle::exp, CertDomain{spec.M, samples});
  attach_spec(out.report, spec);
  require(out.report.within(spec.epsilon), ErrorKind::certification_failed,
          "sampled error " + std::to_string(out.report.max_error) + " exceeds epsilon " + std::to_string(spec.epsilon));
  return out;
}

nlohmann::json spec_to_json(const ExpNetSpec& spec) {
  return {{"n", spec.n}, {"M", spec.M}, {"epsilon", spec.epsilon}, {"K", spec.K}, {"delta", spec.delta}};
}

ExpNetSpec spec_from_json(const nlohmann::json& j) {
  ExpNetSpec s;
  s.n = j.at("n").get<std::size_t>();
  s.M = j.at("M").get<double>();
  s.epsilon = j.at("epsilon").get<double>();
  s.K = j.at("K").get<std::size_t>();
  s.delta = j.at("delta").get<double>();
  return s;
}

}  // namespace matfun::relu
