#include "matfun/functions.hpp"

#include <cmath>
#include <string>

#include "matfun/errors.hpp"

namespace matfun {

namespace {

constexpr double kScaleTarget = 0.5;
constexpr int kMaxTaylorTerms = 60;
constexpr double kSeriesTolerance = 0x1p-60;

constexpr double kSqrtTolerance = 1e-13;
constexpr int kSqrtMaxIterations = 60;

constexpr double kSignTolerance = 1e-12;
constexpr int kSignMaxIterations = 100;

constexpr int kLogMaxSquareRoots = 64;
constexpr int kLogMaxSeriesTerms = 400;

void require_valid_input(const Matrix& a, const char* op) {
  require(a.n() >= 1, ErrorKind::invalid_argument, std::string(op) + ": empty matrix");
  require(a.all_finite(), ErrorKind::invalid_argument, std::string(op) + ": non-finite entry");
}

void require_finite_result(const Matrix& m, const char* op) {
  if (!m.all_finite()) fail(ErrorKind::overflow, std::string(op) + ": result exceeds the double range");
}

int scaling_exponent(const Matrix& a) {
  const double norm = frobenius_norm(a);
  int s = 0;
  while (std::ldexp(norm, -s) > kScaleTarget) ++s;
  return s;
}

// The tail of a quadratically convergent iteration stops shrinking once it
// reaches the rounding floor; treat that as convergence.
bool stagnated(double change, double previous_change, double norm) {
  return previous_change >= 0.0 && change <= 1e-6 * norm && change > 0.5 * previous_change;
}

}  // namespace

std::string_view to_string(MatrixFunction f) noexcept {
  switch (f) {
    case MatrixFunction::exp: return "exp";
    case MatrixFunction::log: return "log";
    case MatrixFunction::sign: return "sign";
    case MatrixFunction::sin: return "sin";
    case MatrixFunction::cos: return "cos";
  }
  return "unknown";
}

std::optional<MatrixFunction> parse_function(std::string_view name) noexcept {
  for (MatrixFunction f : kAllFunctions)
    if (to_string(f) == name) return f;
  return std::nullopt;
}

bool in_domain(MatrixFunction f, const SpectrumInfo& spectrum, double margin) noexcept {
  switch (f) {
    case MatrixFunction::log: return spectrum.min_negreal_dist > margin;
    case MatrixFunction::sign: return spectrum.min_real_abs > margin;
    default: return true;
  }
}

Matrix mat_exp(const Matrix& a) {
  require_valid_input(a, "mat_exp");
  const std::size_t n = a.n();
  const int s = scaling_exponent(a);
  const Matrix x = std::ldexp(1.0, -s) * a;

  Matrix sum = Matrix::identity(n);
  Matrix term = Matrix::identity(n);
  for (int k = 1; k <= kMaxTaylorTerms; ++k) {
    term = mat_mul(term, x) * (1.0 / k);
    sum += term;
    if (frobenius_norm(term) <= kSeriesTolerance * frobenius_norm(sum)) break;
  }
  for (int i = 0; i < s; ++i) {
    sum = mat_mul(sum, sum);
    require_finite_result(sum, "mat_exp");
  }
  return sum;
}

SinCos mat_sincos(const Matrix& a) {
  require_valid_input(a, "mat_sincos");
  const std::size_t n = a.n();
  const int s = scaling_exponent(a);
  const Matrix x = std::ldexp(1.0, -s) * a;
  const Matrix x2 = mat_mul(x, x);

  // sin X = sum (-1)^k X^(2k+1) / (2k+1)!,  cos X = sum (-1)^k X^(2k) / (2k)!
  Matrix sin_sum = x;
  Matrix cos_sum = Matrix::identity(n);
  Matrix sin_term = x;
  Matrix cos_term = Matrix::identity(n);
  for (int k = 1; k <= kMaxTaylorTerms; ++k) {
    const double c_div = static_cast<double>((2 * k - 1) * (2 * k));
    const double s_div = static_cast<double>((2 * k) * (2 * k + 1));
    cos_term = mat_mul(cos_term, x2) * (-1.0 / c_div);
    sin_term = mat_mul(sin_term, x2) * (-1.0 / s_div);
    cos_sum += cos_term;
    sin_sum += sin_term;
    const double tail = frobenius_norm(cos_term) + frobenius_norm(sin_term);
    if (tail <= kSeriesTolerance * (frobenius_norm(cos_sum) + frobenius_norm(sin_sum))) break;
  }

  const Matrix identity = Matrix::identity(n);
  for (int i = 0; i < s; ++i) {
    Matrix next_sin = 2.0 * mat_mul(sin_sum, cos_sum);
    Matrix next_cos = 2.0 * mat_mul(cos_sum, cos_sum) - identity;
    sin_sum = std::move(next_sin);
    cos_sum = std::move(next_cos);
    require_finite_result(sin_sum, "mat_sincos");
    require_finite_result(cos_sum, "mat_sincos");
  }
  return {std::move(sin_sum), std::move(cos_sum)};
}

Matrix mat_sin(const Matrix& a) { return mat_sincos(a).sin; }
Matrix mat_cos(const Matrix& a) { return mat_sincos(a).cos; }

Matrix mat_sqrt(const Matrix& a) {
  require_valid_input(a, "mat_sqrt");
  const std::size_t n = a.n();
  const double inv_2n = -1.0 / (2.0 * static_cast<double>(n));
  Matrix y = a;
  Matrix z = Matrix::identity(n);
  double previous_change = -1.0;
  bool scaling = true;
  for (int it = 0; it < kSqrtMaxIterations; ++it) {
    double mu = 1.0;
    if (scaling) {
      const double d = std::abs(determinant(y) * determinant(z));
      if (d > 0.0 && std::isfinite(d)) mu = std::pow(d, inv_2n);
    }
    const Matrix y_scaled = mu * y;
    const Matrix z_scaled = mu * z;
    Matrix y_next = 0.5 * (y_scaled + mat_inverse(z_scaled));
    Matrix z_next = 0.5 * (z_scaled + mat_inverse(y_scaled));
    require_finite_result(y_next, "mat_sqrt");
    const double change = frobenius_norm(y_next - y);
    const double norm = frobenius_norm(y_next);
    y = std::move(y_next);
    z = std::move(z_next);
    if (change <= kSqrtTolerance * norm || stagnated(change, previous_change, norm)) return y;
    // Determinant scaling only pays off far from the fixed point.
    if (change <= 1e-2 * norm) scaling = false;
    previous_change = change;
  }
  fail(ErrorKind::non_convergence, "mat_sqrt: Denman-Beavers iteration did not converge");
}

Matrix mat_log(const Matrix& a) {
  require_valid_input(a, "mat_log");
  const std::size_t n = a.n();
  const SpectrumInfo spectrum = eigenvalues(a);
  if (!in_domain(MatrixFunction::log, spectrum)) {
    fail(ErrorKind::domain_error, "mat_log: spectrum within " + std::to_string(kSpectralMargin) +
                                      " of the closed negative real axis");
  }

  Matrix x = a;
  int roots = 0;
  while (distance_to_identity(x) >= kScaleTarget) {
    if (roots == kLogMaxSquareRoots) fail(ErrorKind::non_convergence, "mat_log: too many square roots");
    x = mat_sqrt(x);
    ++roots;
  }

  // log(I + E) = sum_{k>=1} (-1)^(k+1) E^k / k
  Matrix e = x;
  for (std::size_t i = 0; i < n; ++i) e(i, i) -= 1.0;
  Matrix power = e;
  Matrix sum = e;
  for (int k = 2; k <= kLogMaxSeriesTerms; ++k) {
    power = mat_mul(power, e);
    const double coeff = (k % 2 == 0 ? -1.0 : 1.0) / k;
    Matrix term = coeff * power;
    sum += term;
    const double tn = frobenius_norm(term);
    if (tn == 0.0 || tn <= kSeriesTolerance * frobenius_norm(sum)) break;
  }
  return std::ldexp(1.0, roots) * sum;
}

Matrix mat_sign(const Matrix& a) {
  require_valid_input(a, "mat_sign");
  const std::size_t n = a.n();
  const SpectrumInfo spectrum = eigenvalues(a);
  if (!in_domain(MatrixFunction::sign, spectrum)) {
    fail(ErrorKind::domain_error,
         "mat_sign: spectrum within " + std::to_string(kSpectralMargin) + " of the imaginary axis");
  }

  const double inv_n = -1.0 / static_cast<double>(n);
  Matrix x = a;
  double previous_change = -1.0;
  for (int it = 0; it < kSignMaxIterations; ++it) {
    double mu = 1.0;
    const double d = std::abs(determinant(x));
    if (d > 0.0 && std::isfinite(d)) mu = std::pow(d, inv_n);
    const Matrix scaled = mu * x;
    Matrix next = 0.5 * (scaled + mat_inverse(scaled));
    require_finite_result(next, "mat_sign");
    const double change = frobenius_norm(next - x);
    const double norm = frobenius_norm(x);
    x = std::move(next);
    if (change <= kSignTolerance * norm || stagnated(change, previous_change, norm)) return x;
    previous_change = change;
  }
  fail(ErrorKind::non_convergence, "mat_sign: Newton iteration did not converge in 100 steps");
}

Matrix apply(MatrixFunction f, const Matrix& a) {
  switch (f) {
    case MatrixFunction::exp: return mat_exp(a);
    case MatrixFunction::log: return mat_log(a);
    case MatrixFunction::sign: return mat_sign(a);
    case MatrixFunction::sin: return mat_sin(a);
    case MatrixFunction::cos: return mat_cos(a);
  }
  fail(ErrorKind::invalid_argument, "apply: unknown function");
}

}  // namespace matfun
