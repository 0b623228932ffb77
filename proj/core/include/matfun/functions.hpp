#pragma once

#include <array>
#include <optional>
#include <string_view>

#include "matfun/matrix.hpp"
#include "matfun/spectrum.hpp"

namespace matfun {

enum class MatrixFunction { exp, log, sign, sin, cos };

inline constexpr std::array<MatrixFunction, 5> kAllFunctions = {
    MatrixFunction::exp, MatrixFunction::log, MatrixFunction::sign, MatrixFunction::sin, MatrixFunction::cos};

std::string_view to_string(MatrixFunction f) noexcept;
std::optional<MatrixFunction> parse_function(std::string_view name) noexcept;

// Spectral margin used for domain rejection of log and sign inputs.
inline constexpr double kSpectralMargin = 1e-6;

// True when `spectrum` satisfies the domain condition of `f` with the given
// margin: no eigenvalue within `margin` of (-inf, 0] for log, none within
// `margin` of the imaginary axis for sign. Always true for exp, sin and cos.
bool in_domain(MatrixFunction f, const SpectrumInfo& spectrum, double margin = kSpectralMargin) noexcept;

/// Scaling and squaring with a Taylor core: scale by 2^-s until
/// ||A||_F / 2^s <= 1/2, sum the series to machine precision, square s times.
/// Throws overflow when the result leaves the double range.
Matrix mat_exp(const Matrix& a);

/// Principal logarithm by inverse scaling and squaring: Denman-Beavers square
/// roots until ||X - I||_F < 1/2, the alternating log(I + E) series, then a
/// 2^s rescale. Throws domain_error when the spectrum touches (-inf, 0].
Matrix mat_log(const Matrix& a);

/// Principal square root by the determinant-scaled Denman-Beavers coupled
/// iteration (relative stopping tolerance 1e-13, at most 60 iterations).
Matrix mat_sqrt(const Matrix& a);

/// Matrix sign by scaled Newton iteration X <- (mu X + (mu X)^-1) / 2 with
/// mu = |det X|^(-1/n). Throws domain_error for spectra within the margin of
/// the imaginary axis.
Matrix mat_sign(const Matrix& a);

struct SinCos {
  Matrix sin;
  Matrix cos;
};

/// sin and cos together: scale to ||A||_F <= 1/2, Taylor, then the
/// double-angle recurrences cos 2X = 2 cos^2 X - I and sin 2X = 2 sin X cos X.
SinCos mat_sincos(const Matrix& a);
Matrix mat_sin(const Matrix& a);
Matrix mat_cos(const Matrix& a);

Matrix apply(MatrixFunction f, const Matrix& a);

}  // namespace matfun
