#pragma once

#include <complex>
#include <vector>

#include "matfun/matrix.hpp"

namespace matfun {

// Eigenvalues plus the two spectral distances that gate the log and sign
// domains.
struct SpectrumInfo {
  std::vector<std::complex<double>> eigenvalues;
  double min_real_abs = 0.0;      // distance of the spectrum from the imaginary axis
  double min_negreal_dist = 0.0;  // distance of the spectrum from (-inf, 0]
};

inline constexpr std::size_t kMaxEigenDimension = 16;

// Balancing, Householder reduction to upper Hessenberg form, then Francis
// double-shift QR. Throws non_convergence when an eigenvalue needs more than
// the per-eigenvalue iteration cap; invalid_argument for n > 16.
SpectrumInfo eigenvalues(const Matrix& a);

// Upper Hessenberg matrix orthogonally similar to `a`.
Matrix hessenberg(const Matrix& a);

double distance_to_negative_real_axis(std::complex<double> z) noexcept;

}  // namespace matfun
