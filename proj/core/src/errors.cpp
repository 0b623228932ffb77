#include "matfun/errors.hpp"

namespace matfun {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::invalid_argument: return "invalid_argument";
    case ErrorKind::dimension_mismatch: return "dimension_mismatch";
    case ErrorKind::singular_matrix: return "singular_matrix";
    case ErrorKind::non_convergence: return "non_convergence";
    case ErrorKind::domain_error: return "domain_error";
    case ErrorKind::overflow: return "overflow";
    case ErrorKind::resource_exhausted: return "resource_exhausted";
    case ErrorKind::certification_failed: return "certification_failed";
    case ErrorKind::codec_error: return "codec_error";
    case ErrorKind::io_error: return "io_error";
    case ErrorKind::manifest_mismatch: return "manifest_mismatch";
    case ErrorKind::divergence: return "divergence";
  }
  return "unknown";
}

}  // namespace matfun
