#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace matfun {

// Every failure raised by the library carries a stable machine-readable kind
// so the CLI can report it on a single parseable line.
enum class ErrorKind {
  invalid_argument,
  dimension_mismatch,
  singular_matrix,
  non_convergence,
  domain_error,
  overflow,
  resource_exhausted,
  certification_failed,
  codec_error,
  io_error,
  manifest_mismatch,
  divergence,
};

std::string_view to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool condition, ErrorKind kind, const std::string& what) {
  if (!condition) fail(kind, what);
}

}  // namespace matfun
