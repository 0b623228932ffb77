#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "matfun/matrix.hpp"

namespace matfun::codec {

enum class Scheme { P10, P1000, B1999, FP15 };

inline constexpr Scheme kAllSchemes[] = {Scheme::P10, Scheme::P1000, Scheme::B1999, Scheme::FP15};

std::string_view to_string(Scheme s) noexcept;
Scheme parse_scheme(std::string_view name);

using TokenId = std::int32_t;

// x ~= sign * mantissa * 10^exponent with mantissa in [100, 999]. Zero is the
// triple with sign 0.
struct SmeTriple {
  int sign = 0;
  int mantissa = 0;
  int exponent = 0;

  [[nodiscard]] bool is_zero() const noexcept { return sign == 0; }
  friend bool operator==(const SmeTriple&, const SmeTriple&) = default;
};

// Three significant digits, half away from zero; a 1000 after rounding
// carries into mantissa 100 and exponent + 1. Throws codec_error on NaN/inf.
SmeTriple to_sme(double x);

// Correctly rounded double nearest to sign * mantissa * 10^exponent.
double from_sme(const SmeTriple& t);

struct SchemeInfo {
  Scheme scheme;
  std::size_t tokens_per_coeff;
  int exponent_min;
  int exponent_max;
  std::size_t core_vocab;  // tokens excluding the specials
};

const SchemeInfo& info(Scheme s);

inline constexpr std::size_t kMaxDim = 10;
inline constexpr std::size_t kSpecialCount = kMaxDim + 4;

// Core tokens first (ids 0 .. core_vocab-1), then <DIM_1>..<DIM_10>, <EOS>,
// <PAD>, <ZERO>, <BOS>.
class Vocabulary {
 public:
  explicit Vocabulary(Scheme s);

  [[nodiscard]] Scheme scheme() const noexcept { return scheme_; }
  [[nodiscard]] std::size_t size() const noexcept { return tokens_.size(); }
  [[nodiscard]] std::size_t core_size() const noexcept { return core_; }
  [[nodiscard]] const std::string& token(TokenId id) const;
  [[nodiscard]] std::optional<TokenId> find(std::string_view token) const;
  [[nodiscard]] TokenId id(std::string_view token) const;  // throws codec_error

  [[nodiscard]] TokenId dim(std::size_t n) const;
  [[nodiscard]] TokenId eos() const noexcept { return static_cast<TokenId>(core_ + kMaxDim); }
  [[nodiscard]] TokenId pad() const noexcept { return eos() + 1; }
  [[nodiscard]] TokenId zero() const noexcept { return eos() + 2; }
  [[nodiscard]] TokenId bos() const noexcept { return eos() + 3; }

  [[nodiscard]] const std::vector<std::string>& tokens() const noexcept { return tokens_; }

 private:
  Scheme scheme_;
  std::size_t core_;
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

const Vocabulary& vocab(Scheme s);

// Exactly info(s).tokens_per_coeff ids. Values below the smallest
// representable magnitude become <ZERO> followed by <PAD>s; values above the
// largest raise codec_error.
std::vector<TokenId> encode_value(double x, Scheme s);
void encode_value_into(double x, Scheme s, std::vector<TokenId>& out);
double decode_value(std::span<const TokenId> tokens, Scheme s);

std::vector<std::string> to_strings(std::span<const TokenId> tokens, Scheme s);
std::vector<TokenId> from_strings(std::span<const std::string> tokens, Scheme s);

// [<DIM_n>] + row-major entries + [<EOS>]; length 2 + n^2 * tokens_per_coeff.
std::vector<TokenId> encode_matrix(const Matrix& a, Scheme s);
// When `n` is given the <DIM_n> token must agree with it.
Matrix decode_matrix(std::span<const TokenId> tokens, Scheme s, std::optional<std::size_t> n = std::nullopt);

std::size_t sequence_length(std::size_t n, Scheme s);

// Text file: '#' header lines describing the layout, then one token per line;
// the id of a token is its index among the non-comment lines.
void write_vocab_file(const std::filesystem::path& path, Scheme s);
std::vector<std::string> read_vocab_file(const std::filesystem::path& path);

}  // namespace matfun::codec
