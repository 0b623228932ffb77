#include "matfun/codec.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>

#include "matfun/errors.hpp"

namespace matfun::codec {

namespace {

constexpr int kMantissaMin = 100;
constexpr int kMantissaMax = 999;
constexpr int kMantissaCount = kMantissaMax - kMantissaMin + 1;  // 900

// Exponent windows are chosen so that the core vocabularies come out at
// 2 + 10 + 198, 2 + 900 + 198 and 1800 + 200 tokens. FP15 uses the narrowest
// window that still holds both reference values (e = -2 and e = 21) plus
// headroom for small entries.
constexpr std::array<SchemeInfo, 4> kInfo{{
    {Scheme::P10, 5, -99, 98, 2 + 10 + 198},
    {Scheme::P1000, 3, -99, 98, 2 + kMantissaCount + 198},
    {Scheme::B1999, 2, -100, 99, 2 * kMantissaCount + 200},
    {Scheme::FP15, 1, -10, 21, 2 * kMantissaCount * 32},
}};

// Digits of |x| rounded to `precision + 1` significant digits (correctly
// rounded, ties to even) and the decimal exponent of the leading digit.
struct Digits {
  std::array<char, 800> buf{};
  std::size_t len = 0;
};

void sci(double ax, int precision, Digits& d) {
  const auto res = std::to_chars(d.buf.data(), d.buf.data() + d.buf.size(), ax, std::chars_format::scientific, precision);
  d.len = static_cast<std::size_t>(res.ptr - d.buf.data());
}

int sci_exponent(const Digits& d) {
  const char* e = static_cast<const char*>(std::memchr(d.buf.data(), 'e', d.len));
  int value = 0;
  const char* p = e + 1;
  if (*p == '+') ++p;
  std::from_chars(p, d.buf.data() + d.len, value);
  return value;
}

// Significant digits (without the decimal point) up to the 'e'.
std::string_view significand(const Digits& d) {
  const char* e = static_cast<const char*>(std::memchr(d.buf.data(), 'e', d.len));
  return {d.buf.data(), static_cast<std::size_t>(e - d.buf.data())};
}

// True when |x| is exactly d1 d2 d3 5 000... in decimal.
bool exact_tie(double ax) {
  Digits full;
  sci(ax, 780, full);  // every double has at most 767 significant digits
  const std::string_view s = significand(full);
  // s = "d.ddd5000..."
  if (s.size() < 6 || s[4] != '5') return false;
  for (std::size_t i = 5; i < s.size(); ++i)
    if (s[i] != '0') return false;
  return true;
}

int mantissa_of(std::string_view s) { return (s[0] - '0') * 100 + (s[2] - '0') * 10 + (s[3] - '0'); }

struct Layout {
  TokenId sign_base = -1;
  TokenId digit_base = -1;
  TokenId mantissa_base = -1;
  TokenId exponent_base = -1;
};

Layout layout(Scheme s) {
  switch (s) {
    case Scheme::P10:
      return {0, 2, -1, 12};
    case Scheme::P1000:
      return {0, -1, 2, 2 + kMantissaCount};
    case Scheme::B1999:
      return {-1, -1, 0, 2 * kMantissaCount};
    case Scheme::FP15:
      return {};
  }
  return {};
}

// B1999 / FP15 signed mantissa index: -999..-100 -> 0..899, 100..999 -> 900..1799.
int signed_mantissa_index(int sign, int m) { return sign < 0 ? kMantissaMax - m : kMantissaCount + (m - kMantissaMin); }

std::pair<int, int> signed_mantissa_from_index(int idx) {
  if (idx < kMantissaCount) return {-1, kMantissaMax - idx};
  return {1, kMantissaMin + idx - kMantissaCount};
}

[[noreturn]] void malformed(Scheme s, const std::string& what) {
  fail(ErrorKind::codec_error, std::string(to_string(s)) + ": " + what);
}

}  // namespace

std::string_view to_string(Scheme s) noexcept {
  switch (s) {
    case Scheme::P10:
      return "P10";
    case Scheme::P1000:
      return "P1000";
    case Scheme::B1999:
      return "B1999";
    case Scheme::FP15:
      return "FP15";
  }
  return "?";
}

Scheme parse_scheme(std::string_view name) {
  for (Scheme s : kAllSchemes)
    if (to_string(s) == name) return s;
  fail(ErrorKind::invalid_argument, "unknown encoding scheme '" + std::string(name) + "' (P10, P1000, B1999, FP15)");
}

SmeTriple to_sme(double x) {
  require(std::isfinite(x), ErrorKind::codec_error, "to_sme: non-finite value");
  if (x == 0.0) return {};
  const double ax = std::abs(x);
  Digits d3;
  sci(ax, 2, d3);
  int m = mantissa_of(significand(d3));
  int e10 = sci_exponent(d3);

  Digits d4;
  sci(ax, 3, d4);
  const std::string_view s4 = significand(d4);
  if (s4[4] == '5' && exact_tie(ax)) {
    // to_chars rounds exact ties to even; the codec rounds them away from zero.
    const int e4 = sci_exponent(d4);
    m = mantissa_of(s4) + 1;
    e10 = e4;
    if (m == 1000) {
      m = 100;
      ++e10;
    }
  }
  return {x < 0.0 ? -1 : 1, m, e10 - 2};
}

double from_sme(const SmeTriple& t) {
  if (t.is_zero()) return 0.0;
  require(t.mantissa >= kMantissaMin && t.mantissa <= kMantissaMax, ErrorKind::codec_error,
          "from_sme: mantissa out of range");
  const std::string text = std::to_string(t.mantissa) + "e" + std::to_string(t.exponent);
  double v = 0.0;
  std::from_chars(text.data(), text.data() + text.size(), v);
  return t.sign < 0 ? -v : v;
}

const SchemeInfo& info(Scheme s) { return kInfo[static_cast<std::size_t>(s)]; }

Vocabulary::Vocabulary(Scheme s) : scheme_(s), core_(info(s).core_vocab) {
  const SchemeInfo& si = info(s);
  auto exponent_tokens = [&] {
    for (int e = si.exponent_min; e <= si.exponent_max; ++e) tokens_.push_back("E" + std::to_string(e));
  };
  switch (s) {
    case Scheme::P10:
      tokens_ = {"+", "-"};
      for (int d = 0; d <= 9; ++d) tokens_.push_back(std::to_string(d));
      exponent_tokens();
      break;
    case Scheme::P1000:
      tokens_ = {"+", "-"};
      for (int m = kMantissaMin; m <= kMantissaMax; ++m) tokens_.push_back(std::to_string(m));
      exponent_tokens();
      break;
    case Scheme::B1999:
      for (int i = 0; i < 2 * kMantissaCount; ++i) {
        const auto [sg, m] = signed_mantissa_from_index(i);
        tokens_.push_back(std::to_string(sg * m));
      }
      exponent_tokens();
      break;
    case Scheme::FP15:
      for (int e = si.exponent_min; e <= si.exponent_max; ++e) {
        for (int i = 0; i < 2 * kMantissaCount; ++i) {
          const auto [sg, m] = signed_mantissa_from_index(i);
          tokens_.push_back("FP" + std::to_string(sg * m) + "/" + std::to_string(e));
        }
      }
      break;
  }
  require(tokens_.size() == core_, ErrorKind::codec_error, "vocabulary layout does not match its declared size");
  for (std::size_t n = 1; n <= kMaxDim; ++n) tokens_.push_back("<DIM_" + std::to_string(n) + ">");
  for (const char* sp : {"<EOS>", "<PAD>", "<ZERO>", "<BOS>"}) tokens_.emplace_back(sp);
  index_.reserve(tokens_.size());
  for (std::size_t i = 0; i < tokens_.size(); ++i) index_.emplace(tokens_[i], static_cast<TokenId>(i));
}

const std::string& Vocabulary::token(TokenId id) const {
  require(id >= 0 && static_cast<std::size_t>(id) < tokens_.size(), ErrorKind::codec_error,
          "token id " + std::to_string(id) + " outside the vocabulary");
  return tokens_[static_cast<std::size_t>(id)];
}

std::optional<TokenId> Vocabulary::find(std::string_view token) const {
  const auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

TokenId Vocabulary::id(std::string_view token) const {
  const auto found = find(token);
  if (!found) malformed(scheme_, "unknown token '" + std::string(token) + "'");
  return *found;
}

TokenId Vocabulary::dim(std::size_t n) const {
  require(n >= 1 && n <= kMaxDim, ErrorKind::codec_error, "matrix dimension " + std::to_string(n) + " has no DIM token");
  return static_cast<TokenId>(core_ + n - 1);
}

const Vocabulary& vocab(Scheme s) {
  static const std::array<Vocabulary, 4> all{Vocabulary(Scheme::P10), Vocabulary(Scheme::P1000),
                                             Vocabulary(Scheme::B1999), Vocabulary(Scheme::FP15)};
  return all[static_cast<std::size_t>(s)];
}

void encode_value_into(double x, Scheme s, std::vector<TokenId>& out) {
  const SchemeInfo& si = info(s);
  const Vocabulary& v = vocab(s);
  const SmeTriple t = to_sme(x);
  if (t.is_zero() || t.exponent < si.exponent_min) {
    out.push_back(v.zero());
    for (std::size_t i = 1; i < si.tokens_per_coeff; ++i) out.push_back(v.pad());
    return;
  }
  if (t.exponent > si.exponent_max) {
    char buf[32];
    const auto r = std::to_chars(buf, buf + sizeof buf, x);
    malformed(s, "value " + std::string(buf, r.ptr) + " needs exponent " + std::to_string(t.exponent) + " above " +
                     std::to_string(si.exponent_max));
  }
  const Layout l = layout(s);
  const TokenId e_id = l.exponent_base + (t.exponent - si.exponent_min);
  switch (s) {
    case Scheme::P10:
      out.push_back(l.sign_base + (t.sign < 0 ? 1 : 0));
      out.push_back(l.digit_base + t.mantissa / 100);
      out.push_back(l.digit_base + (t.mantissa / 10) % 10);
      out.push_back(l.digit_base + t.mantissa % 10);
      out.push_back(e_id);
      break;
    case Scheme::P1000:
      out.push_back(l.sign_base + (t.sign < 0 ? 1 : 0));
      out.push_back(l.mantissa_base + (t.mantissa - kMantissaMin));
      out.push_back(e_id);
      break;
    case Scheme::B1999:
      out.push_back(l.mantissa_base + signed_mantissa_index(t.sign, t.mantissa));
      out.push_back(e_id);
      break;
    case Scheme::FP15:
      out.push_back((t.exponent - si.exponent_min) * 2 * kMantissaCount + signed_mantissa_index(t.sign, t.mantissa));
      break;
  }
}

std::vector<TokenId> encode_value(double x, Scheme s) {
  std::vector<TokenId> out;
  out.reserve(info(s).tokens_per_coeff);
  encode_value_into(x, s, out);
  return out;
}

double decode_value(std::span<const TokenId> tk, Scheme s) {
  const SchemeInfo& si = info(s);
  const Vocabulary& v = vocab(s);
  if (tk.size() != si.tokens_per_coeff) {
    malformed(s, "expected " + std::to_string(si.tokens_per_coeff) + " tokens per value, got " + std::to_string(tk.size()));
  }
  if (tk[0] == v.zero()) {
    for (std::size_t i = 1; i < tk.size(); ++i)
      if (tk[i] != v.pad()) malformed(s, "<ZERO> must be followed by <PAD>");
    return 0.0;
  }
  const Layout l = layout(s);
  const auto exponents = static_cast<TokenId>(si.exponent_max - si.exponent_min + 1);
  auto in = [](TokenId id, TokenId base, TokenId count) { return base >= 0 && id >= base && id < base + count; };
  auto exponent_at = [&](TokenId id) {
    if (!in(id, l.exponent_base, exponents)) malformed(s, "expected an exponent token");
    return si.exponent_min + (id - l.exponent_base);
  };
  SmeTriple t;
  switch (s) {
    case Scheme::P10: {
      if (!in(tk[0], l.sign_base, 2)) malformed(s, "expected a sign token");
      t.sign = tk[0] == l.sign_base ? 1 : -1;
      int m = 0;
      for (std::size_t i = 1; i <= 3; ++i) {
        if (!in(tk[i], l.digit_base, 10)) malformed(s, "expected a digit token");
        m = m * 10 + (tk[i] - l.digit_base);
      }
      if (m < kMantissaMin) malformed(s, "leading mantissa digit is zero");
      t.mantissa = m;
      t.exponent = exponent_at(tk[4]);
      break;
    }
    case Scheme::P1000:
      if (!in(tk[0], l.sign_base, 2)) malformed(s, "expected a sign token");
      if (!in(tk[1], l.mantissa_base, kMantissaCount)) malformed(s, "expected a mantissa token");
      t.sign = tk[0] == l.sign_base ? 1 : -1;
      t.mantissa = kMantissaMin + (tk[1] - l.mantissa_base);
      t.exponent = exponent_at(tk[2]);
      break;
    case Scheme::B1999: {
      if (!in(tk[0], l.mantissa_base, 2 * kMantissaCount)) malformed(s, "expected a signed mantissa token");
      const auto [sg, m] = signed_mantissa_from_index(tk[0] - l.mantissa_base);
      t.sign = sg;
      t.mantissa = m;
      t.exponent = exponent_at(tk[1]);
      break;
    }
    case Scheme::FP15: {
      if (tk[0] < 0 || static_cast<std::size_t>(tk[0]) >= v.core_size()) malformed(s, "expected a value token");
      const auto [sg, m] = signed_mantissa_from_index(tk[0] % (2 * kMantissaCount));
      t.sign = sg;
      t.mantissa = m;
      t.exponent = si.exponent_min + tk[0] / (2 * kMantissaCount);
      break;
    }
  }
  return from_sme(t);
}

std::vector<std::string> to_strings(std::span<const TokenId> tokens, Scheme s) {
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (TokenId id : tokens) out.push_back(vocab(s).token(id));
  return out;
}

std::vector<TokenId> from_strings(std::span<const std::string> tokens, Scheme s) {
  std::vector<TokenId> out;
  out.reserve(tokens.size());
  for (const std::string& t : tokens) out.push_back(vocab(s).id(t));
  return out;
}

std::size_t sequence_length(std::size_t n, Scheme s) { return 2 + n * n * info(s).tokens_per_coeff; }

std::vector<TokenId> encode_matrix(const Matrix& a, Scheme s) {
  const Vocabulary& v = vocab(s);
  std::vector<TokenId> out;
  out.reserve(sequence_length(a.n(), s));
  out.push_back(v.dim(a.n()));
  for (double x : a.values()) encode_value_into(x, s, out);
  out.push_back(v.eos());
  return out;
}

Matrix decode_matrix(std::span<const TokenId> tokens, Scheme s, std::optional<std::size_t> n) {
  const Vocabulary& v = vocab(s);
  if (tokens.empty()) malformed(s, "empty sequence");
  const TokenId first = tokens[0];
  if (first < v.dim(1) || first > v.dim(kMaxDim)) malformed(s, "sequence must start with a <DIM_n> token");
  const auto dim = static_cast<std::size_t>(first - v.dim(1)) + 1;
  if (n && *n != dim) malformed(s, "sequence declares n = " + std::to_string(dim) + ", expected " + std::to_string(*n));
  const std::size_t want = sequence_length(dim, s);
  if (tokens.size() != want) {
    malformed(s, "sequence length " + std::to_string(tokens.size()) + " != " + std::to_string(want) + " for n = " +
                     std::to_string(dim));
  }
  if (tokens.back() != v.eos()) malformed(s, "sequence must end with <EOS>");
  const std::size_t tpc = info(s).tokens_per_coeff;
  Matrix a(dim);
  for (std::size_t k = 0; k < dim * dim; ++k) a.data()[k] = decode_value(tokens.subspan(1 + k * tpc, tpc), s);
  return a;
}

void write_vocab_file(const std::filesystem::path& path, Scheme s) {
  const SchemeInfo& si = info(s);
  const Vocabulary& v = vocab(s);
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorKind::io_error, "cannot write " + path.string());
  out << "# scheme " << to_string(s) << "\n";
  out << "# tokens_per_coeff " << si.tokens_per_coeff << "\n";
  out << "# exponent_range " << si.exponent_min << " " << si.exponent_max << "\n";
  out << "# core_vocab " << si.core_vocab << "\n";
  switch (s) {
    case Scheme::P10:
      out << "# layout: 2 signs + 10 digits + " << si.core_vocab - 12 << " exponents = " << si.core_vocab << "\n";
      break;
    case Scheme::P1000:
      out << "# layout: 2 signs + 900 mantissas (100..999) + " << si.core_vocab - 902 << " exponents = " << si.core_vocab
          << "\n";
      break;
    case Scheme::B1999:
      out << "# layout: 1800 signed mantissas (-999..-100, 100..999) + " << si.core_vocab - 1800
          << " exponents = " << si.core_vocab << "\n";
      break;
    case Scheme::FP15:
      out << "# layout: for each exponent, 1800 signed mantissas; id = (e - " << si.exponent_min
          << ") * 1800 + mantissa index = " << si.core_vocab << "\n";
      break;
  }
  out << "# specials after the core tokens: <DIM_1>..<DIM_10>, <EOS>, <PAD>, <ZERO>, <BOS>\n";
  out << "# zero (and magnitudes below the exponent range) encode as <ZERO> followed by <PAD> up to tokens_per_coeff\n";
  out << "# id = index among non-comment lines; total " << v.size() << "\n";
  for (const std::string& t : v.tokens()) out << t << "\n";
  require(static_cast<bool>(out), ErrorKind::io_error, "write failed for " + path.string());
}

std::vector<std::string> read_vocab_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::io_error, "cannot open " + path.string());
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line[0] == '#') continue;
    tokens.push_back(line);
  }
  return tokens;
}

}  // namespace matfun::codec
