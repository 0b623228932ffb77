#include "run_record.hpp"

#include <array>
#include <fstream>

#include <openssl/evp.h>

#include "matfun/codec.hpp"
#include "matfun/errors.hpp"
#include "matfun/functions.hpp"

namespace matfun::cli {

nlohmann::json RunConfig::to_json() const {
  nlohmann::json j{{"subcommand", subcommand}, {"seed", seed}, {"paths", paths}, {"options", options}};
  if (function) j["function"] = *function;
  if (n) j["n"] = *n;
  if (scheme) j["scheme"] = *scheme;
  if (arch) j["arch"] = *arch;
  if (preset) j["preset"] = *preset;
  if (!taus.empty()) j["taus"] = taus;
  return j;
}

void RunConfig::validate() const {
  if (function) require(parse_function(*function).has_value(), ErrorKind::invalid_argument, "unknown function '" + *function + "'");
  if (n) require(*n >= 1 && *n <= codec::kMaxDim, ErrorKind::invalid_argument, "n must be in [1, 10]");
  if (scheme) codec::parse_scheme(*scheme);
  for (double tau : taus) require(tau > 0.0 && tau < 1.0, ErrorKind::invalid_argument, "tolerances must lie in (0, 1)");
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::io_error, "cannot read " + path.string());
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  std::array<char, 1 << 16> buf{};
  while (in) {
    in.read(buf.data(), buf.size());
    if (in.gcount() > 0) EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md.data(), &len);
  EVP_MD_CTX_free(ctx);
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

void write_manifest(const std::filesystem::path& dir, const RunConfig& cfg, const std::vector<std::string>& files,
                    const nlohmann::json& extra) {
  nlohmann::json hashes = nlohmann::json::object();
  for (const std::string& f : files) hashes[f] = sha256_file(dir / f);
  nlohmann::json m{{"tool", "matfun"}, {"version", MATFUN_VERSION}, {"run", cfg.to_json()}, {"files", hashes}};
  if (!extra.empty()) m["extra"] = extra;
  write_json(dir / "manifest.json", m);
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorKind::io_error, "cannot write " + path.string());
  out << text;
  require(static_cast<bool>(out), ErrorKind::io_error, "write failed for " + path.string());
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) { write_text(path, j.dump(2) + "\n"); }

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::io_error, "cannot read " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::io_error, path.string() + ": " + e.what());
  }
}

}  // namespace matfun::cli
