#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace matfun::cli {

// Everything a subcommand was asked to do. Two runs with equal RunConfigs
// write identical files.
struct RunConfig {
  std::string subcommand;
  std::optional<std::string> function;
  std::optional<std::size_t> n;
  std::optional<std::string> scheme;
  std::optional<std::string> arch;
  std::optional<std::string> preset;
  std::uint64_t seed = 0;
  std::map<std::string, std::string> paths;
  std::vector<double> taus;
  nlohmann::json options = nlohmann::json::object();  // subcommand-specific values

  [[nodiscard]] nlohmann::json to_json() const;
  void validate() const;
};

std::string sha256_file(const std::filesystem::path& path);

// Writes <dir>/manifest.json with the config and a hash of every listed file
// (paths relative to dir). No clocks, hostnames or absolute paths go in.
void write_manifest(const std::filesystem::path& dir, const RunConfig& cfg, const std::vector<std::string>& files,
                    const nlohmann::json& extra = nlohmann::json::object());

void write_text(const std::filesystem::path& path, const std::string& text);
void write_json(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json read_json(const std::filesystem::path& path);

}  // namespace matfun::cli
