#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "matfun/functions.hpp"
#include "matfun/matrix.hpp"
#include "matfun/random.hpp"

namespace matfun::data {

enum class InputLaw { gaussian, uniform };

std::string to_string(InputLaw law);
InputLaw parse_law(const std::string& name);

struct SamplerConfig {
  InputLaw law = InputLaw::gaussian;
  double sigma = 1.0;  // gaussian scale
  double clip = 5.0;   // entries end up in [-clip, clip]; uniform draws on that box
};

inline constexpr std::size_t kRejectionCap = 1000;

// Gaussian: sigma * N(0, 1) clipped entrywise to [-clip, clip].
// Uniform: U(-clip, clip).
Matrix sample_matrix(std::size_t n, CounterRng& rng, const SamplerConfig& cfg = {});

struct Sample {
  Matrix input;
  Matrix target;
  MatrixFunction function = MatrixFunction::exp;
  std::uint64_t index = 0;
};

// Reasons a draw was thrown away before a sample was accepted.
struct RejectionCounts {
  std::uint64_t draws = 0;
  std::map<std::string, std::uint64_t> by_reason;

  [[nodiscard]] std::uint64_t total() const;
  void merge(const RejectionCounts& other);
};

// Draws from the (seed, "sample", index) stream until the input satisfies the
// function's domain condition with the spectral margin and the oracle
// succeeds; sign targets must also satisfy ||S^2 - I||_F <= 1e-6. Clipping
// happens before the domain check. Throws non_convergence after kRejectionCap
// draws.
Sample make_sample(std::size_t n, MatrixFunction f, std::uint64_t seed, std::uint64_t index,
                   const SamplerConfig& cfg = {}, RejectionCounts* counts = nullptr);

// Target for a given input, or the reason it must be rejected.
struct Labelled {
  std::optional<Matrix> target;
  std::string rejection;
};
Labelled label(const Matrix& input, MatrixFunction f);

struct DatasetManifest {
  MatrixFunction function = MatrixFunction::exp;
  std::size_t n = 1;
  std::size_t count = 0;
  std::uint64_t seed = 0;
  std::uint64_t first_index = 0;
  SamplerConfig sampler;
  RejectionCounts rejections;

  [[nodiscard]] nlohmann::json to_json() const;
  static DatasetManifest from_json(const nlohmann::json& j);
};

struct Dataset {
  DatasetManifest manifest;
  std::vector<Sample> samples;
};

struct DatasetRequest {
  MatrixFunction function = MatrixFunction::exp;
  std::size_t n = 1;
  std::size_t count = 0;
  std::uint64_t seed = 0;
  std::uint64_t first_index = 0;
  SamplerConfig sampler;
};

// Samples first_index .. first_index + count - 1, generated in parallel and
// assembled in index order; the result depends only on the request.
Dataset generate_dataset(const DatasetRequest& req);

// JSON lines: a {"manifest": ...} header, then one
// {"index", "input", "target"} record per sample (row-major, shortest
// round-trip doubles).
void write_dataset(const std::filesystem::path& path, const Dataset& ds);
// Throws manifest_mismatch when the record count disagrees with the header or
// with `expected` (function, n, count, seed) when given; io_error on corrupt
// records.
Dataset read_dataset(const std::filesystem::path& path, const std::optional<DatasetManifest>& expected = std::nullopt);

}  // namespace matfun::data
