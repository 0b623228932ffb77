#include "matfun/datagen.hpp"

#include <algorithm>
#include <fstream>

#include "matfun/errors.hpp"
#include "matfun/parallel.hpp"
#include "matfun/spectrum.hpp"

namespace matfun::data {

namespace {

constexpr const char* kFormat = "matfun-dataset";
constexpr int kVersion = 1;

nlohmann::json matrix_json(const Matrix& a) { return a.values(); }

Matrix matrix_from_json(const nlohmann::json& j, std::size_t n, const std::string& where) {
  auto v = j.get<std::vector<double>>();
  require(v.size() == n * n, ErrorKind::io_error, where + ": expected " + std::to_string(n * n) + " entries");
  return Matrix(n, std::move(v));
}

}  // namespace

std::string to_string(InputLaw law) { return law == InputLaw::gaussian ? "gaussian" : "uniform"; }

InputLaw parse_law(const std::string& name) {
  if (name == "gaussian") return InputLaw::gaussian;
  if (name == "uniform") return InputLaw::uniform;
  fail(ErrorKind::invalid_argument, "unknown input law '" + name + "' (gaussian, uniform)");
}

Matrix sample_matrix(std::size_t n, CounterRng& rng, const SamplerConfig& cfg) {
  require(n >= 1, ErrorKind::invalid_argument, "sample_matrix: n must be >= 1");
  Matrix a(n);
  for (double& v : a.data()) {
    if (cfg.law == InputLaw::gaussian)
      v = std::clamp(cfg.sigma * rng.normal(), -cfg.clip, cfg.clip);
    else
      v = cfg.clip * (2.0 * rng.uniform() - 1.0);
  }
  return a;
}

std::uint64_t RejectionCounts::total() const {
  std::uint64_t t = 0;
  for (const auto& [_, c] : by_reason) t += c;
  return t;
}

void RejectionCounts::merge(const RejectionCounts& other) {
  draws += other.draws;
  for (const auto& [k, c] : other.by_reason) by_reason[k] += c;
}

Labelled label(const Matrix& input, MatrixFunction f) {
  if (f == MatrixFunction::log || f == MatrixFunction::sign) {
    SpectrumInfo spec;
    try {
      spec = eigenvalues(input);
    } catch (const Error&) {
      return {std::nullopt, "eigenvalue_failure"};
    }
    if (!in_domain(f, spec)) {
      return {std::nullopt, f == MatrixFunction::log ? "eigenvalue_near_negative_real_axis" : "eigenvalue_near_imaginary_axis"};
    }
  }
  Matrix target;
  try {
    target = apply(f, input);
  } catch (const Error& e) {
    return {std::nullopt, "oracle_" + std::string(matfun::to_string(e.kind()))};
  }
  if (!target.all_finite()) return {std::nullopt, "non_finite_target"};
  if (f == MatrixFunction::sign) {
    const Matrix sq = target * target;
    if (distance_to_identity(sq) > 1e-6) return {std::nullopt, "sign_not_involutory"};
  }
  return {std::move(target), {}};
}

Sample make_sample(std::size_t n, MatrixFunction f, std::uint64_t seed, std::uint64_t index, const SamplerConfig& cfg,
                   RejectionCounts* counts) {
  CounterRng rng(seed, "sample", index);
  for (std::size_t attempt = 0; attempt < kRejectionCap; ++attempt) {
    Matrix input = sample_matrix(n, rng, cfg);
    if (counts) ++counts->draws;
    Labelled l = label(input, f);
    if (l.target) return {std::move(input), std::move(*l.target), f, index};
    if (counts) ++counts->by_reason[l.rejection];
  }
  fail(ErrorKind::non_convergence, "make_sample: " + std::to_string(kRejectionCap) + " consecutive draws rejected for " +
                                       std::string(matfun::to_string(f)) + " at n = " + std::to_string(n));
}

nlohmann::json DatasetManifest::to_json() const {
  nlohmann::json rej = nlohmann::json::object();
  for (const auto& [k, c] : rejections.by_reason) rej[k] = c;
  return {{"format", kFormat},
          {"version", kVersion},
          {"function", matfun::to_string(function)},
          {"n", n},
          {"count", count},
          {"seed", seed},
          {"first_index", first_index},
          {"prng", "philox4x32-10"},
          {"law", to_string(sampler.law)},
          {"sigma", sampler.sigma},
          {"clip", sampler.clip},
          {"draws", rejections.draws},
          {"rejections", rej}};
}

DatasetManifest DatasetManifest::from_json(const nlohmann::json& j) {
  require(j.value("format", "") == kFormat, ErrorKind::io_error, "dataset manifest: unknown format");
  DatasetManifest m;
  const auto fn = parse_function(j.at("function").get<std::string>());
  require(fn.has_value(), ErrorKind::io_error, "dataset manifest: unknown function");
  m.function = *fn;
  m.n = j.at("n").get<std::size_t>();
  m.count = j.at("count").get<std::size_t>();
  m.seed = j.at("seed").get<std::uint64_t>();
  m.first_index = j.value("first_index", std::uint64_t{0});
  m.sampler.law = parse_law(j.value("law", "gaussian"));
  m.sampler.sigma = j.at("sigma").get<double>();
  m.sampler.clip = j.at("clip").get<double>();
  m.rejections.draws = j.value("draws", std::uint64_t{0});
  for (const auto& [k, v] : j.value("rejections", nlohmann::json::object()).items())
    m.rejections.by_reason[k] = v.get<std::uint64_t>();
  return m;
}

Dataset generate_dataset(const DatasetRequest& req) {
  require(req.count > 0, ErrorKind::invalid_argument, "generate_dataset: count must be positive");
  Dataset ds;
  ds.manifest.function = req.function;
  ds.manifest.n = req.n;
  ds.manifest.count = req.count;
  ds.manifest.seed = req.seed;
  ds.manifest.first_index = req.first_index;
  ds.manifest.sampler = req.sampler;
  ds.samples.resize(req.count);

  const std::size_t chunks = std::min<std::size_t>(req.count, 256);
  std::vector<RejectionCounts> partial(chunks);
  parallel_chunks(req.count, chunks, [&](std::size_t begin, std::size_t end, std::size_t chunk) {
    for (std::size_t i = begin; i < end; ++i) {
      ds.samples[i] = make_sample(req.n, req.function, req.seed, req.first_index + i, req.sampler, &partial[chunk]);
    }
  });
  for (const RejectionCounts& p : partial) ds.manifest.rejections.merge(p);
  return ds;
}

void write_dataset(const std::filesystem::path& path, const Dataset& ds) {
  require(ds.samples.size() == ds.manifest.count, ErrorKind::manifest_mismatch,
          "write_dataset: manifest count " + std::to_string(ds.manifest.count) + " but " +
              std::to_string(ds.samples.size()) + " samples");
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorKind::io_error, "cannot write " + path.string());
  out << nlohmann::json{{"manifest", ds.manifest.to_json()}}.dump() << '\n';
  for (const Sample& s : ds.samples) {
    out << nlohmann::json{{"index", s.index}, {"input", matrix_json(s.input)}, {"target", matrix_json(s.target)}}.dump()
        << '\n';
  }
  require(static_cast<bool>(out), ErrorKind::io_error, "write failed for " + path.string());
}

Dataset read_dataset(const std::filesystem::path& path, const std::optional<DatasetManifest>& expected) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::io_error, "cannot open " + path.string());
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorKind::io_error, path.string() + ": empty dataset file");
  Dataset ds;
  try {
    ds.manifest = DatasetManifest::from_json(nlohmann::json::parse(line).at("manifest"));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::io_error, path.string() + ": corrupt manifest: " + e.what());
  }
  if (expected) {
    const DatasetManifest& e = *expected;
    require(e.function == ds.manifest.function && e.n == ds.manifest.n && e.count == ds.manifest.count &&
                e.seed == ds.manifest.seed,
            ErrorKind::manifest_mismatch, path.string() + ": manifest does not match the requested dataset");
  }
  const std::size_t n = ds.manifest.n;
  ds.samples.reserve(ds.manifest.count);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(lineno);
    try {
      const auto j = nlohmann::json::parse(line);
      Sample s;
      s.function = ds.manifest.function;
      s.index = j.at("index").get<std::uint64_t>();
      s.input = matrix_from_json(j.at("input"), n, where);
      s.target = matrix_from_json(j.at("target"), n, where);
      ds.samples.push_back(std::move(s));
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::io_error, where + ": corrupt record: " + e.what());
    }
  }
  require(ds.samples.size() == ds.manifest.count, ErrorKind::manifest_mismatch,
          path.string() + ": manifest declares " + std::to_string(ds.manifest.count) + " samples, file holds " +
              std::to_string(ds.samples.size()));
  return ds;
}

}  // namespace matfun::data
