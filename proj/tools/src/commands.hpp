#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace matfun::cli {

struct GenOptions {
  std::string function;
  std::size_t n = 1;
  std::size_t count = 0;
  std::uint64_t seed = 0;
  std::string law = "gaussian";
  double sigma = 1.0;
  double clip = 5.0;
  std::uint64_t first_index = 0;
  std::filesystem::path out;
};

struct TrainOptions {
  std::string arch;
  std::optional<std::string> function;
  std::optional<std::size_t> n;
  std::string scheme = "P1000";
  std::string preset = "desk";
  std::uint64_t seed = 0;
  std::optional<std::filesystem::path> data;
  std::optional<std::size_t> count;
  std::optional<std::size_t> epochs;
  std::optional<std::size_t> batch;
  std::optional<double> lr;
  std::optional<std::size_t> warmup;
  std::optional<std::size_t> max_steps;
  std::optional<std::string> loss;
  std::filesystem::path out;
};

struct EvalOptions {
  std::filesystem::path model;
  std::filesystem::path data;
  std::vector<double> taus{0.05, 0.02, 0.01, 0.005};
  std::filesystem::path out;
};

struct BuildReluOptions {
  std::size_t n = 1;
  double M = 1.0;
  double eps = 0.1;
  std::size_t samples = 100000;
  std::size_t budget = 0;  // 0 keeps the library default
  std::filesystem::path out;
};

struct CertifyOptions {
  std::filesystem::path net;
  std::string oracle = "exp";
  std::optional<double> M;
  std::size_t points = 100000;
  std::filesystem::path out;
};

struct CodecOptions {
  std::string action;  // roundtrip, encode, decode, vocab
  std::string scheme;
  std::optional<double> value;
  std::vector<std::string> tokens;
  std::optional<std::filesystem::path> out;
};

struct ReproOptions {
  std::string experiment;
  std::uint64_t seed = 0;
  std::optional<std::size_t> n;
  std::optional<std::size_t> count;
  std::optional<std::size_t> epochs;
  std::filesystem::path out;
};

void run_gen(const GenOptions& o, std::ostream& out);
void run_train(const TrainOptions& o, std::ostream& out);
void run_eval(const EvalOptions& o, std::ostream& out);
void run_build_relu(const BuildReluOptions& o, std::ostream& out);
void run_certify(const CertifyOptions& o, std::ostream& out);
void run_codec(const CodecOptions& o, std::ostream& out);
void run_repro(const ReproOptions& o, std::ostream& out);

}  // namespace matfun::cli
