#include <benchmark/benchmark.h>

#include "matfun/codec.hpp"
#include "matfun/datagen.hpp"

using namespace matfun;

namespace {

void BM_EncodeMatrix(benchmark::State& state) {
  const auto s = static_cast<codec::Scheme>(state.range(0));
  const Matrix a = data::make_sample(5, MatrixFunction::exp, 3, 0).target;
  for (auto _ : state) benchmark::DoNotOptimize(codec::encode_matrix(a, s));
  state.SetLabel(std::string(codec::to_string(s)));
}

void BM_DecodeMatrix(benchmark::State& state) {
  const auto s = static_cast<codec::Scheme>(state.range(0));
  const auto tokens = codec::encode_matrix(data::make_sample(5, MatrixFunction::exp, 3, 0).target, s);
  for (auto _ : state) benchmark::DoNotOptimize(codec::decode_matrix(tokens, s));
  state.SetLabel(std::string(codec::to_string(s)));
}

}  // namespace

BENCHMARK(BM_EncodeMatrix)->DenseRange(0, 3);
BENCHMARK(BM_DecodeMatrix)->DenseRange(0, 3);
