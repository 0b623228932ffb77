#include <benchmark/benchmark.h>

#include "matfun/datagen.hpp"
#include "matfun/functions.hpp"

using namespace matfun;

namespace {

Matrix input(std::size_t n, MatrixFunction f) { return data::make_sample(n, f, 1, 0).input; }

template <MatrixFunction F>
void BM_Oracle(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Matrix a = input(n, F);
  for (auto _ : state) benchmark::DoNotOptimize(apply(F, a));
}

void BM_MakeSample(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::uint64_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(data::make_sample(n, MatrixFunction::sign, 7, i++));
}

}  // namespace

BENCHMARK(BM_Oracle<MatrixFunction::exp>)->Arg(1)->Arg(3)->Arg(5)->Arg(8);
BENCHMARK(BM_Oracle<MatrixFunction::log>)->Arg(1)->Arg(3)->Arg(5)->Arg(8);
BENCHMARK(BM_Oracle<MatrixFunction::sign>)->Arg(1)->Arg(3)->Arg(5)->Arg(8);
BENCHMARK(BM_Oracle<MatrixFunction::sin>)->Arg(1)->Arg(3)->Arg(5)->Arg(8);
BENCHMARK(BM_MakeSample)->Arg(3)->Arg(5);
