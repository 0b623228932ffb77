#include <benchmark/benchmark.h>

#include <vector>

#include "matfun/relu_construct.hpp"
#include "matfun/relu_network.hpp"

using namespace matfun;

namespace {

void BM_BuildExpNet(benchmark::State& state) {
  const double eps = state.range(0) == 0 ? 0.1 : 0.01;
  const relu::ExpNetSpec spec = relu::ExpNetSpec::make(1, 1.0, eps);
  for (auto _ : state) benchmark::DoNotOptimize(relu::build_exp_net(spec));
}

void BM_EvaluateExpNet(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const relu::ReluNetwork net = relu::build_exp_net(relu::ExpNetSpec::make(n, 1.0, n == 1 ? 0.01 : 0.5));
  relu::Evaluator eval(net);
  std::vector<double> x(n * n, 0.3);
  for (auto _ : state) benchmark::DoNotOptimize(eval(x));
  state.counters["weights"] = static_cast<double>(net.weight_count());
}

}  // namespace

BENCHMARK(BM_BuildExpNet)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_EvaluateExpNet)->Arg(1)->Arg(2)->Unit(benchmark::kMicrosecond);
