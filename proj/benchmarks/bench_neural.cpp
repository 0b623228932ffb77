#include <benchmark/benchmark.h>

#include <random>

#include "matfun/train.hpp"

using namespace matfun;
using namespace matfun::nn;

namespace {

Tensor random_tensor(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c) {
  std::normal_distribution<double> g(0.0, 1.0);
  Tensor t(r, c);
  for (Eigen::Index k = 0; k < t.size(); ++k) t.data()[k] = g(rng);
  return t;
}

// Forward plus backward of the fused attention op; batch 64, 4 heads of 16.
void BM_Attention(benchmark::State& state) {
  const auto len = state.range(0);
  std::mt19937_64 rng(1);
  Parameter q, k, v;
  for (Parameter* p : {&q, &k, &v}) {
    p->value = random_tensor(rng, 64 * len, 64);
    p->zero_grad();
  }
  for (auto _ : state) {
    Tape t;
    t.backward(sum(attention(t.param(q), t.param(k), t.param(v), {64, 4, true})));
  }
}

void BM_MlpStep(benchmark::State& state) {
  const bool deep = state.range(0) == 1;
  Mlp m(deep ? MlpConfig::deep(3) : MlpConfig::shallow(3), deep ? "mlp7" : "mlp3");
  std::mt19937_64 rng(2);
  const Tensor x = random_tensor(rng, 128, 9), y = random_tensor(rng, 128, 9);
  Adam opt(m.params().trainable(), {}, {});
  for (auto _ : state) {
    m.params().zero_grad();
    Tape t;
    t.backward(frobenius_loss(m.forward(t, x, {}), y));
    opt.step();
  }
}

// One optimizer step of the desk encoder-decoder on a batch of 64 samples.
void BM_EncDecStep(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  const auto ds = data::generate_dataset({MatrixFunction::sign, n, 64, 3, 0, {}});
  EncoderDecoder m(TransformerConfig::desk(codec::Scheme::P1000));
  std::vector<TokenSeq> src, tgt_in;
  std::vector<int> labels;
  for (const auto& s : ds.samples) {
    const SeqPair p = tokenize(s, codec::Scheme::P1000);
    src.push_back(p.src);
    tgt_in.push_back(shift_right(p.tgt, codec::Scheme::P1000));
    labels.insert(labels.end(), p.tgt.begin(), p.tgt.end());
  }
  Adam opt(m.params().trainable(), {}, {});
  for (auto _ : state) {
    m.params().zero_grad();
    Tape t;
    t.backward(cross_entropy(m.forward(t, src, tgt_in, {}), labels));
    opt.step();
  }
}

void BM_GreedyDecode(benchmark::State& state) {
  const auto ds = data::generate_dataset({MatrixFunction::exp, 1, 64, 4, 0, {}});
  EncoderDecoder m(TransformerConfig::desk(codec::Scheme::P1000));
  std::vector<TokenSeq> src;
  for (const auto& s : ds.samples) src.push_back(tokenize(s, codec::Scheme::P1000).src);
  const std::size_t cap = codec::sequence_length(1, codec::Scheme::P1000) + 2;
  for (auto _ : state) benchmark::DoNotOptimize(greedy_decode(m, src, cap, 1));
}

}  // namespace

BENCHMARK(BM_Attention)->Arg(8)->Arg(32)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MlpStep)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_EncDecStep)->Arg(1)->Arg(2)->Arg(3)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_GreedyDecode)->Unit(benchmark::kMillisecond);
