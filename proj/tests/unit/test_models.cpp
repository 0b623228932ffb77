#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include <unistd.h>

#include "matfun/errors.hpp"
#include "matfun/models.hpp"

using namespace matfun;
using namespace matfun::nn;

namespace {

Tensor random_tensor(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c) {
  std::normal_distribution<double> g;
  Tensor t(r, c);
  for (Eigen::Index k = 0; k < t.size(); ++k) t.data()[k] = g(rng);
  return t;
}

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("matfun_models_" + std::to_string(::getpid()) + "_" + name);
}

std::vector<TokenSeq> random_tokens(std::mt19937_64& rng, std::size_t batch, std::size_t len, int vocab) {
  std::uniform_int_distribution<int> tok(0, vocab - 1);
  std::vector<TokenSeq> out(batch);
  for (auto& s : out)
    for (std::size_t i = 0; i < len; ++i) s.push_back(tok(rng));
  return out;
}

TransformerConfig tiny(codec::Scheme s, std::uint64_t seed) {
  TransformerConfig c = TransformerConfig::desk(s);
  c.dim = 8;
  c.heads = 2;
  c.max_len = 16;
  c.seed = seed;
  return c;
}

}  // namespace

TEST(Mlp, ShapesAndPresets) {
  EXPECT_EQ(MlpConfig::shallow(2).widths, (std::vector<std::size_t>{128, 256, 128}));
  const MlpConfig deep = MlpConfig::deep(3);
  EXPECT_EQ(deep.widths, (std::vector<std::size_t>{128, 256, 512, 1024, 512, 256, 128}));
  EXPECT_EQ(deep.dropout, 0.2);
  Mlp m(MlpConfig::shallow(3), "mlp3");
  std::mt19937_64 rng(1);
  EXPECT_EQ(m.predict(random_tensor(rng, 7, 9)).rows(), 7);
  EXPECT_EQ(m.predict(random_tensor(rng, 7, 9)).cols(), 9);
  EXPECT_THROW(m.predict(random_tensor(rng, 7, 4)), Error);
  EXPECT_THROW(Mlp(MlpConfig{2, {4}, 1.0, 0}), Error);
}

TEST(Mlp, GradientCheckShallowAndDeep) {
  std::mt19937_64 rng(2);
  for (int cfg = 0; cfg < 4; ++cfg) {
    const std::size_t n = 1 + static_cast<std::size_t>(cfg % 3);
    for (bool deep : {false, true}) {
      MlpConfig c = deep ? MlpConfig::deep(n) : MlpConfig::shallow(n);
      c.seed = static_cast<std::uint64_t>(cfg);
      Mlp m(c);
      const Tensor x = random_tensor(rng, 3, static_cast<Eigen::Index>(n * n));
      const Tensor y = random_tensor(rng, 3, static_cast<Eigen::Index>(n * n));
      const auto params = m.params().trainable();
      const auto res = gradient_check(
          [&](Tape& t) { return frobenius_loss(m.forward(t, x, {}), y); }, params, 1e-6, 12);
      EXPECT_LT(res.max_rel_error, 1e-4) << res.worst << " deep=" << deep << " n=" << n;
    }
  }
}

TEST(Mlp, DropoutOnlyInTrainMode) {
  Mlp m(MlpConfig::deep(2));
  std::mt19937_64 rng(3);
  const Tensor x = random_tensor(rng, 5, 4);
  EXPECT_EQ(m.predict(x), m.predict(x));
  CounterRng r(0, "dropout", 0);
  Tape t;
  EXPECT_NE(m.forward(t, x, {true, &r}).value(), m.predict(x));
}

TEST(Fourier, ZeroFrequenciesAndPythagoras) {
  std::mt19937_64 rng(4);
  const Tensor x = random_tensor(rng, 6, 1);
  Tape t;
  const Tensor zero = fourier_features(t, t.constant(x), Tensor::Zero(5, 1)).value();
  for (Eigen::Index i = 0; i < 6; ++i) {
    EXPECT_EQ(zero.row(i).head(5), Tensor::Ones(1, 5));
    EXPECT_EQ(zero.row(i).tail(5), Tensor::Zero(1, 5));
  }
  const Tensor g = fourier_features(t, t.constant(x), random_tensor(rng, 7, 1)).value();
  EXPECT_EQ(g.cols(), 14);
  for (Eigen::Index i = 0; i < 6; ++i) EXPECT_NEAR(g.row(i).squaredNorm(), 7.0, 1e-12);
}

TEST(Fourier, HeadRoundingAndGradients) {
  EXPECT_EQ(nearest_divisor(64, 9), 8u);
  EXPECT_EQ(nearest_divisor(64, 4), 4u);
  EXPECT_EQ(nearest_divisor(48, 9), 8u);
  EXPECT_EQ(nearest_divisor(60, 25), 20u);
  std::mt19937_64 rng(5);
  for (std::size_t n : {1u, 2u, 3u}) {
    FourierConfig c;
    c.n = n;
    c.features = 4;
    c.dim = 12;
    c.seed = n;
    FourierEncoder m(c);
    EXPECT_FALSE(m.frequencies().trainable);
    const Tensor x = random_tensor(rng, 2, static_cast<Eigen::Index>(n * n));
    const Tensor y = random_tensor(rng, 2, static_cast<Eigen::Index>(n * n));
    const auto params = m.params().trainable();
    const auto res =
        gradient_check([&](Tape& t) { return frobenius_loss(m.forward(t, x, {}), y); }, params, 1e-6, 10);
    EXPECT_LT(res.max_rel_error, 1e-4) << res.worst << " n=" << n;
  }
}

TEST(MultiHead, SingleHeadIsAttentionThenOutputProjection) {
  ParameterSet ps;
  ps.set_seed(6);
  const MhaParams p = make_mha(ps, "mha", 6, 1);
  std::mt19937_64 rng(6);
  const Tensor x = random_tensor(rng, 5, 6);
  Tape t;
  const Var xv = t.constant(x);
  const Tensor got = multi_head(t, xv, xv, p, 1, false).value();
  const Tensor q = (x * p.q.weight->value).rowwise() + p.q.bias->value.row(0);
  const Tensor k = (x * p.k.weight->value).rowwise() + p.k.bias->value.row(0);
  const Tensor v = (x * p.v.weight->value).rowwise() + p.v.bias->value.row(0);
  const Tensor a = attention(t.constant(q), t.constant(k), t.constant(v), {}).value();
  const Tensor expect = (a * p.o.weight->value).rowwise() + p.o.bias->value.row(0);
  EXPECT_LT((got - expect).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_EQ(got.rows(), x.rows());
  EXPECT_EQ(got.cols(), x.cols());
  EXPECT_THROW(make_mha(ps, "bad", 6, 4), Error);
}

TEST(MultiHead, GradientWithRespectToProjections) {
  std::mt19937_64 rng(7);
  for (int cfg = 0; cfg < 5; ++cfg) {
    ParameterSet ps;
    ps.set_seed(static_cast<std::uint64_t>(cfg));
    const MhaParams p = make_mha(ps, "mha", 8, cfg % 2 == 0 ? 2 : 4);
    const Tensor x = random_tensor(rng, 6, 8);
    const Tensor r = random_tensor(rng, 6, 8);
    const auto params = ps.all();
    const auto res = gradient_check(
        [&](Tape& t) {
          const Var xv = t.constant(x);
          return sum(mul(multi_head(t, xv, xv, p, 2, cfg % 3 == 0), t.constant(r)));
        },
        params);
    EXPECT_LT(res.max_rel_error, 1e-4) << res.worst;
  }
}

TEST(EncoderDecoder, PresetsEncodeTheRequestedArchitecture) {
  const auto paper = TransformerConfig::paper(codec::Scheme::FP15);
  EXPECT_EQ(paper.enc_layers, 8u);
  EXPECT_EQ(paper.dec_layers, 1u);
  EXPECT_EQ(paper.heads, 8u);
  EXPECT_EQ(paper.dim, 512u);
  const auto desk = TransformerConfig::desk(codec::Scheme::P1000);
  EXPECT_EQ(desk.dim, 64u);
  EXPECT_EQ(desk.enc_layers, 2u);
  EXPECT_EQ(desk.heads, 4u);
  TransformerConfig bad = desk;
  bad.heads = 5;
  EXPECT_THROW(EncoderDecoder{bad}, Error);
}

TEST(EncoderDecoder, DecoderIsCausal) {
  EncoderDecoder m(tiny(codec::Scheme::P10, 8));
  std::mt19937_64 rng(8);
  const int vocab = static_cast<int>(m.cfg().vocab_size());
  const auto src = random_tokens(rng, 2, 7, vocab);
  auto tgt = random_tokens(rng, 2, 6, vocab);
  Tape t;
  const Tensor base = m.forward(t, src, tgt, {}).value();
  for (std::size_t pos = 0; pos < 6; ++pos) {
    auto changed = tgt;
    changed[0][pos] = (changed[0][pos] + 1) % vocab;
    const Tensor out = m.forward(t, src, changed, {}).value();
    for (Eigen::Index r = 0; r < 6; ++r) {
      const bool same = out.row(r) == base.row(r);
      if (r < static_cast<Eigen::Index>(pos))
        EXPECT_TRUE(same) << "position " << r << " saw future token " << pos;
      else
        EXPECT_FALSE(same) << "position " << r << " ignored token " << pos;
    }
    // the second sequence in the batch is untouched
    EXPECT_EQ(out.bottomRows(6), base.bottomRows(6));
  }
}

TEST(EncoderDecoder, SourceReachesEveryTargetPosition) {
  EncoderDecoder m(tiny(codec::Scheme::P1000, 9));
  std::mt19937_64 rng(9);
  const int vocab = static_cast<int>(m.cfg().vocab_size());
  const auto src = random_tokens(rng, 1, 5, vocab);
  const auto tgt = random_tokens(rng, 1, 4, vocab);
  Tape t;
  const Tensor base = m.forward(t, src, tgt, {}).value();
  auto changed = src;
  changed[0][4] = (changed[0][4] + 7) % vocab;
  const Tensor out = m.forward(t, changed, tgt, {}).value();
  for (Eigen::Index r = 0; r < 4; ++r) EXPECT_NE(out.row(r), base.row(r));
}

TEST(EncoderDecoder, InputValidation) {
  EncoderDecoder m(tiny(codec::Scheme::P10, 10));
  Tape t;
  const TokenSeq ok{1, 2, 3};
  EXPECT_THROW(m.forward(t, {ok}, {TokenSeq{1, 999}}, {}), Error);
  EXPECT_THROW(m.forward(t, {ok, TokenSeq{1, 2}}, {ok, ok}, {}), Error);
  EXPECT_THROW(m.forward(t, {TokenSeq(17, 1)}, {ok}, {}), Error);
}

TEST(EncoderDecoder, GradientCheck) {
  std::mt19937_64 rng(11);
  for (int cfg = 0; cfg < 3; ++cfg) {
    EncoderDecoder m(tiny(codec::Scheme::P10, static_cast<std::uint64_t>(cfg)));
    const int vocab = static_cast<int>(m.cfg().vocab_size());
    const auto src = random_tokens(rng, 2, 5, vocab);
    const auto tgt = random_tokens(rng, 2, 4, vocab);
    std::vector<int> labels;
    for (const auto& s : random_tokens(rng, 2, 4, vocab)) labels.insert(labels.end(), s.begin(), s.end());
    const auto params = m.params().trainable();
    const auto res = gradient_check(
        [&](Tape& t) { return cross_entropy(m.forward(t, src, tgt, {}), labels); }, params, 1e-6, 8);
    EXPECT_LT(res.max_rel_error, 1e-4) << res.worst;
  }
}

TEST(Checkpoint, RoundTripIsBitExact) {
  std::mt19937_64 rng(12);
  const Tensor x = random_tensor(rng, 4, 4);
  {
    FourierConfig fc;
    fc.n = 2;
    fc.dim = 8;
    fc.seed = 3;
    FourierEncoder m(fc);
    const auto path = temp_path("fourier.ckpt");
    save_checkpoint(path, m, {{"note", "x"}});
    const Checkpoint ck = load_checkpoint(path);
    EXPECT_EQ(ck.extra.at("note"), "x");
    auto& loaded = dynamic_cast<RegressionModel&>(*ck.model);
    EXPECT_EQ(loaded.predict(x), m.predict(x));
    EXPECT_EQ(loaded.config(), m.config());
    std::filesystem::remove(path);
  }
  {
    Mlp m(MlpConfig{2, {5, 6}, 0.0, 4}, "mlp3");
    m.params().all()[0]->value(0, 0) = 0.125;
    const auto path = temp_path("mlp.ckpt");
    save_checkpoint(path, m);
    const Checkpoint ck = load_checkpoint(path);
    EXPECT_EQ(dynamic_cast<RegressionModel&>(*ck.model).predict(x), m.predict(x));
    std::filesystem::remove(path);
  }
  {
    EncoderDecoder m(tiny(codec::Scheme::B1999, 5));
    const auto path = temp_path("encdec.ckpt");
    save_checkpoint(path, m);
    const Checkpoint ck = load_checkpoint(path);
    auto& loaded = dynamic_cast<EncoderDecoder&>(*ck.model);
    const std::vector<TokenSeq> src{{1, 2, 3}}, tgt{{4, 5}};
    Tape t;
    EXPECT_EQ(loaded.forward(t, src, tgt, {}).value(), m.forward(t, src, tgt, {}).value());
    std::filesystem::remove(path);
  }
  EXPECT_THROW(load_checkpoint(temp_path("missing.ckpt")), Error);
  EXPECT_THROW(make_model({{"arch", "resnet"}}), Error);
}

TEST(Init, SeedDeterminesWeights) {
  Mlp a(MlpConfig{1, {8}, 0.0, 1}), b(MlpConfig{1, {8}, 0.0, 1}), c(MlpConfig{1, {8}, 0.0, 2});
  EXPECT_EQ(a.params().all()[0]->value, b.params().all()[0]->value);
  EXPECT_NE(a.params().all()[0]->value, c.params().all()[0]->value);
  for (Parameter* p : a.params().all()) EXPECT_LE(p->value.cwiseAbs().maxCoeff(), 1.0);
}
