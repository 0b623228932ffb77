#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include "matfun/datagen.hpp"
#include "matfun/errors.hpp"
#include "matfun/random.hpp"

using namespace matfun;
using namespace matfun::data;

namespace {

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("matfun_data_" + std::to_string(::getpid()) + "_" + name);
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

// Known-answer vectors published with the Random123 distribution (kat_vectors).
TEST(Philox, KnownAnswers) {
  EXPECT_EQ(philox4x32_10({0, 0, 0, 0}, {0, 0}), (PhiloxCounter{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8}));
  EXPECT_EQ(philox4x32_10({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}),
            (PhiloxCounter{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd}));
  EXPECT_EQ(philox4x32_10({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}),
            (PhiloxCounter{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1}));
}

TEST(CounterRng, StreamsAreReproducibleAndDistinct) {
  CounterRng a(42, "sample", 7), b(42, "sample", 7), c(42, "sample", 8), d(42, "init", 7), e(43, "sample", 7);
  for (int i = 0; i < 100; ++i) {
    const auto va = a.next_u64();
    EXPECT_EQ(va, b.next_u64());
    EXPECT_NE(va, c.next_u64());
    EXPECT_NE(va, d.next_u64());
    EXPECT_NE(va, e.next_u64());
  }
}

TEST(CounterRng, UniformAndNormalMoments) {
  CounterRng rng(1, "moments", 0);
  const int N = 200000;
  double su = 0.0, sn = 0.0, sn2 = 0.0;
  for (int i = 0; i < N; ++i) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    su += u;
    const double z = rng.normal();
    sn += z;
    sn2 += z * z;
  }
  EXPECT_NEAR(su / N, 0.5, 4.0 * std::sqrt(1.0 / 12.0 / N));
  EXPECT_NEAR(sn / N, 0.0, 4.0 / std::sqrt(N));
  EXPECT_NEAR(sn2 / N, 1.0, 4.0 * std::sqrt(2.0 / N));
}

TEST(SampleMatrix, EntriesAreClipped) {
  CounterRng rng(5, "sample", 0);
  SamplerConfig wide{InputLaw::gaussian, 4.0, 5.0};
  bool hit_clip = false;
  for (int t = 0; t < 2000; ++t) {
    const Matrix a = sample_matrix(3, rng, wide);
    for (double v : a.values()) {
      ASSERT_LE(std::abs(v), 5.0);
      hit_clip = hit_clip || std::abs(v) == 5.0;
    }
  }
  EXPECT_TRUE(hit_clip);
  SamplerConfig uni{InputLaw::uniform, 1.0, 1.0};
  for (int t = 0; t < 1000; ++t) {
    const Matrix a = sample_matrix(2, rng, uni);
    for (double v : a.values()) ASSERT_LE(std::abs(v), 1.0);
  }
}

TEST(SampleMatrix, MeanWithinThreeStandardErrors) {
  CounterRng rng(6, "sample", 0);
  const int N = 100000;
  double s = 0.0, s2 = 0.0;
  for (int t = 0; t < N; ++t) {
    const double v = sample_matrix(1, rng)(0, 0);
    s += v;
    s2 += v * v;
  }
  const double mean = s / N;
  const double sd = std::sqrt(s2 / N - mean * mean);
  EXPECT_LE(std::abs(mean), 3.0 * sd / std::sqrt(N));
}

TEST(SampleMatrix, FixedSeedGivesFixedMatrix) {
  CounterRng a(2024, "sample", 3), b(2024, "sample", 3);
  EXPECT_EQ(sample_matrix(4, a), sample_matrix(4, b));
}

TEST(MakeSample, ExpNeverRejects) {
  RejectionCounts counts;
  for (std::uint64_t i = 0; i < 500; ++i) make_sample(3, MatrixFunction::exp, 9, i, {}, &counts);
  EXPECT_EQ(counts.draws, 500u);
  EXPECT_EQ(counts.total(), 0u);
}

TEST(MakeSample, InjectedSignInput) {
  const Labelled l = label(Matrix::diagonal({2.0, -3.0}), MatrixFunction::sign);
  ASSERT_TRUE(l.target.has_value());
  EXPECT_NEAR(distance_to_identity(Matrix::diagonal({1.0, -1.0}) * *l.target), 0.0, 1e-14);
  const Labelled bad = label(Matrix{{0.0, 1.0}, {-1.0, 0.0}}, MatrixFunction::sign);
  EXPECT_FALSE(bad.target.has_value());
  EXPECT_EQ(bad.rejection, "eigenvalue_near_imaginary_axis");
  EXPECT_FALSE(label(Matrix::diagonal({-1.0, 2.0}), MatrixFunction::log).target.has_value());
}

TEST(MakeSample, SignTargetsAreInvolutions) {
  for (std::uint64_t i = 0; i < 300; ++i) {
    const Sample s = make_sample(4, MatrixFunction::sign, 10, i);
    EXPECT_LE(distance_to_identity(s.target * s.target), 1e-6);
    for (double v : s.input.values()) EXPECT_LE(std::abs(v), 5.0);
  }
}

TEST(MakeSample, LogRejectionRateIsStableAcrossSeeds) {
  std::vector<double> rates;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    RejectionCounts c;
    for (std::uint64_t i = 0; i < 8000; ++i) make_sample(3, MatrixFunction::log, seed, i, {}, &c);
    rates.push_back(static_cast<double>(c.total()) / static_cast<double>(c.draws));
  }
  const auto [lo, hi] = std::minmax_element(rates.begin(), rates.end());
  EXPECT_GT(*lo, 0.0);
  EXPECT_LE(*hi - *lo, 0.02);
}

TEST(Dataset, RoundTripIsBitExact) {
  const Dataset ds = generate_dataset({MatrixFunction::sin, 3, 1000, 77, 0, {}});
  const auto path = temp_path("rt.jsonl");
  write_dataset(path, ds);
  const Dataset back = read_dataset(path);
  ASSERT_EQ(back.samples.size(), ds.samples.size());
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    EXPECT_EQ(back.samples[i].input, ds.samples[i].input);
    EXPECT_EQ(back.samples[i].target, ds.samples[i].target);
    EXPECT_EQ(back.samples[i].index, ds.samples[i].index);
  }
  EXPECT_EQ(back.manifest.to_json(), ds.manifest.to_json());
  std::filesystem::remove(path);
}

TEST(Dataset, CountMismatchIsReported) {
  const Dataset ds = generate_dataset({MatrixFunction::exp, 2, 20, 5, 0, {}});
  const auto path = temp_path("short.jsonl");
  write_dataset(path, ds);
  std::string text = slurp(path);
  text.erase(text.rfind('\n', text.size() - 2) + 1);
  std::ofstream(path, std::ios::binary) << text;
  try {
    read_dataset(path);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::manifest_mismatch);
  }
  write_dataset(path, ds);
  DatasetManifest other = ds.manifest;
  other.seed = 6;
  try {
    read_dataset(path, other);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::manifest_mismatch);
  }
  std::filesystem::remove(path);
}

TEST(Dataset, SameSeedSameBytesRegardlessOfThreads) {
  const auto p1 = temp_path("a.jsonl");
  const auto p2 = temp_path("b.jsonl");
  ::setenv("MATFUN_THREADS", "1", 1);
  write_dataset(p1, generate_dataset({MatrixFunction::log, 3, 300, 42, 0, {}}));
  ::setenv("MATFUN_THREADS", "4", 1);
  write_dataset(p2, generate_dataset({MatrixFunction::log, 3, 300, 42, 0, {}}));
  ::unsetenv("MATFUN_THREADS");
  EXPECT_EQ(slurp(p1), slurp(p2));
  std::filesystem::remove(p1);
  std::filesystem::remove(p2);
}

TEST(Dataset, ShiftedIndexRangeMatchesSubset) {
  const Dataset all = generate_dataset({MatrixFunction::cos, 2, 50, 8, 0, {}});
  const Dataset tail = generate_dataset({MatrixFunction::cos, 2, 10, 8, 40, {}});
  for (std::size_t i = 0; i < 10; ++i) EXPECT_EQ(tail.samples[i].input, all.samples[40 + i].input);
}
