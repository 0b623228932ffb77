#pragma once

#include <array>
#include <cstdint>
#include <string_view>

namespace matfun {

// Philox4x32-10 (Salmon et al., "Parallel random numbers: as easy as 1, 2, 3").
// Counter-based, so any (key, counter) pair can be evaluated independently.
using PhiloxCounter = std::array<std::uint32_t, 4>;
using PhiloxKey = std::array<std::uint32_t, 2>;

PhiloxCounter philox4x32_10(PhiloxCounter ctr, PhiloxKey key) noexcept;

// 32-bit FNV-1a; names sub-streams ("sample", "init", "dropout", ...) so one
// master seed feeds every consumer without overlap.
std::uint32_t stream_id(std::string_view name) noexcept;

// Stream of draws for one (seed, stream, index) triple. The counter is
// (block, index_lo, index_hi, stream) and the key is the 64-bit seed.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint32_t stream, std::uint64_t index) noexcept;
  CounterRng(std::uint64_t seed, std::string_view stream, std::uint64_t index) noexcept
      : CounterRng(seed, stream_id(stream), index) {}

  std::uint32_t next_u32() noexcept;
  std::uint64_t next_u64() noexcept;
  // 53-bit uniform on [0, 1).
  double uniform() noexcept;
  // Box-Muller standard normal.
  double normal() noexcept;
  // Uniform integer in [0, bound) by rejection, bound > 0.
  std::uint64_t below(std::uint64_t bound) noexcept;

  // UniformRandomBitGenerator interface, for std::shuffle and friends.
  using result_type = std::uint64_t;
  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return ~result_type{0}; }
  result_type operator()() noexcept { return next_u64(); }

 private:
  PhiloxKey key_;
  PhiloxCounter ctr_;
  PhiloxCounter block_{};
  int used_ = 4;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace matfun
