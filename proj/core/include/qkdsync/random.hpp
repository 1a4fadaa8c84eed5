#pragma once

#include <cstdint>
#include <limits>

namespace qkdsync {

/// SplitMix64: a counter-based generator whose output is a bijective mix of
/// seed + i * golden_gamma. Cheap to construct, so one instance per
/// (trial, frame) stream costs nothing. Satisfies UniformRandomBitGenerator.
class SplitMix64 {
 public:
  using result_type = std::uint64_t;

  explicit SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept;

 private:
  std::uint64_t state_;
};

/// Finalizer of SplitMix64; also used to hash stream coordinates.
std::uint64_t mix64(std::uint64_t x) noexcept;

/// Substream id reserved for the stage-2 refinement of a trial.
inline constexpr std::uint64_t kStage2Substream = std::numeric_limits<std::uint64_t>::max();

/// Independent stream for (master_seed, trial, substream). Substream 0 is the
/// trial's own stream; substream f + 1 is frame f of that trial.
SplitMix64 make_stream(std::uint64_t master_seed, std::uint64_t trial,
                       std::uint64_t substream = 0) noexcept;

}  // namespace qkdsync
