#include "qkdsync/random.hpp"

namespace qkdsync {

namespace {
constexpr std::uint64_t kGoldenGamma = 0x9e3779b97f4a7c15ULL;
constexpr std::uint64_t kTrialSalt = 0xd1b54a32d192ed03ULL;
constexpr std::uint64_t kSubstreamSalt = 0x8cb92ba72f3d8dd7ULL;
}  // namespace

std::uint64_t mix64(std::uint64_t x) noexcept {
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

SplitMix64::result_type SplitMix64::operator()() noexcept {
  state_ += kGoldenGamma;
  return mix64(state_);
}

SplitMix64 make_stream(std::uint64_t master_seed, std::uint64_t trial,
                       std::uint64_t substream) noexcept {
  const std::uint64_t trial_key = mix64(master_seed ^ mix64(trial * kTrialSalt + kGoldenGamma));
  return SplitMix64(mix64(trial_key + mix64(substream * kSubstreamSalt + 1)));
}

}  // namespace qkdsync
