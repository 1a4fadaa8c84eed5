#include <benchmark/benchmark.h>

#include "qkdsync/detection_stats.hpp"

using namespace qkdsync;

namespace {

// Index selects one of the three reference operating points at Nw = 2^19.
CountStatistics operating_point(std::int64_t index) {
  switch (index) {
    case 0:
      return CountStatistics::from_parameters(524288, 256, 5.0, 2.0, 0.001);
    case 1:
      return CountStatistics::from_parameters(524288, 1024, 5.0, 2.0, 0.001);
    default:
      return CountStatistics::from_parameters(524288, 1024, 25.0, 2.0, 0.01);
  }
}

void BM_DetectionExact(benchmark::State& state) {
  const CountStatistics s = operating_point(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(detection_prob_exact(s));
}
BENCHMARK(BM_DetectionExact)->DenseRange(0, 2);

void BM_DetectionApprox(benchmark::State& state) {
  const CountStatistics s = operating_point(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(detection_prob_approx(s));
}
BENCHMARK(BM_DetectionApprox)->DenseRange(0, 2);

void BM_NoiseMargin(benchmark::State& state) {
  const auto n = static_cast<std::uint64_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(noise_margin_probability(n, 5.12e-5, 524288));
}
BENCHMARK(BM_NoiseMargin)->Arg(1)->Arg(4)->Arg(16);

}  // namespace
