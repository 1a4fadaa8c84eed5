#include "qkdsync/detection_stats.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "qkdsync/errors.hpp"

using namespace qkdsync;

namespace {

// 40-digit references from an arbitrary-precision evaluation of the series.
constexpr double kExactFirst = 0.07945847148430681;   // Nw 2^19, nd 2.56e-6, nw 0.256
constexpr double kExactSecond = 0.27478187892504055;  // Nw 2^19, nd 1.024e-5, nw 1.024
constexpr double kExactThird = 0.99959732006878471;   // Nw 2^19, nd 5.12e-5, nw 10.24
constexpr double kMarginReference = 0.99999828202076615;  // (2, 2.56e-6, 2^19)

CountStatistics link_stats(std::uint64_t sample_size, double dcp_hz, double signal_mean) {
  return CountStatistics::from_parameters(524288, sample_size, dcp_hz, 2.0, signal_mean);
}

}  // namespace

TEST(MeanCounts, Products) {
  EXPECT_NEAR(mean_dark_counts(256, 5.0, 2.0), 2.56e-6, 1e-18);
  EXPECT_NEAR(mean_dark_counts(1024, 25.0, 2.0), 5.12e-5, 1e-17);
  EXPECT_EQ(mean_dark_counts(77, 0.0, 2.0), 0.0);
  EXPECT_NEAR(mean_window_counts(2.56e-6, 256, 0.001), 0.256, 1e-5);
  EXPECT_NEAR(mean_window_counts(1.024e-5, 1024, 0.001), 1.024, 1e-4);
  EXPECT_EQ(mean_window_counts(0.0, 512, 0.0), 0.0);
}

TEST(CountStatistics, IdentitiesAreValidated) {
  const CountStatistics s = link_stats(256, 5.0, 0.001);
  EXPECT_NO_THROW(s.validate());
  CountStatistics broken = s;
  broken.mean_dark_counts *= 1.01;
  EXPECT_THROW(broken.validate(), ConfigError);
  broken = s;
  broken.windows_per_frame = 1;
  EXPECT_THROW(broken.validate(), ConfigError);
  EXPECT_THROW(CountStatistics::from_means(16, 0.5, 0.4), ConfigError);
  EXPECT_NO_THROW(CountStatistics::from_means(16, 0.5, 0.5).validate());
}

TEST(NoiseMargin, Examples) {
  EXPECT_DOUBLE_EQ(noise_margin_probability(1, 0.0, 524288), 1.0);
  EXPECT_DOUBLE_EQ(noise_margin_probability(7, 0.0, 3), 1.0);
  EXPECT_NEAR(noise_margin_probability(1, 0.5, 3), std::exp(-1.0), 1e-15);
  // 1 - (Nw - 1) nd^2 / 2 to leading order.
  EXPECT_NEAR(noise_margin_probability(2, 2.56e-6, 524288), 1.0, 2e-6);
  EXPECT_NEAR(noise_margin_probability(2, 2.56e-6, 524288), kMarginReference, 1e-14);
}

TEST(NoiseMargin, MonotoneInSignalCountAndWindowCount) {
  std::mt19937_64 gen(21);
  std::uniform_real_distribution<double> mean(0.0, 5.0);
  std::uniform_int_distribution<std::uint64_t> count(1, 40);
  std::uniform_int_distribution<std::uint64_t> windows(2, 1u << 20);
  for (int i = 0; i < 2000; ++i) {
    const double nd = mean(gen);
    const auto n = count(gen);
    const auto nw = windows(gen);
    const double p = noise_margin_probability(n, nd, nw);
    EXPECT_GE(p, 0.0);
    EXPECT_LE(p, 1.0);
    EXPECT_GE(noise_margin_probability(n + 1, nd, nw), p);
    EXPECT_LE(noise_margin_probability(n, nd, nw + 1), p);
  }
}

TEST(DetectionExact, MatchesHighPrecisionReference) {
  const ExactResult first = detection_prob_exact(link_stats(256, 5.0, 0.001));
  EXPECT_NEAR(first.probability, kExactFirst, 1e-10);
  EXPECT_LT(first.tail_bound, 1e-10);
  EXPECT_GT(first.terms, 0u);
  EXPECT_NEAR(detection_prob_exact(link_stats(1024, 5.0, 0.001)).probability, kExactSecond, 1e-10);
  EXPECT_NEAR(detection_prob_exact(link_stats(1024, 25.0, 0.01)).probability, kExactThird, 1e-10);
}

TEST(DetectionExact, ZeroSignalWindowMeanGivesZero) {
  const ExactResult r = detection_prob_exact(CountStatistics::from_means(64, 0.0, 0.0));
  EXPECT_EQ(r.probability, 0.0);
}

TEST(DetectionExact, TwoWindowsWithoutNoise) {
  for (double nw : {0.01, 0.3, 1.0, 4.0}) {
    const ExactResult r = detection_prob_exact(CountStatistics::from_means(2, 0.0, nw));
    EXPECT_NEAR(r.probability, -std::expm1(-nw), r.tail_bound + 1e-15);
  }
}

TEST(DetectionExact, MatchesJointEnumerationOracle) {
  EXPECT_NEAR(detection_prob_exact(CountStatistics::from_means(4, 0.1, 0.5)).probability,
              oracle::detection_probability(4, 0.1, 0.5), 1e-8);
  const double means[] = {0.0, 0.05, 0.5, 1.0, 2.0};
  for (int nwin = 2; nwin <= 6; ++nwin) {
    for (double nd : means) {
      for (double nw : means) {
        if (nw < nd) continue;
        const double got =
            detection_prob_exact(CountStatistics::from_means(nwin, nd, nw)).probability;
        EXPECT_NEAR(got, oracle::detection_probability(nwin, nd, nw), 1e-8)
            << "Nw=" << nwin << " nd=" << nd << " nw=" << nw;
      }
    }
  }
}

TEST(DetectionExact, TermLimitRaisesWithPartialSum) {
  SeriesControl control;
  control.max_terms = 3;
  try {
    detection_prob_exact(CountStatistics::from_means(16, 0.01, 20.0), control);
    FAIL() << "expected PrecisionError";
  } catch (const PrecisionError& e) {
    EXPECT_EQ(e.terms(), 3u);
    EXPECT_GE(e.partial_sum(), 0.0);
    EXPECT_GT(e.tail_bound(), 1e-10);
  }
}

TEST(DetectionExact, ProbabilityBoundsAndMonotonicity) {
  // Noise and signal-window means move independently here: raising the noise
  // mean at a fixed signal-window mean never helps, and raising the signal
  // mean at a fixed noise mean never hurts.
  for (std::uint64_t nwin : {2u, 16u, 1024u}) {
    for (int i = 0; i <= 10; ++i) {
      const double nd = 0.01 * i;
      for (int j = 0; j <= 10; ++j) {
        const double signal_total = 0.2 * j;
        const double nw = nd + signal_total;
        const double p = detection_prob_exact(CountStatistics::from_means(nwin, nd, nw)).probability;
        EXPECT_GE(p, 0.0);
        EXPECT_LE(p, 1.0);
        const double more_signal =
            detection_prob_exact(CountStatistics::from_means(nwin, nd, nw + 0.2)).probability;
        EXPECT_GE(more_signal, p - 1e-12);
        if (nd + 0.01 <= nw) {
          const double more_noise =
              detection_prob_exact(CountStatistics::from_means(nwin, nd + 0.01, nw)).probability;
          EXPECT_LE(more_noise, p + 1e-12);
        }
      }
    }
  }
}

TEST(DetectionExact, DarkCountsCanRaiseProbabilityAtFixedSignalMean) {
  // With the per-pulse signal held fixed, extra dark counts also land in the
  // signal window. With two windows and no signal that is the only way to win.
  const auto p_at = [](double nd, double signal_total) {
    return detection_prob_exact(CountStatistics::from_means(2, nd, nd + signal_total)).probability;
  };
  EXPECT_EQ(p_at(0.0, 0.0), 0.0);
  EXPECT_GT(p_at(0.05, 0.0), 0.0);
  EXPECT_GT(p_at(0.02, 0.2), p_at(0.0, 0.2));
}

TEST(DetectionApprox, ReferenceValues) {
  EXPECT_NEAR(detection_prob_approx(link_stats(256, 5.0, 0.001)).probability, 0.0795, 0.0005);
  EXPECT_NEAR(detection_prob_approx(link_stats(1024, 5.0, 0.001)).probability, 0.275, 0.002);
  EXPECT_NEAR(detection_prob_approx(link_stats(1024, 25.0, 0.01)).probability, 0.9989, 0.0005);
}

TEST(DetectionApprox, RegimeFlag) {
  EXPECT_FALSE(detection_prob_approx(link_stats(256, 5.0, 0.001)).outside_regime);
  EXPECT_TRUE(detection_prob_approx(link_stats(1024, 5.0, 0.001)).outside_regime);
  EXPECT_TRUE(detection_prob_approx(CountStatistics::from_means(8, 0.0, 0.5)).outside_regime);
}

TEST(DetectionApprox, AgreesWithSeriesAtFirstReferenceSet) {
  const CountStatistics s = link_stats(256, 5.0, 0.001);
  const double exact = detection_prob_exact(s).probability;
  const double approx = detection_prob_approx(s).probability;
  EXPECT_LE(std::abs(exact - approx) / exact, 2e-4);
}

TEST(DetectionApprox, StaysInUnitIntervalForLargeFrames) {
  std::mt19937_64 gen(8);
  std::uniform_real_distribution<double> nd(0.0, 1e-3);
  std::uniform_real_distribution<double> sig(0.0, 20.0);
  for (int i = 0; i < 500; ++i) {
    const double d = nd(gen);
    const ApproxResult r =
        detection_prob_approx(CountStatistics::from_means(1u << 22, d, d + sig(gen)));
    EXPECT_GE(r.probability, 0.0);
    EXPECT_LE(r.probability, 1.0);
  }
}
