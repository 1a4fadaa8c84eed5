#pragma once

// Probability of correctly identifying the signal time window after
// accumulating counts over a sample of frames.
//
// The signal window collects Poisson(mean_signal_window_counts) events and each
// of the windows_per_frame - 1 noise windows collects Poisson(mean_dark_counts).
// A detection is correct when the signal window holds at least one count and
// strictly more than every noise window.

#include <cstdint>

namespace qkdsync {

/// Means of the accumulated Poisson counts over one sample of frames.
struct CountStatistics {
  double mean_dark_counts = 0.0;              ///< per noise window, whole sample
  double mean_signal_counts_per_pulse = 0.0;  ///< photoelectrons per pulse
  double mean_signal_window_counts = 0.0;     ///< dark + signal, whole sample
  std::uint64_t windows_per_frame = 2;
  std::uint64_t sample_size = 1;
  double dcp_rate_hz = 0.0;
  double window_width_ns = 1.0;

  /// Derives both means from detector and timing inputs.
  static CountStatistics from_parameters(std::uint64_t windows_per_frame,
                                         std::uint64_t sample_size, double dcp_rate_hz,
                                         double window_width_ns,
                                         double mean_signal_counts_per_pulse);

  /// Wraps precomputed means. The physical fields are filled with a
  /// consistent unit-sample encoding (sample_size = 1, window = 1 ns).
  static CountStatistics from_means(std::uint64_t windows_per_frame, double mean_dark_counts,
                                    double mean_signal_window_counts);

  /// Throws ConfigError when a mean is negative or the derived identities fail.
  void validate() const;
};

struct SeriesControl {
  double tail_epsilon = 1e-10;
  std::uint64_t max_terms = 100000;
};

struct ExactResult {
  double probability = 0.0;
  std::uint64_t terms = 0;   ///< summands evaluated
  double tail_bound = 0.0;   ///< Poisson mass of the discarded summands
};

/// Applicability limit for the closed form; above it results are flagged.
inline constexpr double kApproxRegimeLimit = 0.5;

struct ApproxResult {
  double probability = 0.0;
  bool outside_regime = false;  ///< mean_signal_window_counts >= kApproxRegimeLimit
};

double mean_dark_counts(std::uint64_t sample_size, double dcp_rate_hz, double window_width_ns);

double mean_window_counts(double mean_dark, std::uint64_t sample_size, double mean_signal_per_pulse);

/// Probability that all windows_per_frame - 1 noise windows hold at most
/// signal_count - 1 dark counts each.
double noise_margin_probability(std::uint64_t signal_count, double mean_dark,
                                std::uint64_t windows_per_frame);

/// Series evaluation of the detection probability. The sum over the signal
/// count stops once the remaining Poisson mass drops below tail_epsilon; each
/// summand's noise factor is at most one, so that mass bounds the error.
/// Throws PrecisionError if max_terms is reached first.
ExactResult detection_prob_exact(const CountStatistics& stats, const SeriesControl& control = {});

/// Closed-form approximation valid for mean_signal_window_counts << 1:
///   exp(-(Nw-1) nd) * [ nw e^-nw + P(X_w >= 2) (1 + nd)^(Nw-1) ]
/// Throws NumericRangeError on non-finite intermediates.
ApproxResult detection_prob_approx(const CountStatistics& stats);

}  // namespace qkdsync
