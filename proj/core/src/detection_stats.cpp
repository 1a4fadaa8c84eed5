#include "qkdsync/detection_stats.hpp"

#include <algorithm>
#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <cstdio>
#include <string>

#include "qkdsync/errors.hpp"

namespace qkdsync {

namespace {

bool nonnegative_finite(double x) { return std::isfinite(x) && x >= 0.0; }

bool close(double a, double b) {
  return std::abs(a - b) <= 1e-9 * std::max(std::abs(a), std::abs(b)) + 1e-300;
}

double poisson_pmf(std::uint64_t k, double mean) {
  if (mean == 0.0) return k == 0 ? 1.0 : 0.0;
  const double kd = static_cast<double>(k);
  return std::exp(kd * std::log(mean) - mean - std::lgamma(kd + 1.0));
}

// P(X >= k) for X ~ Poisson(mean), k >= 1.
double poisson_upper_tail(std::uint64_t k, double mean) {
  if (mean == 0.0) return 0.0;
  return boost::math::gamma_p(static_cast<double>(k), mean);
}

// log P(X <= k - 1), evaluated from whichever side of the split is small.
double poisson_log_cdf_below(std::uint64_t k, double mean) {
  const double upper = poisson_upper_tail(k, mean);
  if (upper < 0.5) return std::log1p(-upper);
  return std::log(boost::math::gamma_q(static_cast<double>(k), mean));
}

}  // namespace

CountStatistics CountStatistics::from_parameters(std::uint64_t windows_per_frame,
                                                 std::uint64_t sample_size, double dcp_rate_hz,
                                                 double window_width_ns,
                                                 double mean_signal_counts_per_pulse) {
  CountStatistics stats;
  stats.windows_per_frame = windows_per_frame;
  stats.sample_size = sample_size;
  stats.dcp_rate_hz = dcp_rate_hz;
  stats.window_width_ns = window_width_ns;
  stats.mean_signal_counts_per_pulse = mean_signal_counts_per_pulse;
  stats.mean_dark_counts = qkdsync::mean_dark_counts(sample_size, dcp_rate_hz, window_width_ns);
  stats.mean_signal_window_counts =
      qkdsync::mean_window_counts(stats.mean_dark_counts, sample_size, mean_signal_counts_per_pulse);
  stats.validate();
  return stats;
}

CountStatistics CountStatistics::from_means(std::uint64_t windows_per_frame,
                                            double mean_dark_counts,
                                            double mean_signal_window_counts) {
  if (!(mean_signal_window_counts >= mean_dark_counts)) {
    throw ConfigError("signal-window mean must be at least the dark-count mean");
  }
  CountStatistics stats;
  stats.windows_per_frame = windows_per_frame;
  stats.sample_size = 1;
  stats.window_width_ns = 1.0;
  stats.dcp_rate_hz = mean_dark_counts * 1e9;
  stats.mean_dark_counts = mean_dark_counts;
  stats.mean_signal_window_counts = mean_signal_window_counts;
  stats.mean_signal_counts_per_pulse = mean_signal_window_counts - mean_dark_counts;
  stats.validate();
  return stats;
}

void CountStatistics::validate() const {
  if (windows_per_frame < 2) throw ConfigError("at least two windows per frame are required");
  if (sample_size < 1) throw ConfigError("sample size must be positive");
  if (!(window_width_ns > 0.0) || !std::isfinite(window_width_ns)) {
    throw ConfigError("window width must be positive");
  }
  if (!nonnegative_finite(mean_dark_counts) || !nonnegative_finite(mean_signal_counts_per_pulse) ||
      !nonnegative_finite(mean_signal_window_counts) || !nonnegative_finite(dcp_rate_hz)) {
    throw ConfigError("count means and dark-count rate must be finite and nonnegative");
  }
  const double n = static_cast<double>(sample_size);
  if (!close(mean_dark_counts, n * dcp_rate_hz * window_width_ns * 1e-9)) {
    throw ConfigError("dark-count mean disagrees with sample_size * rate * window");
  }
  if (!close(mean_signal_window_counts, mean_dark_counts + n * mean_signal_counts_per_pulse)) {
    throw ConfigError("signal-window mean disagrees with dark mean + sample_size * signal mean");
  }
}

double mean_dark_counts(std::uint64_t sample_size, double dcp_rate_hz, double window_width_ns) {
  if (sample_size < 1 || !nonnegative_finite(dcp_rate_hz) || !nonnegative_finite(window_width_ns)) {
    throw DomainError("sample size must be >= 1 and rate/window nonnegative");
  }
  return static_cast<double>(sample_size) * dcp_rate_hz * window_width_ns * 1e-9;
}

double mean_window_counts(double mean_dark, std::uint64_t sample_size,
                          double mean_signal_per_pulse) {
  if (!nonnegative_finite(mean_dark) || !nonnegative_finite(mean_signal_per_pulse)) {
    throw DomainError("means must be nonnegative");
  }
  return mean_dark + static_cast<double>(sample_size) * mean_signal_per_pulse;
}

double noise_margin_probability(std::uint64_t signal_count, double mean_dark,
                                std::uint64_t windows_per_frame) {
  if (signal_count < 1) throw DomainError("signal count must be >= 1");
  if (!nonnegative_finite(mean_dark)) throw DomainError("dark-count mean must be nonnegative");
  if (windows_per_frame < 2 || mean_dark == 0.0) return 1.0;
  const double noise_windows = static_cast<double>(windows_per_frame - 1);
  return std::exp(noise_windows * poisson_log_cdf_below(signal_count, mean_dark));
}

ExactResult detection_prob_exact(const CountStatistics& stats, const SeriesControl& control) {
  stats.validate();
  if (!(control.tail_epsilon > 0.0)) throw ConfigError("tail epsilon must be positive");

  const double signal_mean = stats.mean_signal_window_counts;
  ExactResult result;
  result.tail_bound = -std::expm1(-signal_mean);  // P(X >= 1)

  double sum = 0.0;
  for (std::uint64_t n = 1; result.tail_bound >= control.tail_epsilon; ++n) {
    if (result.terms >= control.max_terms) {
      char bound[32];
      std::snprintf(bound, sizeof bound, "%g", control.tail_epsilon);
      throw PrecisionError(std::string("series did not reach tail bound ") + bound + " within " +
                               std::to_string(control.max_terms) + " terms",
                           sum, result.terms, result.tail_bound);
    }
    sum += poisson_pmf(n, signal_mean) *
           noise_margin_probability(n, stats.mean_dark_counts, stats.windows_per_frame);
    ++result.terms;
    result.tail_bound = poisson_upper_tail(n + 1, signal_mean);
  }

  if (!std::isfinite(sum)) throw NumericRangeError("non-finite partial sum");
  result.probability = std::clamp(sum, 0.0, 1.0);
  return result;
}

ApproxResult detection_prob_approx(const CountStatistics& stats) {
  stats.validate();
  const double nd = stats.mean_dark_counts;
  const double nw = stats.mean_signal_window_counts;
  const double noise_windows = static_cast<double>(stats.windows_per_frame - 1);

  // exp(-k nd) * nw e^-nw, and exp(-k nd) * (1 + nd)^k folded into one exponent.
  const double single_count = nw * std::exp(-nw - noise_windows * nd);
  const double two_or_more = nw == 0.0 ? 0.0 : boost::math::gamma_p(2.0, nw);
  const double multi_count = two_or_more * std::exp(noise_windows * (std::log1p(nd) - nd));
  double p = single_count + multi_count;

  if (!std::isfinite(single_count) || !std::isfinite(multi_count) || !std::isfinite(p)) {
    throw NumericRangeError("non-finite intermediate in closed-form detection probability");
  }
  constexpr double kExcursion = 1e-12;
  if (p < -kExcursion || p > 1.0 + kExcursion) {
    throw NumericRangeError("closed-form detection probability " + std::to_string(p) +
                            " outside [0, 1]");
  }
  p = std::clamp(p, 0.0, 1.0);
  return {p, nw >= kApproxRegimeLimit};
}

}  // namespace qkdsync
