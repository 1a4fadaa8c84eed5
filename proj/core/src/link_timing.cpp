#include "qkdsync/link_timing.hpp"

#include <bit>
#include <cmath>
#include <string>

#include "qkdsync/errors.hpp"

namespace qkdsync {

namespace {

bool positive_finite(double x) { return std::isfinite(x) && x > 0.0; }

}  // namespace

void FiberLink::validate() const {
  if (!positive_finite(length_km)) {
    throw ConfigError("fiber length must be positive, got " + std::to_string(length_km) + " km");
  }
  if (!std::isfinite(refractive_index) || refractive_index <= 1.0) {
    throw ConfigError("refractive index must exceed 1, got " + std::to_string(refractive_index));
  }
  if (!std::isfinite(loss_db) || loss_db < 0.0) {
    throw ConfigError("loss must be nonnegative, got " + std::to_string(loss_db) + " dB");
  }
}

bool satisfies_window_criterion(double pulse_width_ns, double window_width_ns) {
  // Relative slack so that e.g. 3 * (1/3 ns) is not rejected by rounding.
  constexpr double kSlack = 1e-12;
  return window_width_ns >= 2.0 * pulse_width_ns * (1.0 - kSlack) &&
         window_width_ns <= 4.0 * pulse_width_ns * (1.0 + kSlack);
}

TimingPlan TimingPlan::make(double pulse_width_ns, double window_width_ns,
                            std::uint64_t windows_per_frame, std::uint64_t sample_size,
                            bool enforce_criterion) {
  TimingPlan plan;
  plan.pulse_width_ns = pulse_width_ns;
  plan.window_width_ns = window_width_ns;
  plan.windows_per_frame = windows_per_frame;
  plan.frame_period_ns = static_cast<double>(windows_per_frame) * window_width_ns;
  plan.pulse_rate_hz = 1e9 / plan.frame_period_ns;
  plan.sample_size = sample_size;
  plan.criterion_compliant = enforce_criterion;
  plan.validate();
  return plan;
}

void TimingPlan::validate() const {
  if (!positive_finite(pulse_width_ns)) throw ConfigError("pulse width must be positive");
  if (!positive_finite(window_width_ns)) throw ConfigError("window width must be positive");
  if (windows_per_frame == 0) throw ConfigError("windows per frame must be positive");
  if (sample_size == 0) throw ConfigError("sample size must be positive");
  if (!positive_finite(frame_period_ns) || !positive_finite(pulse_rate_hz)) {
    throw ConfigError("frame period and pulse rate must be positive");
  }
  const double expected_period = static_cast<double>(windows_per_frame) * window_width_ns;
  if (std::abs(frame_period_ns - expected_period) > 1e-9 * expected_period) {
    throw ConfigError("frame period must equal windows_per_frame * window_width");
  }
  if (std::abs(pulse_rate_hz * frame_period_ns - 1e9) > 1.0) {  // 1 part in 1e9
    throw ConfigError("pulse rate must equal 1 / frame period");
  }
  if (!(window_width_ns < frame_period_ns)) {
    throw ConfigError("window width must be shorter than the frame period");
  }
  if (criterion_compliant && !satisfies_window_criterion(pulse_width_ns, window_width_ns)) {
    throw CriterionError("window width " + std::to_string(window_width_ns) +
                         " ns is outside 2..4 x pulse width " + std::to_string(pulse_width_ns) +
                         " ns");
  }
}

double propagation_speed(double refractive_index, LightSpeed light_speed) {
  if (!std::isfinite(refractive_index) || refractive_index < 1.0) {
    throw DomainError("refractive index must be >= 1");
  }
  const double c = light_speed == LightSpeed::Engineering ? kEngineeringLightSpeedKmPerS
                                                          : kPhysicalLightSpeedKmPerS;
  return c / refractive_index;
}

double min_frame_period_us(const FiberLink& link, double speed_km_per_s) {
  if (!positive_finite(speed_km_per_s)) throw DomainError("propagation speed must be positive");
  return 2.0 * link.length_km / speed_km_per_s * 1e6;
}

FramePlan plan_frame(double min_period_us, double window_width_ns, bool round_to_power_of_two) {
  if (!positive_finite(min_period_us)) throw DomainError("minimum frame period must be positive");
  if (!positive_finite(window_width_ns)) throw DomainError("window width must be positive");

  const double ratio = min_period_us * 1e3 / window_width_ns;
  // Absorb representation error so that exact multiples are not bumped up by one.
  const double raw = std::ceil(ratio * (1.0 - 1e-12));
  if (raw > 9.0e18) throw DomainError("window count does not fit in 64 bits");

  FramePlan plan;
  plan.raw_windows = raw < 1.0 ? 1 : static_cast<std::uint64_t>(raw);
  plan.windows_per_frame =
      round_to_power_of_two ? std::bit_ceil(plan.raw_windows) : plan.raw_windows;
  plan.frame_period_ns = static_cast<double>(plan.windows_per_frame) * window_width_ns;
  plan.pulse_rate_hz = 1e9 / plan.frame_period_ns;
  plan.growth_ratio = plan.frame_period_ns / (min_period_us * 1e3);
  return plan;
}

double mean_signal_level(double source_mean_photons, double loss_db) {
  if (!(source_mean_photons >= 0.0) || !(loss_db >= 0.0)) {
    throw DomainError("source level and loss must be nonnegative");
  }
  return source_mean_photons * std::pow(10.0, -loss_db / 10.0);
}

double total_sync_time_ms(std::uint64_t sample_size, double frame_period_ms, std::uint64_t cycles) {
  if (sample_size == 0 || cycles == 0 || !positive_finite(frame_period_ms)) {
    throw DomainError("sample size, frame period and cycle count must be positive");
  }
  return static_cast<double>(sample_size) * frame_period_ms * static_cast<double>(cycles);
}

}  // namespace qkdsync
