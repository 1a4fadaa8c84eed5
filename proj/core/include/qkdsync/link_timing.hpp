#pragma once

// Propagation, frame and attenuation parameters of a two-pass fiber link.
//
// Units follow the quantities engineers quote for this link: km for length,
// km/s for speed, microseconds for the minimum frame period, nanoseconds for
// pulse/window/frame durations, Hz for rates and milliseconds for total time.

#include <cstdint>

namespace qkdsync {

/// Speed of light as used in the engineering procedure (exactly 300 000 km/s).
inline constexpr double kEngineeringLightSpeedKmPerS = 300000.0;
/// CODATA vacuum speed of light.
inline constexpr double kPhysicalLightSpeedKmPerS = 299792.458;

enum class LightSpeed { Engineering, Physical };

struct FiberLink {
  double length_km = 0.0;
  double refractive_index = 1.0;
  double loss_db = 0.0;  ///< one-way loss over the whole link

  /// Throws ConfigError when length <= 0, index <= 1 or loss < 0.
  void validate() const;
};

/// Frame/window geometry of the synchronization search.
struct TimingPlan {
  double pulse_width_ns = 1.0;
  double window_width_ns = 2.0;
  std::uint64_t windows_per_frame = 2;
  double frame_period_ns = 4.0;
  double pulse_rate_hz = 2.5e8;
  std::uint64_t sample_size = 1;
  /// When set, window_width_ns must lie in [2, 4] x pulse_width_ns.
  bool criterion_compliant = true;

  /// Builds a plan, deriving frame period and pulse rate from the window grid.
  static TimingPlan make(double pulse_width_ns, double window_width_ns,
                         std::uint64_t windows_per_frame, std::uint64_t sample_size,
                         bool enforce_criterion = true);

  /// Throws ConfigError (CriterionError for the window/pulse band) on violation.
  void validate() const;
};

/// True when 2 * pulse <= window <= 4 * pulse.
bool satisfies_window_criterion(double pulse_width_ns, double window_width_ns);

/// Group speed in the fiber core, km/s. Throws DomainError for index < 1.
double propagation_speed(double refractive_index,
                         LightSpeed light_speed = LightSpeed::Engineering);

/// Round-trip time over the link, in microseconds.
double min_frame_period_us(const FiberLink& link, double speed_km_per_s);

struct FramePlan {
  std::uint64_t raw_windows = 0;        ///< ceil(min_period / window)
  std::uint64_t windows_per_frame = 0;  ///< raw count, or next power of two
  double frame_period_ns = 0.0;
  double pulse_rate_hz = 0.0;
  double growth_ratio = 0.0;  ///< frame_period / min_period
};

/// Splits the minimum frame period into windows, optionally rounding the
/// window count up to a power of two.
FramePlan plan_frame(double min_period_us, double window_width_ns, bool round_to_power_of_two);

/// Mean photoelectrons per pulse after loss_db of attenuation.
double mean_signal_level(double source_mean_photons, double loss_db);

/// sample_size * frame_period * cycles, in the unit of frame_period_ms.
double total_sync_time_ms(std::uint64_t sample_size, double frame_period_ms, std::uint64_t cycles);

}  // namespace qkdsync
