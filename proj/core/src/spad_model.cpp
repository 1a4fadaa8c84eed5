#include "qkdsync/spad_model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <random>
#include <string>

#include "qkdsync/errors.hpp"

namespace qkdsync {

void DetectorParams::validate() const {
  if (!std::isfinite(dcp_rate_hz) || dcp_rate_hz < 0.0) {
    throw ConfigError("dark-count rate must be nonnegative");
  }
  if (!std::isfinite(dead_time_ns) || dead_time_ns < 0.0) {
    throw ConfigError("dead time must be nonnegative");
  }
  if (mode == DetectorMode::GeigerGated && !(dead_time_ns > 0.0)) {
    throw ConfigError("Geiger-mode detector requires a positive dead time");
  }
}

std::uint64_t CycleSchedule::window_at(std::uint64_t cycle, std::uint64_t position) const {
  return cycle + position * stride_windows;
}

std::uint64_t CycleSchedule::cycle_of(std::uint64_t window) const { return window % stride_windows; }

std::vector<std::uint64_t> CycleSchedule::visit_order(std::uint64_t cycle) const {
  if (cycle >= cycles) throw ConfigError("cycle index out of range");
  std::vector<std::uint64_t> order(windows_per_cycle);
  for (std::uint64_t i = 0; i < windows_per_cycle; ++i) order[i] = window_at(cycle, i);
  return order;
}

CycleSchedule build_cycle_schedule(std::uint64_t windows_per_frame, double window_width_ns,
                                   double dead_time_ns) {
  if (windows_per_frame < 2 || !std::has_single_bit(windows_per_frame)) {
    throw ConfigError("windows per frame must be a power of two >= 2, got " +
                      std::to_string(windows_per_frame));
  }
  if (!std::isfinite(window_width_ns) || !(window_width_ns > 0.0)) {
    throw ConfigError("window width must be positive");
  }
  if (!std::isfinite(dead_time_ns) || dead_time_ns < 0.0) {
    throw ConfigError("dead time must be nonnegative");
  }

  // Smallest power-of-two multiple of the window that covers the dead time.
  const double windows_in_dead_time = std::ceil(dead_time_ns / window_width_ns * (1.0 - 1e-12));
  if (windows_in_dead_time > 9.0e18) throw ConfigError("dead time is too long for the window grid");
  const auto min_windows =
      std::max<std::uint64_t>(1, static_cast<std::uint64_t>(windows_in_dead_time));
  const std::uint64_t cycles = std::bit_ceil(min_windows);

  if (cycles > windows_per_frame || windows_per_frame % cycles != 0) {
    throw ConfigError("cycle count " + std::to_string(cycles) + " does not divide " +
                      std::to_string(windows_per_frame) + " windows per frame");
  }

  CycleSchedule schedule;
  schedule.window_width_ns = window_width_ns;
  schedule.dead_time_ns = dead_time_ns;
  schedule.windows_per_frame = windows_per_frame;
  schedule.cycles = cycles;
  schedule.stride_windows = cycles;
  schedule.windows_per_cycle = windows_per_frame / cycles;
  schedule.module_width_ns = static_cast<double>(cycles) * window_width_ns;
  return schedule;
}

std::vector<std::uint64_t> gated_observations_per_pass(const CycleSchedule& schedule,
                                                       std::uint64_t sample_size) {
  std::vector<std::uint64_t> observations(schedule.windows_per_frame, 0);
  for (std::uint64_t cycle = 0; cycle < schedule.cycles; ++cycle) {
    for (std::uint64_t frame = 0; frame < sample_size; ++frame) {
      for (std::uint64_t pos = 0; pos < schedule.windows_per_cycle; ++pos) {
        ++observations[schedule.window_at(cycle, pos)];
      }
    }
  }
  return observations;
}

GateDelay gating_delay(double frame_period_ns, double window_width_ns,
                       std::uint64_t frame_activation_index, std::uint64_t frame_sequence_index) {
  if (frame_activation_index < 1 || frame_sequence_index < 1) {
    throw DomainError("gate indices are one-based");
  }
  if (!(frame_period_ns > 0.0) || !(window_width_ns > 0.0)) {
    throw DomainError("frame period and window width must be positive");
  }
  GateDelay delay;
  delay.frame_activation_index = frame_activation_index;
  delay.frame_sequence_index = frame_sequence_index;
  delay.delay_ns = frame_period_ns / 4.0 * static_cast<double>(frame_activation_index - 1) +
                   window_width_ns * static_cast<double>(frame_sequence_index - 1);
  return delay;
}

double geiger_fire_probability(double mean_counts) { return -std::expm1(-mean_counts); }

std::uint64_t window_response(double mean_counts, DetectorMode mode, SplitMix64& rng) {
  if (!(mean_counts > 0.0)) return 0;
  if (mode == DetectorMode::IdealCounter) {
    return std::poisson_distribution<std::uint64_t>(mean_counts)(rng);
  }
  return std::bernoulli_distribution(geiger_fire_probability(mean_counts))(rng) ? 1 : 0;
}

}  // namespace qkdsync
