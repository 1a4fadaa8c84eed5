#pragma once

// Detector response per gated window and the dead-time-safe gating order.
//
// A Geiger-mode SPAD registers at most one event per gate and then stays blind
// for dead_time_ns. The cycle schedule groups the frame into modules of
// tau_m >= dead time; each cycle gates one window per module, so consecutive
// gates within a frame are always tau_m apart. N_c = tau_m / tau_w cycles
// cover every window once.

#include <cstdint>
#include <vector>

#include "qkdsync/random.hpp"

namespace qkdsync {

enum class DetectorMode { IdealCounter, GeigerGated };

struct DetectorParams {
  double dcp_rate_hz = 0.0;
  double dead_time_ns = 0.0;  ///< ignored by IdealCounter
  DetectorMode mode = DetectorMode::IdealCounter;

  /// GeigerGated requires a positive dead time.
  void validate() const;
};

struct CycleSchedule {
  double module_width_ns = 0.0;  ///< tau_m
  double window_width_ns = 0.0;
  double dead_time_ns = 0.0;     ///< dead time the schedule was built for
  std::uint64_t windows_per_frame = 0;
  std::uint64_t cycles = 1;             ///< N_c = tau_m / tau_w
  std::uint64_t stride_windows = 1;     ///< equals cycles
  std::uint64_t windows_per_cycle = 0;  ///< windows_per_frame / cycles

  /// Window visited at `position` of zero-based `cycle`.
  std::uint64_t window_at(std::uint64_t cycle, std::uint64_t position) const;
  /// Zero-based cycle that gates `window`.
  std::uint64_t cycle_of(std::uint64_t window) const;
  /// Ordered window indices gated in zero-based `cycle`.
  std::vector<std::uint64_t> visit_order(std::uint64_t cycle) const;
};

/// Throws ConfigError unless windows_per_frame is a power of two >= 2 that
/// the cycle count divides.
CycleSchedule build_cycle_schedule(std::uint64_t windows_per_frame, double window_width_ns,
                                   double dead_time_ns);

/// Number of gated observations each window receives when every cycle is
/// repeated for sample_size frames in turn (one full synchronization pass).
std::vector<std::uint64_t> gated_observations_per_pass(const CycleSchedule& schedule,
                                                       std::uint64_t sample_size);

struct GateDelay {
  std::uint64_t frame_activation_index = 1;  ///< A_n
  std::uint64_t frame_sequence_index = 1;    ///< B_n
  double delay_ns = 0.0;                     ///< Z_t
};

/// Z_t = T_s / 4 * (A_n - 1) + tau_w * (B_n - 1). Indices are one-based.
GateDelay gating_delay(double frame_period_ns, double window_width_ns,
                       std::uint64_t frame_activation_index, std::uint64_t frame_sequence_index);

/// Registered count for one gate whose primary events are Poisson(mean_counts).
/// IdealCounter returns the Poisson sample; GeigerGated returns min(sample, 1).
std::uint64_t window_response(double mean_counts, DetectorMode mode, SplitMix64& rng);

/// Probability that a Geiger-mode gate fires: 1 - exp(-mean_counts).
double geiger_fire_probability(double mean_counts);

}  // namespace qkdsync
