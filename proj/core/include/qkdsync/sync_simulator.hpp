#pragma once

// Monte Carlo model of the two-stage signal-window search.
//
// Stage 1 accumulates counts in every window of the frame over sample_size
// frames and picks the window with the most counts. Stage 2 splits the three
// windows around the stage-1 result into equal subintervals, samples each one
// repeatedly and returns the busiest subinterval.
//
// Every trial draws from its own counter-derived random streams, so a report
// is bit-identical for any number of worker threads.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qkdsync/link_timing.hpp"
#include "qkdsync/random.hpp"
#include "qkdsync/spad_model.hpp"

namespace qkdsync {

struct PulsePlacement {
  enum class Kind { Contained, Straddling };

  Kind kind = Kind::Contained;
  std::uint64_t window = 0;  ///< signal window, or first of the straddled pair
  double fraction_in_first = 1.0;

  static PulsePlacement contained(std::uint64_t signal_window);
  static PulsePlacement straddling(std::uint64_t first_window, double fraction_in_first);

  /// first_window + 1 modulo windows_per_frame.
  std::uint64_t second_window(std::uint64_t windows_per_frame) const;
  /// True if `window` receives part of the pulse energy.
  bool holds_energy(std::uint64_t w, std::uint64_t windows_per_frame) const;
  void validate(std::uint64_t windows_per_frame) const;
};

/// Pulse start within the frame. A contained pulse is centred in its window;
/// a straddling pulse puts fraction_in_first of its width before the boundary.
double pulse_start_ns(const PulsePlacement& placement, const TimingPlan& timing);

struct Stage2Config {
  std::uint32_t intervals = 3;
  std::uint32_t subintervals_per_interval = 17;
  std::uint32_t samples_per_subinterval = 800;

  std::uint32_t total_subintervals() const { return intervals * subintervals_per_interval; }
};

struct ScenarioConfig {
  TimingPlan timing;
  DetectorParams detector;
  /// Gating order; none means every window is gated in every frame.
  std::optional<CycleSchedule> schedule;
  /// Fixed placement; none draws a uniformly random pulse position per trial.
  std::optional<PulsePlacement> placement;
  double mean_signal_per_pulse = 0.0;
  std::uint64_t trials = 1;
  std::uint64_t master_seed = 0;
  /// When present, correctly detected trials continue into stage 2.
  std::optional<Stage2Config> stage2;
  /// Worker threads; 0 uses the hardware concurrency.
  unsigned threads = 1;

  void validate() const;
};

struct TrialOutcome {
  std::optional<std::uint64_t> decided_window;  ///< none on a miss
  bool correct = false;
  std::uint64_t signal_window_count = 0;  ///< best of the windows holding the pulse
  std::uint64_t max_noise_count = 0;
  bool tie_occurred = false;  ///< the top count is shared by several windows
};

struct Decision {
  std::optional<std::uint64_t> window;
  bool correct = false;
  std::uint64_t signal_count = 0;
  std::uint64_t max_noise_count = 0;
  bool tie = false;
};

/// Applies the detection rules to accumulated counts (one entry per window).
///
/// Contained: correct iff the signal window has >= 1 count and strictly more
/// than every other window. Straddling: correct iff the better of the two
/// signal windows has >= 1 count and strictly more than every noise window;
/// the two signal windows may tie. The reported window is the lowest-index
/// argmax, or none when every count is zero.
Decision adjudicate(std::span<const std::uint64_t> counts, const PulsePlacement& placement);

struct WindowCount {
  std::uint64_t window = 0;
  std::uint64_t count = 0;
};

/// adjudicate() over sparse counts: `nonzero` lists the windows with positive
/// counts in increasing window order; all other windows hold zero.
Decision adjudicate_sparse(std::span<const WindowCount> nonzero, std::uint64_t windows_per_frame,
                           const PulsePlacement& placement);

/// One stage-1 search; deterministic in (config.master_seed, trial_index).
TrialOutcome run_stage1_trial(const ScenarioConfig& config, std::uint64_t trial_index);

/// Accumulated nonzero window counts of one stage-1 search together with the
/// placement used (drawn from the trial stream when config.placement is none).
struct Stage1Counts {
  PulsePlacement placement;
  std::vector<WindowCount> nonzero;
};
Stage1Counts simulate_stage1_counts(const ScenarioConfig& config, std::uint64_t trial_index);

/// Refines a stage-1 window. Returns the lowest-index busiest subinterval in
/// [0, intervals * subintervals_per_interval) of the span centred on
/// coarse_window (wrapping modulo windows_per_frame).
std::uint32_t run_stage2_refine(const ScenarioConfig& config, std::uint64_t coarse_window,
                                double pulse_start_ns, SplitMix64& rng);

/// Subinterval of the refinement span holding the pulse centre, if any.
std::optional<std::uint32_t> stage2_true_subinterval(const ScenarioConfig& config,
                                                     std::uint64_t coarse_window,
                                                     double pulse_start_ns);

struct Stage2Summary {
  std::uint64_t attempted = 0;
  std::uint64_t within_one = 0;  ///< refined index within +-1 of the true subinterval

  double fraction_within_one() const {
    return attempted == 0 ? 0.0 : static_cast<double>(within_one) / static_cast<double>(attempted);
  }
};

struct SimulationReport {
  double estimated_p_d = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double standard_error = 0.0;
  std::uint64_t trials = 0;
  std::uint64_t successes = 0;
  std::optional<double> analytic_p_d;  ///< only for IdealCounter + fixed Contained placement
  double simulated_elapsed_model_time_ms = 0.0;
  std::string ci_method;
  bool degenerate_ci = false;  ///< fewer than kMinTrialsForInterval trials
  std::optional<Stage2Summary> stage2;
};

inline constexpr std::uint64_t kMinTrialsForInterval = 100;

SimulationReport estimate_detection_probability(const ScenarioConfig& config);

}  // namespace qkdsync
