#include "qkdsync/sync_simulator.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <random>
#include <thread>
#include <unordered_set>

#include "qkdsync/detection_stats.hpp"
#include "qkdsync/errors.hpp"

namespace qkdsync {

// ---------------------------------------------------------------------------
// Pulse placement

PulsePlacement PulsePlacement::contained(std::uint64_t signal_window) {
  return {Kind::Contained, signal_window, 1.0};
}

PulsePlacement PulsePlacement::straddling(std::uint64_t first_window, double fraction_in_first) {
  return {Kind::Straddling, first_window, fraction_in_first};
}

std::uint64_t PulsePlacement::second_window(std::uint64_t windows_per_frame) const {
  return (window + 1) % windows_per_frame;
}

bool PulsePlacement::holds_energy(std::uint64_t w, std::uint64_t windows_per_frame) const {
  if (w == window) return true;
  return kind == Kind::Straddling && w == second_window(windows_per_frame);
}

void PulsePlacement::validate(std::uint64_t windows_per_frame) const {
  if (window >= windows_per_frame) throw ConfigError("pulse window index outside the frame");
  if (kind == Kind::Straddling && !(fraction_in_first > 0.0 && fraction_in_first < 1.0)) {
    throw ConfigError("straddling fraction must lie strictly between 0 and 1");
  }
}

double pulse_start_ns(const PulsePlacement& placement, const TimingPlan& timing) {
  const double window_start = static_cast<double>(placement.window) * timing.window_width_ns;
  if (placement.kind == PulsePlacement::Kind::Contained) {
    return window_start + 0.5 * (timing.window_width_ns - timing.pulse_width_ns);
  }
  return window_start + timing.window_width_ns - placement.fraction_in_first * timing.pulse_width_ns;
}

void ScenarioConfig::validate() const {
  timing.validate();
  detector.validate();
  if (timing.windows_per_frame < 2) throw ConfigError("at least two windows per frame are required");
  if (trials < 1) throw ConfigError("trials must be >= 1");
  if (!std::isfinite(mean_signal_per_pulse) || mean_signal_per_pulse < 0.0) {
    throw ConfigError("mean signal per pulse must be nonnegative");
  }
  if (placement) {
    placement->validate(timing.windows_per_frame);
  } else if (timing.pulse_width_ns > timing.window_width_ns) {
    throw ConfigError("random placement needs the pulse to fit in one window");
  }
  if (schedule) {
    if (schedule->windows_per_frame != timing.windows_per_frame ||
        schedule->window_width_ns != timing.window_width_ns) {
      throw ConfigError("schedule geometry does not match the timing plan");
    }
    if (detector.mode == DetectorMode::GeigerGated &&
        schedule->module_width_ns < detector.dead_time_ns) {
      throw ConfigError("schedule module is shorter than the detector dead time");
    }
  }
  if (stage2 && (stage2->intervals == 0 || stage2->intervals % 2 == 0 ||
                 stage2->subintervals_per_interval == 0 || stage2->samples_per_subinterval == 0)) {
    throw ConfigError("stage 2 needs an odd interval count and positive subintervals and samples");
  }
}

// ---------------------------------------------------------------------------
// Adjudication

namespace {

struct CountSummary {
  std::uint64_t first = 0;
  std::uint64_t second = 0;
  std::uint64_t first_window = 0;
  std::uint64_t second_window = 0;
  bool straddling = false;
  std::uint64_t noise_max = 0;
  std::optional<std::uint64_t> noise_max_window;  // lowest noise window holding noise_max
  std::uint64_t windows_at_max = 0;
};

Decision decide(const CountSummary& s) {
  Decision d;
  d.signal_count = s.straddling ? std::max(s.first, s.second) : s.first;
  d.max_noise_count = s.noise_max;
  const std::uint64_t top = std::max(d.signal_count, s.noise_max);
  if (top == 0) return d;  // miss

  d.tie = s.windows_at_max > 1;
  d.correct = d.signal_count > s.noise_max;  // implies signal_count >= 1

  std::uint64_t lowest = UINT64_MAX;
  if (s.first == top) lowest = std::min(lowest, s.first_window);
  if (s.straddling && s.second == top) lowest = std::min(lowest, s.second_window);
  if (s.noise_max == top && s.noise_max_window) lowest = std::min(lowest, *s.noise_max_window);
  d.window = lowest;
  return d;
}

CountSummary summary_frame(std::uint64_t windows_per_frame, const PulsePlacement& placement) {
  placement.validate(windows_per_frame);
  CountSummary s;
  s.first_window = placement.window;
  s.straddling = placement.kind == PulsePlacement::Kind::Straddling;
  s.second_window = s.straddling ? placement.second_window(windows_per_frame) : placement.window;
  return s;
}

}  // namespace

Decision adjudicate(std::span<const std::uint64_t> counts, const PulsePlacement& placement) {
  CountSummary s = summary_frame(counts.size(), placement);
  std::uint64_t top = 0;
  for (std::uint64_t w = 0; w < counts.size(); ++w) {
    const std::uint64_t c = counts[w];
    if (placement.holds_energy(w, counts.size())) {
      (w == s.first_window ? s.first : s.second) = c;
    } else if (!s.noise_max_window || c > s.noise_max) {
      s.noise_max = c;
      s.noise_max_window = w;
    }
    if (c > top) {
      top = c;
      s.windows_at_max = 1;
    } else if (c == top) {
      ++s.windows_at_max;
    }
  }
  return decide(s);
}

Decision adjudicate_sparse(std::span<const WindowCount> nonzero, std::uint64_t windows_per_frame,
                           const PulsePlacement& placement) {
  CountSummary s = summary_frame(windows_per_frame, placement);
  std::uint64_t top = 0;
  for (const WindowCount& e : nonzero) {
    if (e.count == 0) continue;
    if (placement.holds_energy(e.window, windows_per_frame)) {
      (e.window == s.first_window ? s.first : s.second) = e.count;
    } else if (e.count > s.noise_max) {
      s.noise_max = e.count;
      s.noise_max_window = e.window;
    }
    if (e.count > top) {
      top = e.count;
      s.windows_at_max = 1;
    } else if (e.count == top) {
      ++s.windows_at_max;
    }
  }
  if (!s.noise_max_window) {
    // Every noise window is zero: the lowest one that does not hold the pulse.
    for (std::uint64_t w = 0; w < windows_per_frame && w < 3; ++w) {
      if (!placement.holds_energy(w, windows_per_frame)) {
        s.noise_max_window = w;
        break;
      }
    }
  }
  // With top == 0 decide() reports a miss, so windows_at_max only matters for top > 0.
  return decide(s);
}

// ---------------------------------------------------------------------------
// Stage 1

namespace {

// Maps noise index j in [0, noise_windows) onto the window grid, skipping
// the windows that hold the pulse.
class NoiseIndex {
 public:
  NoiseIndex(std::uint64_t windows_per_frame, const PulsePlacement& placement)
      : first_(placement.window),
        wraps_(placement.kind == PulsePlacement::Kind::Straddling &&
               placement.window + 1 == windows_per_frame),
        signal_windows_(placement.kind == PulsePlacement::Kind::Straddling ? 2 : 1),
        noise_windows_(windows_per_frame - signal_windows_) {}

  std::uint64_t count() const { return noise_windows_; }

  std::uint64_t window(std::uint64_t j) const {
    if (wraps_) return j + 1;  // pulse holds the last and the first window
    return j < first_ ? j : j + signal_windows_;
  }

 private:
  std::uint64_t first_;
  bool wraps_;
  std::uint64_t signal_windows_;
  std::uint64_t noise_windows_;
};

std::uint64_t sample_poisson(double mean, SplitMix64& rng) {
  if (!(mean > 0.0)) return 0;
  return std::poisson_distribution<std::uint64_t>(mean)(rng);
}

std::uint64_t sample_binomial(std::uint64_t n, double p, SplitMix64& rng) {
  if (n == 0 || !(p > 0.0)) return 0;
  if (p >= 1.0) return n;
  return std::binomial_distribution<std::uint64_t>(n, p)(rng);
}

PulsePlacement draw_placement(const TimingPlan& timing, SplitMix64& rng) {
  const std::uint64_t window =
      std::uniform_int_distribution<std::uint64_t>(0, timing.windows_per_frame - 1)(rng);
  const double offset = std::uniform_real_distribution<double>(0.0, timing.window_width_ns)(rng);
  if (offset + timing.pulse_width_ns <= timing.window_width_ns) {
    return PulsePlacement::contained(window);
  }
  return PulsePlacement::straddling(window,
                                    (timing.window_width_ns - offset) / timing.pulse_width_ns);
}

struct PerFrameMeans {
  double dark = 0.0;
  double first = 0.0;
  double second = 0.0;
};

PerFrameMeans per_frame_means(const ScenarioConfig& config, const PulsePlacement& placement) {
  PerFrameMeans m;
  m.dark = config.detector.dcp_rate_hz * config.timing.window_width_ns * 1e-9;
  if (placement.kind == PulsePlacement::Kind::Contained) {
    m.first = config.mean_signal_per_pulse + m.dark;
  } else {
    m.first = config.mean_signal_per_pulse * placement.fraction_in_first + m.dark;
    m.second = config.mean_signal_per_pulse * (1.0 - placement.fraction_in_first) + m.dark;
  }
  return m;
}

void push_registration(std::vector<std::uint64_t>& events, std::uint64_t window,
                       std::uint64_t count) {
  events.insert(events.end(), count, window);
}

std::vector<WindowCount> aggregate(std::vector<std::uint64_t>& events) {
  std::sort(events.begin(), events.end());
  std::vector<WindowCount> out;
  for (std::uint64_t w : events) {
    if (!out.empty() && out.back().window == w) {
      ++out.back().count;
    } else {
      out.push_back({w, 1});
    }
  }
  return out;
}

// Uniform random subset of size k from [0, n) (Floyd's algorithm).
std::unordered_set<std::uint64_t> sample_distinct(std::uint64_t n, std::uint64_t k,
                                                  SplitMix64& rng) {
  std::unordered_set<std::uint64_t> chosen;
  chosen.reserve(static_cast<std::size_t>(k));
  for (std::uint64_t j = n - k; j < n; ++j) {
    const std::uint64_t t = std::uniform_int_distribution<std::uint64_t>(0, j)(rng);
    if (!chosen.insert(t).second) chosen.insert(j);
  }
  return chosen;
}

// Counts over the whole sample drawn from their exact aggregate laws:
// Poisson(N mu) for an ideal counter, Binomial(N, 1 - e^-mu) for a Geiger gate.
std::vector<WindowCount> accumulate_aggregate(const ScenarioConfig& config,
                                              const PulsePlacement& placement,
                                              SplitMix64& rng) {
  const std::uint64_t frames = config.timing.sample_size;
  const bool ideal = config.detector.mode == DetectorMode::IdealCounter;
  const PerFrameMeans means = per_frame_means(config, placement);
  const NoiseIndex noise(config.timing.windows_per_frame, placement);
  const double n = static_cast<double>(frames);

  std::vector<std::uint64_t> events;
  auto signal_draw = [&](double mu) {
    return ideal ? sample_poisson(n * mu, rng)
                 : sample_binomial(frames, geiger_fire_probability(mu), rng);
  };
  push_registration(events, placement.window, signal_draw(means.first));
  if (placement.kind == PulsePlacement::Kind::Straddling) {
    push_registration(events, placement.second_window(config.timing.windows_per_frame),
                      signal_draw(means.second));
  }

  const double noise_windows = static_cast<double>(noise.count());
  if (noise.count() == 0 || !(means.dark > 0.0)) return aggregate(events);

  if (ideal) {
    const double total_mean = noise_windows * n * means.dark;
    if (total_mean < noise_windows) {
      // Poisson splitting: the total lands uniformly on the noise windows.
      const std::uint64_t total = sample_poisson(total_mean, rng);
      std::uniform_int_distribution<std::uint64_t> pick(0, noise.count() - 1);
      for (std::uint64_t i = 0; i < total; ++i) events.push_back(noise.window(pick(rng)));
    } else {
      for (std::uint64_t j = 0; j < noise.count(); ++j) {
        push_registration(events, noise.window(j), sample_poisson(n * means.dark, rng));
      }
    }
  } else {
    const double p = geiger_fire_probability(means.dark);
    const std::uint64_t gates = noise.count() * frames;
    if (static_cast<double>(gates) * p < noise_windows) {
      // The firing gates form a uniformly random subset of all noise gates.
      const std::uint64_t fired = sample_binomial(gates, p, rng);
      for (std::uint64_t gate : sample_distinct(gates, fired, rng)) {
        events.push_back(noise.window(gate / frames));
      }
    } else {
      for (std::uint64_t j = 0; j < noise.count(); ++j) {
        push_registration(events, noise.window(j), sample_binomial(frames, p, rng));
      }
    }
  }
  return aggregate(events);
}

// Geiger detector gating every window of every frame in order: after a
// registration the next floor(dead / window) windows of the same frame are blind.
std::vector<WindowCount> accumulate_sequential_geiger(const ScenarioConfig& config,
                                                      const PulsePlacement& placement,
                                                      std::uint64_t trial_index) {
  const PerFrameMeans means = per_frame_means(config, placement);
  const NoiseIndex noise(config.timing.windows_per_frame, placement);
  const auto blind = static_cast<std::uint64_t>(
      std::floor(config.detector.dead_time_ns / config.timing.window_width_ns * (1.0 + 1e-12)));
  const double p_noise = geiger_fire_probability(means.dark);
  const double p_first = geiger_fire_probability(means.first);
  const double p_second = geiger_fire_probability(means.second);
  const bool straddling = placement.kind == PulsePlacement::Kind::Straddling;
  const std::uint64_t second = placement.second_window(config.timing.windows_per_frame);

  std::vector<std::uint64_t> events;
  std::vector<std::uint64_t> candidates;
  for (std::uint64_t frame = 0; frame < config.timing.sample_size; ++frame) {
    SplitMix64 rng = make_stream(config.master_seed, trial_index, frame + 1);
    candidates.clear();
    if (std::bernoulli_distribution(p_first)(rng)) candidates.push_back(placement.window);
    if (straddling && std::bernoulli_distribution(p_second)(rng)) candidates.push_back(second);
    if (p_noise >= 1.0) {
      for (std::uint64_t j = 0; j < noise.count(); ++j) candidates.push_back(noise.window(j));
    } else if (p_noise > 0.0) {
      std::geometric_distribution<std::uint64_t> gap(p_noise);
      std::uint64_t j = gap(rng);
      while (j < noise.count()) {
        candidates.push_back(noise.window(j));
        const std::uint64_t skip = gap(rng);
        if (skip >= noise.count() - j - 1) break;
        j += 1 + skip;
      }
    }
    std::sort(candidates.begin(), candidates.end());
    std::optional<std::uint64_t> last;
    for (std::uint64_t w : candidates) {
      if (last && w - *last <= blind) continue;
      events.push_back(w);
      last = w;
    }
  }
  return aggregate(events);
}

}  // namespace

Stage1Counts simulate_stage1_counts(const ScenarioConfig& config, std::uint64_t trial_index) {
  SplitMix64 rng = make_stream(config.master_seed, trial_index, 0);
  Stage1Counts out;
  out.placement = config.placement ? *config.placement : draw_placement(config.timing, rng);

  const bool sequential_geiger =
      config.detector.mode == DetectorMode::GeigerGated && !config.schedule;
  out.nonzero = sequential_geiger ? accumulate_sequential_geiger(config, out.placement, trial_index)
                                  : accumulate_aggregate(config, out.placement, rng);
  return out;
}

TrialOutcome run_stage1_trial(const ScenarioConfig& config, std::uint64_t trial_index) {
  const Stage1Counts counts = simulate_stage1_counts(config, trial_index);
  const Decision d =
      adjudicate_sparse(counts.nonzero, config.timing.windows_per_frame, counts.placement);
  return {d.window, d.correct, d.signal_count, d.max_noise_count, d.tie};
}

// ---------------------------------------------------------------------------
// Stage 2

namespace {

struct RefineSpan {
  double start_ns = 0.0;         // absolute frame time of the span start
  double subinterval_ns = 0.0;
  std::uint32_t subintervals = 0;
  double local_pulse_start = 0.0;  // pulse start relative to span start, in [0, T_s)
};

RefineSpan refine_span(const ScenarioConfig& config, std::uint64_t coarse_window,
                       double pulse_start) {
  const Stage2Config& s2 = *config.stage2;
  const std::uint64_t nw = config.timing.windows_per_frame;
  const std::uint64_t half = s2.intervals / 2;
  const std::uint64_t first = (coarse_window % nw + nw - half % nw) % nw;
  const double period = config.timing.frame_period_ns;

  RefineSpan span;
  span.start_ns = static_cast<double>(first) * config.timing.window_width_ns;
  span.subintervals = s2.total_subintervals();
  span.subinterval_ns = config.timing.window_width_ns / s2.subintervals_per_interval;
  span.local_pulse_start = std::fmod(pulse_start - span.start_ns, period);
  if (span.local_pulse_start < 0.0) span.local_pulse_start += period;
  return span;
}

double overlap(double a0, double a1, double b0, double b1) {
  return std::max(0.0, std::min(a1, b1) - std::max(a0, b0));
}

}  // namespace

std::uint32_t run_stage2_refine(const ScenarioConfig& config, std::uint64_t coarse_window,
                                double pulse_start, SplitMix64& rng) {
  if (!config.stage2) throw ConfigError("stage 2 configuration missing");
  const RefineSpan span = refine_span(config, coarse_window, pulse_start);
  const double period = config.timing.frame_period_ns;
  const double tau_s = config.timing.pulse_width_ns;
  const double dark_per_sub = config.detector.dcp_rate_hz * span.subinterval_ns * 1e-9;
  const std::uint64_t samples = config.stage2->samples_per_subinterval;
  const bool ideal = config.detector.mode == DetectorMode::IdealCounter;

  std::uint32_t best = 0;
  std::uint64_t best_count = 0;
  for (std::uint32_t i = 0; i < span.subintervals; ++i) {
    const double b0 = i * span.subinterval_ns;
    const double b1 = b0 + span.subinterval_ns;
    // The pulse may also reach the span from the end of the previous frame.
    const double p0 = span.local_pulse_start;
    const double covered =
        overlap(b0, b1, p0, p0 + tau_s) + overlap(b0, b1, p0 - period, p0 - period + tau_s);
    const double mu = config.mean_signal_per_pulse * covered / tau_s + dark_per_sub;
    const std::uint64_t count = ideal ? sample_poisson(static_cast<double>(samples) * mu, rng)
                                      : sample_binomial(samples, geiger_fire_probability(mu), rng);
    if (count > best_count) {
      best_count = count;
      best = i;
    }
  }
  return best;
}

std::optional<std::uint32_t> stage2_true_subinterval(const ScenarioConfig& config,
                                                     std::uint64_t coarse_window,
                                                     double pulse_start) {
  if (!config.stage2) throw ConfigError("stage 2 configuration missing");
  const RefineSpan span = refine_span(config, coarse_window, pulse_start);
  double centre = span.local_pulse_start + 0.5 * config.timing.pulse_width_ns;
  if (centre >= config.timing.frame_period_ns) centre -= config.timing.frame_period_ns;
  const double index = std::floor(centre / span.subinterval_ns);
  if (index < 0.0 || index >= span.subintervals) return std::nullopt;
  return static_cast<std::uint32_t>(index);
}

// ---------------------------------------------------------------------------
// Estimation

SimulationReport estimate_detection_probability(const ScenarioConfig& config) {
  config.validate();
  const std::uint64_t trials = config.trials;

  // Per-trial results, reduced in trial order after all workers finish.
  std::vector<std::uint8_t> correct(trials, 0);
  std::vector<std::int8_t> refined(trials, -1);

  auto run_range = [&](std::uint64_t begin, std::uint64_t end) {
    for (std::uint64_t t = begin; t < end; ++t) {
      const Stage1Counts counts = simulate_stage1_counts(config, t);
      const Decision d =
          adjudicate_sparse(counts.nonzero, config.timing.windows_per_frame, counts.placement);
      correct[t] = d.correct ? 1 : 0;
      if (config.stage2 && d.correct) {
        SplitMix64 rng = make_stream(config.master_seed, t, kStage2Substream);
        const double start = pulse_start_ns(counts.placement, config.timing);
        const std::uint32_t got = run_stage2_refine(config, *d.window, start, rng);
        const auto truth = stage2_true_subinterval(config, *d.window, start);
        refined[t] = truth && std::abs(static_cast<long long>(got) - static_cast<long long>(*truth)) <= 1;
      }
    }
  };

  unsigned workers = config.threads == 0 ? std::max(1u, std::thread::hardware_concurrency())
                                         : config.threads;
  workers = static_cast<unsigned>(std::min<std::uint64_t>(workers, trials));
  if (workers <= 1) {
    run_range(0, trials);
  } else {
    std::vector<std::exception_ptr> errors(workers);
    {
      std::vector<std::jthread> pool;
      const std::uint64_t chunk = (trials + workers - 1) / workers;
      for (unsigned w = 0; w < workers; ++w) {
        const std::uint64_t begin = std::min(trials, w * chunk);
        const std::uint64_t end = std::min(trials, begin + chunk);
        pool.emplace_back([&, w, begin, end] {
          try {
            run_range(begin, end);
          } catch (...) {
            errors[w] = std::current_exception();
          }
        });
      }
    }
    for (const auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  SimulationReport report;
  report.trials = trials;
  for (std::uint8_t c : correct) report.successes += c;
  const double n = static_cast<double>(trials);
  const double p = static_cast<double>(report.successes) / n;
  report.estimated_p_d = p;
  report.standard_error = std::sqrt(p * (1.0 - p) / n);
  constexpr double kZ95 = 1.959963984540054;
  const double half_width = kZ95 * report.standard_error + 0.5 / n;
  report.ci_low = std::max(0.0, p - half_width);
  report.ci_high = std::min(1.0, p + half_width);
  report.ci_method = "normal-95+continuity";
  report.degenerate_ci = trials < kMinTrialsForInterval;

  if (config.stage2) {
    Stage2Summary s2;
    for (std::int8_t r : refined) {
      if (r < 0) continue;
      ++s2.attempted;
      s2.within_one += static_cast<std::uint64_t>(r);
    }
    report.stage2 = s2;
  }

  if (config.detector.mode == DetectorMode::IdealCounter && config.placement &&
      config.placement->kind == PulsePlacement::Kind::Contained) {
    try {
      const auto stats = CountStatistics::from_parameters(
          config.timing.windows_per_frame, config.timing.sample_size, config.detector.dcp_rate_hz,
          config.timing.window_width_ns, config.mean_signal_per_pulse);
      report.analytic_p_d = detection_prob_exact(stats).probability;
    } catch (const PrecisionError&) {
      report.analytic_p_d.reset();
    }
  }

  const std::uint64_t cycles = config.schedule ? config.schedule->cycles : 1;
  report.simulated_elapsed_model_time_ms =
      total_sync_time_ms(config.timing.sample_size, config.timing.frame_period_ns * 1e-6, cycles);
  return report;
}

}  // namespace qkdsync
