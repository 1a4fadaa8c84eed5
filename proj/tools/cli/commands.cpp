#include "cli/commands.hpp"

#include <fmt/format.h>

#include <cmath>
#include <fstream>
#include <limits>

#include "qkdsync/detection_stats.hpp"
#include "qkdsync/errors.hpp"
#include "qkdsync/link_timing.hpp"
#include "qkdsync/spad_model.hpp"
#include "qkdsync/sync_simulator.hpp"

namespace qkdsync::cli {

// ---------------------------------------------------------------------------
// Parameter tables

std::vector<ParamSpec> plan_params() {
  return {
      {"length_km", "100", "fiber link length, km"},
      {"refractive_index", "1.4670", "fiber core refractive index"},
      {"pulse_width_ns", "1", "optical pulse duration tau_s, ns"},
      {"window_multiplier", "2", "window width as a multiple of the pulse width"},
      {"window_width_ns", "", "explicit window width tau_w, ns (overrides the multiplier)"},
      {"enforce_criterion", "true", "require 2 <= tau_w / tau_s <= 4"},
      {"frame_period_us", "",
       "design frame period, us (default: minimum period rounded up to one significant digit)"},
      {"round_pow2", "true", "round the window count up to a power of two"},
      {"light_speed", "engineering", "engineering (300000 km/s) or physical"},
      {"sample_size", "256", "frames accumulated per decision, N"},
      {"cycles", "1", "dead-time cycles N_c"},
      {"source_mean", "0.1", "mean photons per pulse at the source"},
      {"loss_db", "20", "link loss, dB"},
  };
}

std::vector<ParamSpec> prob_params() {
  return {
      {"windows_per_frame", "524288", "windows per frame N_w"},
      {"sample_size", "256", "frames accumulated per decision, N"},
      {"dcp_rate_hz", "5", "dark-count rate, Hz"},
      {"window_width_ns", "2", "window width, ns"},
      {"signal_mean", "0.001", "mean photoelectrons per pulse"},
      {"mean_dark_counts", "", "precomputed dark-count mean (needs mean_window_counts)"},
      {"mean_window_counts", "", "precomputed signal-window mean (needs mean_dark_counts)"},
      {"tail_epsilon", "1e-10", "series truncation bound"},
      {"max_terms", "100000", "series term limit"},
  };
}

std::vector<ParamSpec> simulate_params() {
  return {
      {"windows_per_frame", "4096", "windows per frame N_w"},
      {"sample_size", "256", "frames accumulated per decision, N"},
      {"window_width_ns", "2", "window width, ns"},
      {"pulse_width_ns", "1", "pulse width, ns"},
      {"enforce_criterion", "true", "require 2 <= tau_w / tau_s <= 4"},
      {"dcp_rate_hz", "5", "dark-count rate, Hz"},
      {"mean_dark_counts", "", "dark-count mean per window over the sample (overrides dcp_rate_hz)"},
      {"signal_mean", "0.001", "mean photoelectrons per pulse"},
      {"signal_total", "", "signal mean over the sample, N * n_s (overrides signal_mean)"},
      {"mode", "ideal", "detector model: ideal or geiger"},
      {"dead_time_ns", "45", "detector dead time, ns"},
      {"scan", "sequential", "sequential, scheduled or both"},
      {"placement", "contained", "contained, straddling or random"},
      {"signal_window", "0", "pulse window (first window when straddling)"},
      {"fraction_in_first", "0.5", "share of the pulse in the first window when straddling"},
      {"trials", "10000", "Monte Carlo trials"},
      {"threads", "1", "worker threads, 0 = all cores"},
      {"stage2", "false", "run subinterval refinement after a correct stage 1"},
      {"stage2_intervals", "3", "windows in the refinement span"},
      {"stage2_subintervals", "17", "subintervals per window"},
      {"stage2_samples", "800", "samples per subinterval"},
  };
}

std::vector<ParamSpec> schedule_params() {
  return {
      {"windows_per_frame", "524288", "windows per frame N_w (power of two)"},
      {"window_width_ns", "2", "window width, ns"},
      {"dead_time_ns", "45", "detector dead time, ns"},
      {"preview_cycles", "3", "cycles listed in the summary"},
      {"preview_windows", "5", "indices listed per cycle"},
      {"dump_csv", "", "write the full visit order as CSV to this path"},
  };
}

std::vector<ParamSpec> sweep_params() {
  auto specs = prob_params();
  specs.insert(specs.begin(),
               {{"axis", "", "sample_size|N, dcp_rate_hz|xi_d, signal_mean|n_s, "
                             "windows_per_frame|N_w or loss_db"},
                {"from", "", "first axis value"},
                {"to", "", "last axis value"},
                {"steps", "2", "number of points, >= 2"}});
  specs.push_back({"source_mean", "0.1", "source photons per pulse (loss_db axis)"});
  specs.push_back({"mc", "false", "add a Monte Carlo estimate per point"});
  specs.push_back({"trials", "10000", "Monte Carlo trials per point"});
  specs.push_back({"threads", "1", "worker threads, 0 = all cores"});
  return specs;
}

namespace {

Value probability_or_empty(const std::optional<double>& p) { return p ? percent(*p) : empty(); }

double relative_gap(double exact, double approx) {
  if (exact == 0.0) return approx == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return std::abs(exact - approx) / exact;
}

Value gap_value(double gap) {
  if (!std::isfinite(gap)) return {"n/a", nullptr};
  return scientific(gap, 3);
}

SeriesControl series_control(const ParamSet& params) {
  SeriesControl control;
  control.tail_epsilon = params.real("tail_epsilon");
  control.max_terms = params.count("max_terms");
  if (control.max_terms < 1) throw ConfigError("max_terms must be positive");
  return control;
}

// 978 -> 1000, 1234 -> 2000, 0.0123 -> 0.02.
double round_up_leading_digit(double x) {
  const double unit = std::pow(10.0, std::floor(std::log10(x)));
  return std::ceil(x / unit * (1.0 - 1e-12)) * unit;
}

std::string scan_name(bool scheduled) { return scheduled ? "scheduled" : "sequential"; }

}  // namespace

// ---------------------------------------------------------------------------
// plan

Report cmd_plan(const ParamSet& params) {
  FiberLink link;
  link.length_km = params.real("length_km");
  link.refractive_index = params.real("refractive_index");
  link.loss_db = params.real("loss_db");
  link.validate();

  const std::string light = params.text("light_speed");
  if (light != "engineering" && light != "physical") {
    throw ConfigError("light_speed must be engineering or physical");
  }
  const double speed = propagation_speed(
      link.refractive_index, light == "physical" ? LightSpeed::Physical : LightSpeed::Engineering);
  const double min_period = min_frame_period_us(link, speed);

  const double pulse = params.real("pulse_width_ns");
  const double window = params.has("window_width_ns")
                            ? params.real("window_width_ns")
                            : params.real("window_multiplier") * pulse;
  const bool enforce = params.flag("enforce_criterion");
  if (enforce && !satisfies_window_criterion(pulse, window)) {
    throw CriterionError(fmt::format(
        "window width {} ns is {} x pulse width; the window must span 2..4 pulse widths", window,
        window / pulse));
  }

  const double design_period =
      params.has("frame_period_us") ? params.real("frame_period_us") : round_up_leading_digit(min_period);
  if (!(design_period >= min_period)) {
    throw ConfigError(fmt::format("frame period {} us is shorter than the round trip {:.1f} us",
                                  design_period, min_period));
  }
  const FramePlan frame = plan_frame(design_period, window, params.flag("round_pow2"));
  const std::uint64_t sample_size = params.count("sample_size");
  const TimingPlan timing =
      TimingPlan::make(pulse, window, frame.windows_per_frame, sample_size, enforce);
  const double signal = mean_signal_level(params.real("source_mean"), link.loss_db);
  const std::uint64_t cycles = params.count("cycles");
  const double total = total_sync_time_ms(sample_size, timing.frame_period_ns * 1e-6, cycles);

  Report r;
  r.command = "plan";
  r.add("v_fiber_km_s", number(speed, 0));
  r.add("t_s_min_us", number(min_period, 1));
  r.add("f_s_max_hz", number(1e6 / min_period, 1));
  r.add("t_s_design_us", number(design_period, 1));
  r.add("tau_s_ns", number(pulse, 3));
  r.add("tau_w_ns", number(window, 3));
  r.add("n_w_raw", integer(frame.raw_windows));
  r.add("n_w", integer(timing.windows_per_frame));
  r.add("t_s_ns", number(timing.frame_period_ns, 0));
  r.add("f_s_hz", number(timing.pulse_rate_hz, 2));
  r.add("frame_growth_pct", number((frame.growth_ratio - 1.0) * 100.0, 2));
  r.add("margin_over_min_pct", number((timing.frame_period_ns / (min_period * 1e3) - 1.0) * 100.0, 2));
  r.add("n_s", scientific(signal, 4));
  r.add("sample_size", integer(sample_size));
  r.add("cycles", integer(cycles));
  r.add("total_time_ms", number(total, 3));
  return r;
}

// ---------------------------------------------------------------------------
// prob

Report cmd_prob(const ParamSet& params) {
  const std::uint64_t windows = params.count("windows_per_frame");
  CountStatistics stats;
  if (params.has("mean_dark_counts") || params.has("mean_window_counts")) {
    if (!params.has("mean_dark_counts") || !params.has("mean_window_counts")) {
      throw ConfigError("mean_dark_counts and mean_window_counts must be given together");
    }
    stats = CountStatistics::from_means(windows, params.real("mean_dark_counts"),
                                        params.real("mean_window_counts"));
  } else {
    stats = CountStatistics::from_parameters(windows, params.count("sample_size"),
                                             params.real("dcp_rate_hz"),
                                             params.real("window_width_ns"),
                                             params.real("signal_mean"));
  }

  const ExactResult exact = detection_prob_exact(stats, series_control(params));
  const ApproxResult approx = detection_prob_approx(stats);

  Report r;
  r.command = "prob";
  r.add("windows_per_frame", integer(stats.windows_per_frame));
  r.add("n_d", scientific(stats.mean_dark_counts, 4));
  r.add("n_w", scientific(stats.mean_signal_window_counts, 6));
  r.add("p_exact", percent(exact.probability));
  r.add("p_approx", percent(approx.probability));
  r.add("rel_gap", gap_value(relative_gap(exact.probability, approx.probability)));
  r.add("series_terms", integer(exact.terms));
  r.add("tail_bound", scientific(exact.tail_bound, 3));
  r.add("approx_regime", text(approx.outside_regime ? "outside" : "ok"));
  if (approx.outside_regime) {
    r.notes.push_back(fmt::format(
        "closed form evaluated at n_w = {:.4g} >= {}; it is intended for n_w << 1",
        stats.mean_signal_window_counts, kApproxRegimeLimit));
  }
  return r;
}

// ---------------------------------------------------------------------------
// simulate

namespace {

DetectorMode parse_mode(const std::string& mode) {
  if (mode == "ideal") return DetectorMode::IdealCounter;
  if (mode == "geiger") return DetectorMode::GeigerGated;
  throw ConfigError("mode must be ideal or geiger, got '" + mode + "'");
}

std::optional<PulsePlacement> parse_placement(const ParamSet& params) {
  const std::string kind = params.text("placement");
  if (kind == "contained") return PulsePlacement::contained(params.count("signal_window"));
  if (kind == "straddling") {
    return PulsePlacement::straddling(params.count("signal_window"),
                                      params.real("fraction_in_first"));
  }
  if (kind == "random") return std::nullopt;
  throw ConfigError("placement must be contained, straddling or random, got '" + kind + "'");
}

}  // namespace

Report cmd_simulate(const ParamSet& params, std::uint64_t seed) {
  const std::uint64_t sample_size = params.count("sample_size");
  const double window = params.real("window_width_ns");
  const TimingPlan timing =
      TimingPlan::make(params.real("pulse_width_ns"), window, params.count("windows_per_frame"),
                       sample_size, params.flag("enforce_criterion"));

  ScenarioConfig config;
  config.timing = timing;
  config.detector.mode = parse_mode(params.text("mode"));
  config.detector.dead_time_ns = params.real("dead_time_ns");
  config.detector.dcp_rate_hz =
      params.has("mean_dark_counts")
          ? params.real("mean_dark_counts") / (static_cast<double>(sample_size) * window * 1e-9)
          : params.real("dcp_rate_hz");
  config.mean_signal_per_pulse = params.has("signal_total")
                                     ? params.real("signal_total") / static_cast<double>(sample_size)
                                     : params.real("signal_mean");
  config.placement = parse_placement(params);
  config.trials = params.count("trials");
  config.threads = static_cast<unsigned>(params.count("threads"));
  config.master_seed = seed;
  if (params.flag("stage2")) {
    Stage2Config s2;
    s2.intervals = static_cast<std::uint32_t>(params.count("stage2_intervals"));
    s2.subintervals_per_interval = static_cast<std::uint32_t>(params.count("stage2_subintervals"));
    s2.samples_per_subinterval = static_cast<std::uint32_t>(params.count("stage2_samples"));
    config.stage2 = s2;
  }

  const std::string scan = params.text("scan");
  std::vector<bool> scans;
  if (scan == "sequential") {
    scans = {false};
  } else if (scan == "scheduled") {
    scans = {true};
  } else if (scan == "both") {
    scans = {true, false};
  } else {
    throw ConfigError("scan must be sequential, scheduled or both, got '" + scan + "'");
  }

  Report r;
  r.command = "simulate";
  r.add("windows_per_frame", integer(timing.windows_per_frame));
  r.add("sample_size", integer(sample_size));
  r.add("n_d", scientific(static_cast<double>(sample_size) * config.detector.dcp_rate_hz * window *
                              1e-9,
                          4));
  r.add("n_s", scientific(config.mean_signal_per_pulse, 4));
  r.add("seed", integer(seed));
  r.columns = {"scan",      "mode",        "placement", "trials",        "successes",
               "p_mc",      "ci_low",      "ci_high",   "std_error",     "p_analytic",
               "model_time_ms", "ci_method", "stage2_within_one"};

  for (bool scheduled : scans) {
    ScenarioConfig run = config;
    if (scheduled) {
      run.schedule =
          build_cycle_schedule(timing.windows_per_frame, window, config.detector.dead_time_ns);
    }
    const SimulationReport rep = estimate_detection_probability(run);
    r.rows.push_back({
        text(scan_name(scheduled)),
        text(params.text("mode")),
        text(params.text("placement")),
        integer(rep.trials),
        integer(rep.successes),
        percent(rep.estimated_p_d),
        percent(rep.ci_low),
        percent(rep.ci_high),
        scientific(rep.standard_error, 3),
        probability_or_empty(rep.analytic_p_d),
        number(rep.simulated_elapsed_model_time_ms, 3),
        text(rep.ci_method),
        rep.stage2 ? percent(rep.stage2->fraction_within_one()) : empty(),
    });
    if (rep.degenerate_ci) {
      r.notes.push_back(fmt::format(
          "{} scan: {} trial(s) is below {}; the confidence interval is degenerate",
          scan_name(scheduled), rep.trials, kMinTrialsForInterval));
    }
  }
  if (config.detector.mode != DetectorMode::IdealCounter || !config.placement ||
      config.placement->kind != PulsePlacement::Kind::Contained) {
    r.notes.push_back("analytic value is only attached for an ideal counter with a contained pulse");
  }
  return r;
}

// ---------------------------------------------------------------------------
// schedule

Report cmd_schedule(const ParamSet& params) {
  const CycleSchedule schedule = build_cycle_schedule(
      params.count("windows_per_frame"), params.real("window_width_ns"), params.real("dead_time_ns"));

  Report r;
  r.command = "schedule";
  r.add("tau_m_ns", number(schedule.module_width_ns, 3));
  r.add("n_c", integer(schedule.cycles));
  r.add("stride", integer(schedule.stride_windows));
  r.add("windows_per_cycle", integer(schedule.windows_per_cycle));

  const std::uint64_t preview_cycles = std::min(schedule.cycles, params.count("preview_cycles"));
  const std::uint64_t preview_windows =
      std::min(schedule.windows_per_cycle, params.count("preview_windows"));
  for (std::uint64_t c = 0; c < preview_cycles; ++c) {
    std::string display;
    nlohmann::ordered_json raw = nlohmann::ordered_json::array();
    for (std::uint64_t i = 0; i < preview_windows; ++i) {
      const std::uint64_t w = schedule.window_at(c, i);
      display += (i ? " " : "") + std::to_string(w);
      raw.push_back(w);
    }
    if (preview_windows < schedule.windows_per_cycle) display += " ...";
    r.add(fmt::format("cycle_{}", c + 1), {display, raw});
  }
  r.notes.push_back("window indices are zero-based");

  if (params.has("dump_csv")) {
    const std::string path = params.text("dump_csv");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write '" + path + "'");
    out << "cycle,position,window\n";
    for (std::uint64_t c = 0; c < schedule.cycles; ++c) {
      for (std::uint64_t i = 0; i < schedule.windows_per_cycle; ++i) {
        out << c + 1 << ',' << i << ',' << schedule.window_at(c, i) << '\n';
      }
    }
    r.add("dump_csv", text(path));
  }
  return r;
}

// ---------------------------------------------------------------------------
// sweep

namespace {

std::string canonical_axis(const std::string& axis) {
  if (axis == "N" || axis == "sample_size") return "sample_size";
  if (axis == "xi_d" || axis == "dcp_rate_hz") return "dcp_rate_hz";
  if (axis == "n_s" || axis == "signal_mean") return "signal_mean";
  if (axis == "N_w" || axis == "windows_per_frame") return "windows_per_frame";
  if (axis == "loss_db") return "loss_db";
  throw ConfigError("unknown sweep axis '" + axis +
                    "'; use sample_size, dcp_rate_hz, signal_mean, windows_per_frame or loss_db");
}

}  // namespace

Report cmd_sweep(const ParamSet& params, std::uint64_t seed) {
  if (!params.has("axis")) throw ConfigError("sweep needs --axis");
  const std::string axis = canonical_axis(params.text("axis"));
  const double from = params.real("from");
  const double to = params.real("to");
  const std::uint64_t steps = params.count("steps");
  if (steps < 2) throw ConfigError("steps must be >= 2");
  const bool integral = axis == "sample_size" || axis == "windows_per_frame";
  const bool with_mc = params.flag("mc");
  const SeriesControl control = series_control(params);

  Report r;
  r.command = "sweep";
  r.columns = {"parameter", "value",  "p_exact",   "p_approx",
               "rel_gap",   "p_mc",   "mc_ci_low", "mc_ci_high"};

  for (std::uint64_t i = 0; i < steps; ++i) {
    double value = from + (to - from) * static_cast<double>(i) / static_cast<double>(steps - 1);
    if (integral) value = std::round(value);

    std::uint64_t windows = params.count("windows_per_frame");
    std::uint64_t sample_size = params.count("sample_size");
    double dcp = params.real("dcp_rate_hz");
    double signal = params.real("signal_mean");
    const double window = params.real("window_width_ns");
    if (axis == "sample_size") sample_size = static_cast<std::uint64_t>(value);
    if (axis == "windows_per_frame") windows = static_cast<std::uint64_t>(value);
    if (axis == "dcp_rate_hz") dcp = value;
    if (axis == "signal_mean") signal = value;
    if (axis == "loss_db") signal = mean_signal_level(params.real("source_mean"), value);

    const auto stats = CountStatistics::from_parameters(windows, sample_size, dcp, window, signal);
    const ExactResult exact = detection_prob_exact(stats, control);
    const ApproxResult approx = detection_prob_approx(stats);

    std::vector<Value> row{
        text(axis),
        integral ? integer(static_cast<std::uint64_t>(value)) : scientific(value, 6),
        percent(exact.probability),
        percent(approx.probability),
        gap_value(relative_gap(exact.probability, approx.probability)),
    };
    if (with_mc) {
      ScenarioConfig config;
      // Monte Carlo needs only the window grid; pulse width is not used for a contained pulse.
      config.timing = TimingPlan::make(window / 2.0, window, windows, sample_size, false);
      config.detector.dcp_rate_hz = dcp;
      config.placement = PulsePlacement::contained(0);
      config.mean_signal_per_pulse = signal;
      config.trials = params.count("trials");
      config.threads = static_cast<unsigned>(params.count("threads"));
      config.master_seed = seed;
      const SimulationReport rep = estimate_detection_probability(config);
      row.push_back(percent(rep.estimated_p_d));
      row.push_back(percent(rep.ci_low));
      row.push_back(percent(rep.ci_high));
    } else {
      row.push_back(empty());
      row.push_back(empty());
      row.push_back(empty());
    }
    r.rows.push_back(std::move(row));
  }
  return r;
}

}  // namespace qkdsync::cli
