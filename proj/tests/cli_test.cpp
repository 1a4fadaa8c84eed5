#include "cli/app.hpp"

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

using qkdsync::cli::run_cli;

namespace {

struct CliRun {
  int code = -1;
  std::string out;
  std::string err;
};

CliRun run(std::vector<std::string> args) {
  std::ostringstream out;
  std::ostringstream err;
  CliRun r;
  r.code = run_cli(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

nlohmann::json run_json(std::vector<std::string> args) {
  args.insert(args.begin(), {"--format", "json"});
  const CliRun r = run(args);
  EXPECT_EQ(r.code, 0) << r.err;
  return nlohmann::json::parse(r.out);
}

std::string temp_path(const std::string& name) { return std::string(QKDSYNC_TEST_TMPDIR) + "/" + name; }

void write_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  f << text;
}

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

class ScopedEnv {
 public:
  ScopedEnv(const char* name, const char* value) : name_(name) { ::setenv(name, value, 1); }
  ~ScopedEnv() { ::unsetenv(name_); }

 private:
  const char* name_;
};

}  // namespace

TEST(CliPlan, DefaultLink) {
  const auto j = run_json({"plan"});
  const auto& v = j["values"];
  EXPECT_EQ(j["schema_version"], 1);
  EXPECT_NEAR(v["t_s_min_us"].get<double>(), 978.0, 9.78);
  EXPECT_EQ(v["n_w"], 524288);
  EXPECT_EQ(v["t_s_ns"].get<double>(), 1048576.0);
  EXPECT_GE(v["f_s_hz"].get<double>(), 953.0);
  EXPECT_LE(v["f_s_hz"].get<double>(), 955.0);
  EXPECT_LE(v["frame_growth_pct"].get<double>(), 5.0);
  EXPECT_NEAR(v["n_s"].get<double>(), 0.001, 1e-12);
  EXPECT_NEAR(v["total_time_ms"].get<double>(), 268.8, 0.005 * 268.8);
}

TEST(CliPlan, ExplicitDesignPeriodAndCycles) {
  const auto j = run_json({"plan", "--frame_period_us", "978", "--cycles", "32"});
  EXPECT_EQ(j["values"]["n_w"], 524288);
  EXPECT_GT(j["values"]["frame_growth_pct"].get<double>(), 5.0);
  EXPECT_NEAR(j["values"]["total_time_ms"].get<double>(), 32 * 268.435456, 1e-6);
}

TEST(CliPlan, WindowOutsideCriterionIsAUsageError) {
  const CliRun r = run({"plan", "--window_multiplier", "5"});
  EXPECT_EQ(r.code, qkdsync::cli::kExitUsage);
  EXPECT_NE(r.err.find("2..4"), std::string::npos);
  EXPECT_EQ(run({"plan", "--window_multiplier", "5", "--enforce_criterion", "false"}).code, 0);
  EXPECT_EQ(run({"plan", "--frame_period_us", "900"}).code, qkdsync::cli::kExitUsage);
}

TEST(CliProb, ReferenceValues) {
  const CliRun table = run({"prob"});
  ASSERT_EQ(table.code, 0) << table.err;
  EXPECT_NE(table.out.find("7.95%"), std::string::npos);

  const auto j = run_json({"prob", "--sample_size", "1024", "--dcp_rate_hz", "25",
                           "--signal_mean", "0.01"});
  EXPECT_NEAR(j["values"]["p_approx"].get<double>(), 0.9989, 0.0005);
  EXPECT_EQ(j["display"]["p_approx"], "99.89%");
  EXPECT_EQ(j["values"]["approx_regime"], "outside");
  EXPECT_FALSE(j["notes"].empty());
}

TEST(CliProb, ZeroSignalGivesZero) {
  const auto j = run_json({"prob", "--signal_mean", "0", "--dcp_rate_hz", "0"});
  EXPECT_EQ(j["values"]["p_exact"].get<double>(), 0.0);
}

TEST(CliProb, PrecomputedMeans) {
  const auto j = run_json({"prob", "--windows_per_frame", "4", "--mean_dark_counts", "0.1",
                           "--mean_window_counts", "0.5"});
  EXPECT_GT(j["values"]["p_exact"].get<double>(), 0.0);
  EXPECT_EQ(run({"prob", "--mean_dark_counts", "0.1"}).code, qkdsync::cli::kExitUsage);
}

TEST(CliProb, TermLimitIsAPrecisionFailure) {
  const CliRun r = run({"prob", "--max_terms", "1", "--signal_mean", "0.05"});
  EXPECT_EQ(r.code, qkdsync::cli::kExitPrecision);
  EXPECT_NE(r.err.find("partial sum"), std::string::npos);
}

TEST(CliProb, CommaDecimalInput) {
  const auto dot = run_json({"prob", "--signal_mean", "0.001"});
  const auto comma = run_json({"prob", "--signal_mean", "0,001"});
  EXPECT_EQ(dot["values"], comma["values"]);
}

TEST(CliErrors, ExitCodes) {
  EXPECT_EQ(run({}).code, qkdsync::cli::kExitUsage);
  EXPECT_EQ(run({"bogus"}).code, qkdsync::cli::kExitUsage);
  EXPECT_EQ(run({"--help"}).code, qkdsync::cli::kExitOk);
  const CliRun unknown = run({"prob", "--nope", "1"});
  EXPECT_EQ(unknown.code, qkdsync::cli::kExitUsage);
  EXPECT_NE(unknown.err.find("windows_per_frame"), std::string::npos);
  EXPECT_EQ(run({"prob", "--sample_size", "abc"}).code, qkdsync::cli::kExitUsage);
  EXPECT_EQ(run({"prob", "--sample_size", "-4"}).code, qkdsync::cli::kExitUsage);
  EXPECT_EQ(run({"--format", "xml", "prob"}).code, qkdsync::cli::kExitUsage);
}

TEST(CliFormats, TableValuesAppearIdenticallyInJson) {
  const std::vector<std::vector<std::string>> commands{
      {"plan"},
      {"prob"},
      {"schedule"},
      {"simulate", "--trials", "500", "--windows_per_frame", "256", "--scan", "both",
       "--mode", "geiger"},
      {"sweep", "--axis", "n_s", "--from", "0", "--to", "0.01", "--steps", "3", "--mc", "true",
       "--trials", "300", "--windows_per_frame", "256"},
  };
  for (const auto& cmd : commands) {
    const CliRun table = run(cmd);
    ASSERT_EQ(table.code, 0) << table.err;
    const auto j = run_json(cmd);
    for (const auto& [key, shown] : j["display"].items()) {
      EXPECT_NE(table.out.find(shown.get<std::string>()), std::string::npos) << key;
    }
    for (const auto& row : j.value("rows_display", nlohmann::json::array())) {
      for (const auto& cell : row) {
        EXPECT_NE(table.out.find(cell.get<std::string>()), std::string::npos) << cell;
      }
    }
  }
}

TEST(CliFormats, CsvUsesLfAndFixedSweepHeader) {
  const CliRun r = run({"--format", "csv", "sweep", "--axis", "N", "--from", "256", "--to", "1024"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out.find('\r'), std::string::npos);
  EXPECT_EQ(r.out.substr(0, r.out.find('\n')),
            "parameter,value,p_exact,p_approx,rel_gap,p_mc,mc_ci_low,mc_ci_high");
}

TEST(CliFormats, OutputFile) {
  const std::string path = temp_path("prob.json");
  ASSERT_EQ(run({"--format", "json", "-o", path, "prob"}).code, 0);
  const auto j = nlohmann::json::parse(read_file(path));
  EXPECT_EQ(j["command"], "prob");
}

TEST(CliSweep, SampleSizeAxisReproducesBothReferencePoints) {
  const auto j = run_json({"sweep", "--axis", "N", "--from", "256", "--to", "1024"});
  ASSERT_EQ(j["rows"].size(), 2u);
  EXPECT_EQ(j["rows_display"][0]["p_approx"], "7.95%");
  EXPECT_NEAR(j["rows"][1]["p_approx"].get<double>(), 0.275, 0.002);
}

TEST(CliSweep, IdenticalEndpoints) {
  const auto j = run_json({"sweep", "--axis", "xi_d", "--from", "5", "--to", "5"});
  ASSERT_EQ(j["rows"].size(), 2u);
  EXPECT_EQ(j["rows"][0], j["rows"][1]);
}

TEST(CliSweep, ExactNondecreasingInSignal) {
  const auto j =
      run_json({"sweep", "--axis", "n_s", "--from", "0", "--to", "0.01", "--steps", "11"});
  ASSERT_EQ(j["rows"].size(), 11u);
  double previous = -1.0;
  for (const auto& row : j["rows"]) {
    const double p = row["p_exact"].get<double>();
    EXPECT_GE(p, previous);
    previous = p;
  }
}

TEST(CliSweep, OtherAxes) {
  EXPECT_EQ(run_json({"sweep", "--axis", "N_w", "--from", "1024", "--to", "4096", "--steps", "3"})
                ["rows"].size(),
            3u);
  const auto loss = run_json({"sweep", "--axis", "loss_db", "--from", "10", "--to", "30"});
  EXPECT_GT(loss["rows"][0]["p_exact"].get<double>(), loss["rows"][1]["p_exact"].get<double>());
  EXPECT_EQ(run({"sweep", "--axis", "colour", "--from", "1", "--to", "2"}).code,
            qkdsync::cli::kExitUsage);
  EXPECT_EQ(run({"sweep", "--axis", "N", "--from", "1", "--to", "2", "--steps", "1"}).code,
            qkdsync::cli::kExitUsage);
}

TEST(CliSimulate, OracleScenarioWithinThreeStandardErrors) {
  const auto j = run_json({"simulate", "--windows_per_frame", "1024", "--mean_dark_counts", "1e-4",
                           "--signal_total", "0.25", "--trials", "20000", "--seed", "5"});
  const auto& row = j["rows"][0];
  const double p = row["p_mc"].get<double>();
  const double exact = row["p_analytic"].get<double>();
  EXPECT_LE(std::abs(p - exact), 3.0 * std::sqrt(exact * (1 - exact) / 20000.0));
}

TEST(CliSimulate, ScheduledAndNaiveRows) {
  const auto j = run_json({"simulate", "--mode", "geiger", "--scan", "both", "--placement",
                           "random", "--windows_per_frame", "64", "--mean_dark_counts", "5",
                           "--signal_total", "5", "--trials", "4000"});
  ASSERT_EQ(j["rows"].size(), 2u);
  const auto& sched = j["rows"][0];
  const auto& naive = j["rows"][1];
  EXPECT_EQ(sched["scan"], "scheduled");
  EXPECT_EQ(naive["scan"], "sequential");
  const double se = std::hypot(sched["std_error"].get<double>(), naive["std_error"].get<double>());
  EXPECT_LE(naive["p_mc"].get<double>(), sched["p_mc"].get<double>() + 3.0 * se);
  // No closed form covers a gated detector.
  EXPECT_TRUE(sched["p_analytic"].is_null());
}

TEST(CliSimulate, SingleTrialNotesDegenerateInterval) {
  const auto j = run_json({"simulate", "--trials", "1"});
  bool noted = false;
  for (const auto& n : j["notes"]) noted = noted || n.get<std::string>().find("degenerate") != std::string::npos;
  EXPECT_TRUE(noted);
}

TEST(CliSimulate, CsvIsByteIdenticalAcrossRunsAndThreads) {
  const std::vector<std::string> base{"--format", "csv",      "--seed", "99", "simulate",
                                      "--placement", "random", "--trials", "3000",
                                      "--windows_per_frame", "512", "--signal_total", "1",
                                      "--stage2", "true"};
  const CliRun a = run(base);
  const CliRun b = run(base);
  auto threaded = base;
  threaded.insert(threaded.end(), {"--threads", "4"});
  const CliRun c = run(threaded);
  ASSERT_EQ(a.code, 0) << a.err;
  EXPECT_EQ(a.out, b.out);
  EXPECT_EQ(a.out, c.out);
}

TEST(CliSimulate, InvalidScenarioIsAUsageError) {
  EXPECT_EQ(run({"simulate", "--mode", "photomultiplier"}).code, qkdsync::cli::kExitUsage);
  EXPECT_EQ(run({"simulate", "--scan", "diagonal"}).code, qkdsync::cli::kExitUsage);
  EXPECT_EQ(run({"simulate", "--trials", "0"}).code, qkdsync::cli::kExitUsage);
  EXPECT_EQ(run({"simulate", "--mode", "geiger", "--dead_time_ns", "0"}).code,
            qkdsync::cli::kExitUsage);
}

TEST(CliSeed, FlagOverridesEnvironment) {
  const std::vector<std::string> cmd{"--format", "csv", "simulate", "--trials", "400",
                                     "--windows_per_frame", "64", "--mean_dark_counts", "0.5",
                                     "--signal_total", "0.8"};
  const auto with_seed = [&](std::vector<std::string> extra) {
    auto args = cmd;
    args.insert(args.begin(), extra.begin(), extra.end());
    return run(args).out;
  };
  const std::string seed7 = with_seed({"--seed", "7"});
  const std::string seed8 = with_seed({"--seed", "8"});
  EXPECT_NE(seed7, seed8);
  {
    ScopedEnv env("QKD_SYNC_SEED", "7");
    EXPECT_EQ(with_seed({}), seed7);
    EXPECT_EQ(with_seed({"--seed", "8"}), seed8);
  }
  {
    ScopedEnv env("QKD_SYNC_SEED", "seven");
    EXPECT_EQ(run(cmd).code, qkdsync::cli::kExitUsage);
  }
}

TEST(CliConfig, FileValuesWithFlagOverride) {
  const std::string path = temp_path("prob.conf");
  write_file(path, "# base point\nsample_size = 1024\nsignal_mean = 0,01\n"
                   "dcp_rate_hz = 25\nformat = json\n");
  const CliRun from_file = run({"--config", path, "prob"});
  ASSERT_EQ(from_file.code, 0) << from_file.err;
  const auto j = nlohmann::json::parse(from_file.out);
  EXPECT_EQ(j["display"]["p_approx"], "99.89%");

  const CliRun overridden = run({"--config", path, "prob", "--sample_size", "256",
                              "--signal_mean", "0.001", "--dcp_rate_hz", "5"});
  ASSERT_EQ(overridden.code, 0) << overridden.err;
  EXPECT_EQ(nlohmann::json::parse(overridden.out)["display"]["p_approx"], "7.95%");
}

TEST(CliConfig, UnknownKeyListsValidKeys) {
  const std::string path = temp_path("bad.conf");
  write_file(path, "sample_size = 256\nwavelength_nm = 1550\n");
  const CliRun r = run({"--config", path, "prob"});
  EXPECT_EQ(r.code, qkdsync::cli::kExitUsage);
  EXPECT_NE(r.err.find("wavelength_nm"), std::string::npos);
  EXPECT_NE(r.err.find("dcp_rate_hz"), std::string::npos);
}

TEST(CliConfig, SeedPrecedence) {
  const std::string path = temp_path("seed.conf");
  write_file(path, "seed = 7\ntrials = 400\nwindows_per_frame = 64\nmean_dark_counts = 0.5\n"
                   "signal_total = 0.8\n");
  const std::vector<std::string> cmd{"--format", "csv", "--config", path, "simulate"};
  const std::string from_file = run(cmd).out;
  auto flagged = cmd;
  flagged.insert(flagged.begin(), {"--seed", "7"});
  EXPECT_EQ(run(flagged).out, from_file);
  ScopedEnv env("QKD_SYNC_SEED", "8");
  EXPECT_EQ(run(cmd).out, from_file);  // file beats environment
}

TEST(CliConfig, MissingFileIsAUsageError) {
  EXPECT_EQ(run({"--config", temp_path("absent.conf"), "prob"}).code, qkdsync::cli::kExitUsage);
}

TEST(CliSchedule, Listings) {
  const auto reference = run_json({"schedule"});
  EXPECT_EQ(reference["values"]["tau_m_ns"].get<double>(), 64.0);
  EXPECT_EQ(reference["values"]["n_c"], 32);
  EXPECT_EQ(reference["values"]["windows_per_cycle"], 16384);
  EXPECT_EQ(reference["values"]["cycle_1"], nlohmann::json({0, 32, 64, 96, 128}));
  EXPECT_EQ(reference["values"]["cycle_2"][0], 1);
  EXPECT_EQ(reference["values"]["cycle_3"][1], 34);

  EXPECT_EQ(run_json({"schedule", "--windows_per_frame", "64", "--dead_time_ns", "0"})
                ["values"]["n_c"],
            1);
  EXPECT_EQ(run_json({"schedule", "--windows_per_frame", "64", "--dead_time_ns", "3"})
                ["values"]["n_c"],
            2);
  EXPECT_EQ(run({"schedule", "--windows_per_frame", "16"}).code, qkdsync::cli::kExitUsage);
  EXPECT_EQ(run({"schedule", "--windows_per_frame", "1000"}).code, qkdsync::cli::kExitUsage);
}

TEST(CliSchedule, FullDump) {
  const std::string path = temp_path("schedule.csv");
  ASSERT_EQ(run({"schedule", "--windows_per_frame", "64", "--dead_time_ns", "3", "--dump_csv",
                 path})
                .code,
            0);
  std::istringstream lines(read_file(path));
  std::string line;
  int count = 0;
  while (std::getline(lines, line)) ++count;
  EXPECT_EQ(count, 65);  // header plus one line per window
}
