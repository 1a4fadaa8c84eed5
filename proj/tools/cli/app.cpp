#include "cli/app.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <ostream>

#include "cli/commands.hpp"
#include "qkdsync/errors.hpp"

namespace qkdsync::cli {

namespace {

struct Subcommand {
  std::string name;
  std::string description;
  std::vector<ParamSpec> specs;
  std::function<Report(const ParamSet&, std::uint64_t)> run;
  CLI::App* app = nullptr;
  std::map<std::string, std::string> flags;  // storage bound to CLI11 options
};

std::uint64_t parse_seed(const std::string& text, const std::string& origin) {
  std::size_t used = 0;
  unsigned long long value = 0;
  try {
    value = std::stoull(text, &used, 0);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != text.size() || text.empty() || text.front() == '-') {
    throw ConfigError(origin + " expects an unsigned 64-bit seed, got '" + text + "'");
  }
  return value;
}

OutputFormat parse_format(const std::string& format) {
  if (format == "table") return OutputFormat::Table;
  if (format == "csv") return OutputFormat::Csv;
  if (format == "json") return OutputFormat::Json;
  throw ConfigError("format must be table, csv or json, got '" + format + "'");
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Synchronization-phase model of a two-pass fiber QKD link", "qkd_sync"};
  app.require_subcommand(1, 1);
  app.fallthrough();

  std::string format = "table";
  std::string output_path;
  std::string config_path;
  std::string seed_text;
  auto* format_opt = app.add_option("--format", format, "table, csv or json");
  auto* output_opt = app.add_option("--output,-o", output_path, "write the report to a file");
  app.add_option("--config", config_path, "flat key = value file; flags override its values");
  auto* seed_opt = app.add_option("--seed", seed_text, "master seed (overrides QKD_SYNC_SEED)");

  std::vector<Subcommand> subs;
  auto add = [&subs](std::string name, std::string description, std::vector<ParamSpec> specs,
                     std::function<Report(const ParamSet&, std::uint64_t)> run) {
    Subcommand sub;
    sub.name = std::move(name);
    sub.description = std::move(description);
    sub.specs = std::move(specs);
    sub.run = std::move(run);
    subs.push_back(std::move(sub));
  };
  add("plan", "Timing plan for a fiber link", plan_params(),
      [](const ParamSet& p, std::uint64_t) { return cmd_plan(p); });
  add("prob", "Analytic detection probability", prob_params(),
      [](const ParamSet& p, std::uint64_t) { return cmd_prob(p); });
  add("simulate", "Monte Carlo estimate of the detection probability", simulate_params(),
      cmd_simulate);
  add("schedule", "Dead-time-safe cycle schedule", schedule_params(),
      [](const ParamSet& p, std::uint64_t) { return cmd_schedule(p); });
  add("sweep", "Detection probability across one parameter", sweep_params(), cmd_sweep);
  for (auto& sub : subs) {
    sub.app = app.add_subcommand(sub.name, sub.description);
    for (const auto& spec : sub.specs) {
      std::string help = spec.help;
      if (!spec.default_value.empty()) help += " [" + spec.default_value + "]";
      sub.app->add_option("--" + spec.name, sub.flags[spec.name], help);
    }
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    if (code == 0) return kExitOk;
    for (const auto& sub : subs) {
      if (sub.app->parsed()) {
        err << "valid keys for " << sub.name << ": " << ParamSet(sub.specs).valid_keys() << "\n";
      }
    }
    return kExitUsage;
  }

  Subcommand* chosen = nullptr;
  for (auto& sub : subs) {
    if (sub.app->parsed()) chosen = &sub;
  }

  try {
    ParamSet params(chosen->specs);
    std::optional<std::string> file_seed;
    if (!config_path.empty()) {
      for (const auto& [key, value] : read_config_file(config_path)) {
        if (key == "format") {
          if (format_opt->count() == 0) format = value;
        } else if (key == "output") {
          if (output_opt->count() == 0) output_path = value;
        } else if (key == "seed") {
          file_seed = value;
        } else if (!params.known(key)) {
          throw ConfigError("unknown key '" + key + "' in " + config_path + "; valid keys: " +
                            params.valid_keys() + ", format, output, seed");
        } else if (chosen->app->get_option("--" + key)->count() == 0) {
          params.set(key, value);
        }
      }
    }
    for (const auto& [key, value] : chosen->flags) {
      if (chosen->app->get_option("--" + key)->count() > 0) params.set(key, value);
    }

    std::uint64_t seed = 0;
    if (seed_opt->count() > 0) {
      seed = parse_seed(seed_text, "--seed");
    } else if (file_seed) {
      seed = parse_seed(*file_seed, "config seed");
    } else if (const char* env = std::getenv("QKD_SYNC_SEED"); env != nullptr && *env != '\0') {
      seed = parse_seed(env, "QKD_SYNC_SEED");
    }

    const OutputFormat fmt_kind = parse_format(format);
    const Report report = chosen->run(params, seed);
    const std::string rendered = render(report, fmt_kind);
    if (output_path.empty()) {
      out << rendered;
    } else {
      std::ofstream file(output_path, std::ios::binary);
      if (!file) throw ConfigError("cannot write '" + output_path + "'");
      file << rendered;
    }
    return kExitOk;
  } catch (const PrecisionError& e) {
    err << fmt::format("precision failure: {} (partial sum {:.12g} after {} terms, tail {:.3g})\n",
                       e.what(), e.partial_sum(), e.terms(), e.tail_bound());
    return kExitPrecision;
  } catch (const NumericRangeError& e) {
    err << "numeric failure: " << e.what() << "\n";
    return kExitPrecision;
  } catch (const std::invalid_argument& e) {  // ConfigError, CriterionError
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::domain_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
}

}  // namespace qkdsync::cli
