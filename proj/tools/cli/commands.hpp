#pragma once

#include <cstdint>
#include <vector>

#include "cli/params.hpp"
#include "cli/report.hpp"

namespace qkdsync::cli {

std::vector<ParamSpec> plan_params();
std::vector<ParamSpec> prob_params();
std::vector<ParamSpec> simulate_params();
std::vector<ParamSpec> schedule_params();
std::vector<ParamSpec> sweep_params();

/// Link timing design: propagation speed through total synchronization time.
Report cmd_plan(const ParamSet& params);
/// Series and closed-form detection probabilities.
Report cmd_prob(const ParamSet& params);
/// Monte Carlo estimate; one row per scan mode requested.
Report cmd_simulate(const ParamSet& params, std::uint64_t seed);
/// Dead-time cycle schedule listing; optional full CSV dump to a file.
Report cmd_schedule(const ParamSet& params);
/// One row per step of a parameter sweep.
Report cmd_sweep(const ParamSet& params, std::uint64_t seed);

}  // namespace qkdsync::cli
