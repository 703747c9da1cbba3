#pragma once

#include "ibot/simulator.hpp"

#include <iosfwd>
#include <string>

namespace ibot {

/// Reads an INI scenario. Sections and keys (all optional unless noted):
///
///   [profile]     name, mode (paper_literal | marginal), counts (snapshot | incremental), instances
///   [devices]     count, slope_min, slope_max, speed_min, speed_max, delay_min, delay_max, noise_sigma
///   [hyperparams] lambda, delta, beta, gamma, profiling_budget, running_avg_window,
///                 learn_rate, readjust_steps_max, readjust_target
///   [scheduler]   name (ibot_pi | ibot_i2 | sqlf | petrel | round_robin | random), anchors,
///                 probe_cost, restart_on_redispatch, overhead (wall | simulated),
///                 rank, completion_learn_rate, regularization, max_epochs, convergence_tol, als_sweeps
///   [churn]       pct, start, up_mean, up_spread, down_mean, history_days, day_length
///   [capacity]    pct, start, window_mean, factor
///   [seeds]       devices, arrivals, scheduler, noise, completion (section and every key required)
///
/// Throws Error{ConfigError} naming `section.key` for unknown, missing or
/// malformed entries, then validates the result.
ScenarioConfig parse_scenario(std::istream& in);
ScenarioConfig load_scenario(const std::string& path);

/// Writes every field back in the same schema; parse_scenario reads it back equal.
void write_scenario(std::ostream& out, const ScenarioConfig& cfg);

}  // namespace ibot
