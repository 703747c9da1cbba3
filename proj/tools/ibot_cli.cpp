#include "ibot/analysis.hpp"
#include "ibot/scenario.hpp"
#include "ibot/simulator.hpp"
#include "ibot/snapshot.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace ibot;

namespace {

constexpr int kConfigExit = 2;

/// --out wins, then IBOT_OUT_DIR, then ./out.
fs::path output_dir(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("IBOT_OUT_DIR"); env != nullptr && *env != '\0') return env;
  return "out";
}

/// Writes through a temporary file so readers never see a half-written CSV.
template <typename Fn>
void write_atomically(const fs::path& path, Fn&& body) {
  fs::create_directories(path.parent_path().empty() ? fs::path(".") : path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw Error("IoError", tmp.string() + ": cannot open for writing");
    body(out);
    if (!out) throw Error("IoError", tmp.string() + ": write failed");
  }
  fs::rename(tmp, path);
}

std::vector<double> parse_list(const std::string& text, const std::string& name) {
  std::vector<double> values;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      std::size_t used = 0;
      values.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw Error("ConfigError", name + ": cannot parse '" + item + "'");
    }
  }
  if (values.empty()) throw Error("ConfigError", name + ": needs at least one value");
  return values;
}

void apply_sweep_value(ScenarioConfig& cfg, const std::string& param, double v) {
  if (param == "lambda") cfg.params.lambda_ = v;
  else if (param == "delta") cfg.params.delta = v;
  else if (param == "beta") cfg.params.beta = v;
  else if (param == "churn_pct") cfg.churn.pct = v;
  else if (param == "capacity_pct") cfg.capacity.pct = v;
  else if (param == "Q") {
    if (v != std::floor(v) || v < 1) throw Error("ConfigError", "Q: must be a positive integer");
    cfg.devices = static_cast<int>(v);
  } else {
    throw Error("ConfigError", "param: unknown sweep parameter '" + param +
                                   "' (lambda, delta, beta, churn_pct, capacity_pct, Q)");
  }
}

std::string label_of(double v) {
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

struct RunFlags {
  std::string scenario;
  std::string out;
  std::string scheduler;
  bool sim_overhead = false;
};

ScenarioConfig load_with_overrides(const RunFlags& flags) {
  ScenarioConfig cfg = load_scenario(flags.scenario);
  if (!flags.scheduler.empty()) cfg.scheduler = scheduler_kind_from_string(flags.scheduler);
  if (flags.sim_overhead) cfg.overhead.mode = OverheadMode::Simulated;
  return cfg;
}

int cmd_simulate(const RunFlags& flags) {
  const ScenarioConfig cfg = load_with_overrides(flags);
  const MetricsRecord rec = run(cfg);
  const fs::path dir = output_dir(flags.out);
  write_atomically(dir / "per_instance.csv", [&](std::ostream& o) { write_per_instance_csv(o, rec); });
  write_atomically(dir / "summary.csv", [&](std::ostream& o) {
    write_summary_csv_header(o);
    write_summary_csv_row(o, to_string(cfg.scheduler), rec);
  });
  std::cout << to_string(cfg.scheduler) << ": mean service time " << rec.mean_service_time << " s over "
            << rec.completed_instances << " instances; outputs in " << dir.string() << '\n';
  return 0;
}

int cmd_sweep(const RunFlags& flags, const std::string& param, const std::string& values_text) {
  const ScenarioConfig base = load_with_overrides(flags);
  const auto values = parse_list(values_text, "values");
  {
    ScenarioConfig probe = base;
    apply_sweep_value(probe, param, values.front());  // rejects an unknown param before any run
  }
  std::ostringstream table;
  write_summary_csv_header(table);
  for (const double v : values) {
    ScenarioConfig cfg = base;
    apply_sweep_value(cfg, param, v);
    validate_scenario(cfg);
    write_summary_csv_row(table, label_of(v), run(cfg));
  }
  const fs::path path = output_dir(flags.out) / ("sweep_" + param + ".csv");
  write_atomically(path, [&](std::ostream& o) { o << table.str(); });
  std::cout << table.str();
  return 0;
}

struct AnalyzeFlags {
  ChainConfig chain;
  std::string mu = "10,30";
  std::string lambdas = "1,5,10,15,20";
  std::string rule = "exact";
  QueueSimConfig sim;
  std::string out;
  bool csv_only = false;
};

int cmd_analyze(AnalyzeFlags flags) {
  flags.chain.mu = parse_list(flags.mu, "mu");
  flags.chain.rule = up_rate_rule_from_string(flags.rule);
  const auto lambdas = parse_list(flags.lambdas, "lambdas");
  for (const double l : lambdas) {
    ChainConfig c = flags.chain;
    c.lambda_ = l;
    validate_chain(c);
  }
  const auto rows = compare_analysis_vs_simulation(flags.chain, lambdas, flags.sim);
  const fs::path path = output_dir(flags.out) / "analysis.csv";
  write_atomically(path, [&](std::ostream& o) { write_comparison_csv(o, rows); });
  if (!flags.csv_only) {
    std::cout << std::left << std::setw(8) << "lambda" << std::setw(14) << "T_raw" << std::setw(14) << "T_per_task"
              << std::setw(14) << "T_simulated" << "TV(pi, sim)\n";
    for (const auto& r : rows)
      std::cout << std::setw(8) << r.lambda_ << std::setw(14) << r.t_raw << std::setw(14) << r.t_per_task
                << std::setw(14) << r.t_simulated << r.tv << '\n';
  }
  return 0;
}

int cmd_snapshot_save(const RunFlags& flags, const std::string& file) {
  ScenarioConfig cfg = load_with_overrides(flags);
  if (cfg.scheduler != SchedulerKind::IbotPI && cfg.scheduler != SchedulerKind::IbotI2)
    throw Error("ConfigError", "scheduler.name: snapshots hold I-BOT state; use ibot_pi or ibot_i2");
  const auto profile = preset_profile(cfg.profile);
  const auto devices = generate_devices(cfg, profile);
  const auto scheduler = make_scheduler(cfg, profile, devices);
  const auto& state = dynamic_cast<const IbotScheduler&>(*scheduler).state();
  save_snapshot(snapshot_of(state), file);
  std::cout << "saved " << state.matrix.size() << " device rows to " << file << '\n';
  return 0;
}

int cmd_snapshot_show(const std::string& file) {
  const Snapshot snap = load_snapshot(file);
  std::cout << "version " << kSnapshotVersion << ": " << snap.matrix.size() << " active rows, "
            << snap.saved_rows.size() << " archived rows\n";
  for (const auto& [id, row] : snap.matrix) {
    int measured = 0;
    for (const auto s : row.mask) measured += s == EntryState::Measured ? 1 : 0;
    std::cout << "  device " << to_int(id) << ": " << measured << '/' << row.mask.size() << " measured, delay "
              << snap.delay.at(id) << " s, " << snap.smp.at(id).up_holding.size() << " up samples\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Interference-aware task orchestration: simulator, sweeps, queueing analysis and snapshots"};
  app.require_subcommand(1);

  RunFlags sim_flags;
  auto* simulate = app.add_subcommand("simulate", "Run one scenario and write per_instance.csv and summary.csv");
  simulate->add_option("scenario", sim_flags.scenario, "Scenario INI file")->required();
  simulate->add_option("--out", sim_flags.out, "Output directory (default: $IBOT_OUT_DIR or ./out)");
  simulate->add_option("--scheduler", sim_flags.scheduler, "Override [scheduler] name");
  simulate->add_flag("--sim-overhead", sim_flags.sim_overhead, "Use the simulated orchestration-cost model");

  RunFlags sweep_flags;
  std::string param;
  std::string values;
  auto* sweep = app.add_subcommand("sweep", "Run a scenario once per value of one parameter");
  sweep->add_option("scenario", sweep_flags.scenario, "Scenario INI file")->required();
  sweep->add_option("--param", param, "lambda, delta, beta, churn_pct, capacity_pct or Q")->required();
  sweep->add_option("--values", values, "Comma-separated values")->required();
  sweep->add_option("--out", sweep_flags.out, "Output directory (default: $IBOT_OUT_DIR or ./out)");
  sweep->add_option("--scheduler", sweep_flags.scheduler, "Override [scheduler] name");
  sweep->add_flag("--sim-overhead", sweep_flags.sim_overhead, "Use the simulated orchestration-cost model");

  AnalyzeFlags an;
  auto* analyze = app.add_subcommand("analyze", "Solve the queueing chain and compare with a Monte Carlo run");
  analyze->add_option("--N", an.chain.N, "Task types per instance")->capture_default_str();
  analyze->add_option("--Q", an.chain.Q, "Devices")->capture_default_str();
  analyze->add_option("--mu", an.mu, "Comma-separated service rates, one per type")->capture_default_str();
  analyze->add_option("--lambdas", an.lambdas, "Comma-separated arrival rates")->capture_default_str();
  analyze->add_option("--truncation", an.chain.truncation, "Largest queue length kept")->capture_default_str();
  analyze->add_option("--damping", an.chain.damping, "Fixed-point damping")->capture_default_str();
  analyze->add_option("--tolerance", an.chain.tolerance, "L1 stopping tolerance")->capture_default_str();
  analyze->add_option("--max-iterations", an.chain.max_iterations, "Iteration cap")->capture_default_str();
  analyze->add_option("--rule", an.rule, "Batch arrival rule: exact or closed_form")->capture_default_str();
  analyze->add_option("--horizon", an.sim.horizon, "Monte Carlo horizon in seconds")->capture_default_str();
  analyze->add_option("--seed", an.sim.seed, "Monte Carlo seed")->capture_default_str();
  analyze->add_option("--out", an.out, "Output directory (default: $IBOT_OUT_DIR or ./out)");
  analyze->add_flag("--csv-only", an.csv_only, "Write analysis.csv without printing the table");

  auto* snapshot = app.add_subcommand("snapshot", "Save or inspect orchestrator state");
  snapshot->require_subcommand(1);
  RunFlags snap_flags;
  std::string snap_file;
  auto* save = snapshot->add_subcommand("save", "Profile a scenario's devices and save the resulting state");
  save->add_option("scenario", snap_flags.scenario, "Scenario INI file")->required();
  save->add_option("--file", snap_file, "Snapshot path")->required();
  save->add_option("--scheduler", snap_flags.scheduler, "Override [scheduler] name");
  std::string show_file;
  auto* show = snapshot->add_subcommand("show", "Load a snapshot and print a summary");
  show->add_option("file", show_file, "Snapshot path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigExit;
  }

  try {
    if (simulate->parsed()) return cmd_simulate(sim_flags);
    if (sweep->parsed()) return cmd_sweep(sweep_flags, param, values);
    if (analyze->parsed()) return cmd_analyze(an);
    if (save->parsed()) return cmd_snapshot_save(snap_flags, snap_file);
    if (show->parsed()) return cmd_snapshot_show(show_file);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.code() == "ConfigError" ? kConfigExit : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
