#include "ibot/scenario.hpp"

#include <boost/lexical_cast.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <type_traits>

namespace ibot {

namespace {

namespace pt = boost::property_tree;

using Setter = std::function<void(const std::string& value)>;
using Getter = std::function<std::string()>;

struct Field {
  Setter set;
  Getter get;
};

template <typename T>
T parse_as(const std::string& value, const std::string& name) {
  try {
    return boost::lexical_cast<T>(value);
  } catch (const boost::bad_lexical_cast&) {
    throw Error("ConfigError", name + ": cannot parse '" + value + "'");
  }
}

bool parse_bool(const std::string& value, const std::string& name) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw Error("ConfigError", name + ": expected true or false, got '" + value + "'");
}

std::string show(double v) {
  std::ostringstream os;
  os << std::setprecision(std::numeric_limits<double>::max_digits10) << v;
  return os.str();
}

template <typename T>
Field number(T& slot, const std::string& name) {
  if constexpr (std::is_floating_point_v<T>) {
    return {[&slot, name](const std::string& v) { slot = parse_as<T>(v, name); }, [&slot] { return show(slot); }};
  } else {
    return {[&slot, name](const std::string& v) { slot = parse_as<T>(v, name); },
            [&slot] { return std::to_string(slot); }};
  }
}

/// Schema keyed by section, then key. Order is the write order.
std::vector<std::pair<std::string, std::vector<std::pair<std::string, Field>>>> schema(ScenarioConfig& c) {
  auto n = [](const char* s, const char* k) { return std::string(s) + "." + k; };
  return {
      {"profile",
       {{"name", {[&c](const std::string& v) { c.profile = v; }, [&c] { return c.profile; }}},
        {"mode",
         {[&c](const std::string& v) { c.mode = composition_mode_from_string(v); },
          [&c] { return std::string(to_string(c.mode)); }}},
        {"counts",
         {[&c](const std::string& v) { c.counts = count_semantics_from_string(v); },
          [&c] { return std::string(to_string(c.counts)); }}},
        {"instances", number(c.instances, n("profile", "instances"))}}},
      {"devices",
       {{"count", number(c.devices, n("devices", "count"))},
        {"slope_min", number(c.generator.slope_min, n("devices", "slope_min"))},
        {"slope_max", number(c.generator.slope_max, n("devices", "slope_max"))},
        {"speed_min", number(c.generator.speed_min, n("devices", "speed_min"))},
        {"speed_max", number(c.generator.speed_max, n("devices", "speed_max"))},
        {"delay_min", number(c.generator.delay_min, n("devices", "delay_min"))},
        {"delay_max", number(c.generator.delay_max, n("devices", "delay_max"))},
        {"noise_sigma", number(c.noise_sigma, n("devices", "noise_sigma"))}}},
      {"hyperparams",
       {{"lambda", number(c.params.lambda_, n("hyperparams", "lambda"))},
        {"delta", number(c.params.delta, n("hyperparams", "delta"))},
        {"beta", number(c.params.beta, n("hyperparams", "beta"))},
        {"gamma", number(c.params.gamma, n("hyperparams", "gamma"))},
        {"profiling_budget", number(c.params.profiling_budget, n("hyperparams", "profiling_budget"))},
        {"running_avg_window", number(c.params.running_avg_window, n("hyperparams", "running_avg_window"))},
        {"learn_rate", number(c.learn_rate, n("hyperparams", "learn_rate"))},
        {"readjust_steps_max", number(c.readjust_steps_max, n("hyperparams", "readjust_steps_max"))},
        {"readjust_target", number(c.readjust_target, n("hyperparams", "readjust_target"))}}},
      {"scheduler",
       {{"name",
         {[&c](const std::string& v) { c.scheduler = scheduler_kind_from_string(v); },
          [&c] { return std::string(to_string(c.scheduler)); }}},
        {"anchors", number(c.anchors, n("scheduler", "anchors"))},
        {"probe_cost", number(c.probe_cost, n("scheduler", "probe_cost"))},
        {"restart_on_redispatch",
         {[&c](const std::string& v) { c.restart_on_redispatch = parse_bool(v, "scheduler.restart_on_redispatch"); },
          [&c] { return std::string(c.restart_on_redispatch ? "true" : "false"); }}},
        {"overhead",
         {[&c](const std::string& v) {
            if (v == "wall") c.overhead.mode = OverheadMode::Wall;
            else if (v == "simulated") c.overhead.mode = OverheadMode::Simulated;
            else throw Error("ConfigError", "scheduler.overhead: expected wall or simulated, got '" + v + "'");
          },
          [&c] { return std::string(c.overhead.mode == OverheadMode::Wall ? "wall" : "simulated"); }}},
        {"rank", number(c.completion.rank, n("scheduler", "rank"))},
        {"completion_learn_rate", number(c.completion.learn_rate, n("scheduler", "completion_learn_rate"))},
        {"regularization", number(c.completion.regularization, n("scheduler", "regularization"))},
        {"max_epochs", number(c.completion.max_epochs, n("scheduler", "max_epochs"))},
        {"convergence_tol", number(c.completion.convergence_tol, n("scheduler", "convergence_tol"))},
        {"als_sweeps", number(c.completion.als_sweeps, n("scheduler", "als_sweeps"))}}},
      {"churn",
       {{"pct", number(c.churn.pct, n("churn", "pct"))},
        {"start", number(c.churn.start, n("churn", "start"))},
        {"up_mean", number(c.churn.up_mean, n("churn", "up_mean"))},
        {"up_spread", number(c.churn.up_spread, n("churn", "up_spread"))},
        {"down_mean", number(c.churn.down_mean, n("churn", "down_mean"))},
        {"history_days", number(c.churn.history_days, n("churn", "history_days"))},
        {"day_length", number(c.churn.day_length, n("churn", "day_length"))}}},
      {"capacity",
       {{"pct", number(c.capacity.pct, n("capacity", "pct"))},
        {"start", number(c.capacity.start, n("capacity", "start"))},
        {"window_mean", number(c.capacity.window_mean, n("capacity", "window_mean"))},
        {"factor", number(c.capacity.factor, n("capacity", "factor"))}}},
      {"seeds",
       {{"devices", number(c.seeds.devices, n("seeds", "devices"))},
        {"arrivals", number(c.seeds.arrivals, n("seeds", "arrivals"))},
        {"scheduler", number(c.seeds.scheduler, n("seeds", "scheduler"))},
        {"noise", number(c.seeds.noise, n("seeds", "noise"))},
        {"completion", number(c.completion.seed, n("seeds", "completion"))}}},
  };
}

}  // namespace

ScenarioConfig parse_scenario(std::istream& in) {
  pt::ptree tree;
  try {
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw Error("ConfigError", std::string("scenario is not valid INI: ") + e.what());
  }

  ScenarioConfig cfg;
  const auto fields = schema(cfg);
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) throw Error("ConfigError", section + ": key outside any section");
    const auto sec = std::find_if(fields.begin(), fields.end(), [&](const auto& f) { return f.first == section; });
    if (sec == fields.end()) throw Error("ConfigError", section + ": unknown section");
    for (const auto& [key, value] : body) {
      const auto field =
          std::find_if(sec->second.begin(), sec->second.end(), [&](const auto& f) { return f.first == key; });
      if (field == sec->second.end()) throw Error("ConfigError", section + "." + key + ": unknown key");
      try {
        field->second.set(value.data());
      } catch (const Error& e) {
        const std::string name = section + "." + key;
        if (std::string(e.what()).find(name) != std::string::npos) throw;
        throw Error("ConfigError", name + ": " + e.what());
      }
    }
  }

  // Every seed must be given so no run depends on a default.
  const auto seeds = tree.get_child_optional("seeds");
  if (!seeds) throw Error("ConfigError", "seeds: section is required");
  for (const auto& [key, field] : fields.back().second)
    if (!seeds->get_child_optional(key)) throw Error("ConfigError", "seeds." + key + ": required");

  validate_scenario(cfg);
  return cfg;
}

ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("ConfigError", path + ": cannot open scenario file");
  return parse_scenario(in);
}

void write_scenario(std::ostream& out, const ScenarioConfig& cfg) {
  ScenarioConfig copy = cfg;
  const auto fields = schema(copy);
  bool first = true;
  for (const auto& [section, body] : fields) {
    if (!first) out << '\n';
    first = false;
    out << '[' << section << "]\n";
    for (const auto& [key, field] : body) out << key << " = " << field.get() << '\n';
  }
}

}  // namespace ibot
