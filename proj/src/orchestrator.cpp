#include "ibot/orchestrator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ibot {

namespace {

constexpr double kMinIntercept = 1e-6;

const ProfileRow& row_of(const OrchestratorState& state, DeviceId device) {
  auto it = state.matrix.find(device);
  if (it == state.matrix.end())
    throw Error("UnknownDevice", "device " + std::to_string(to_int(device)) + " is not registered");
  return it->second;
}

double delay_of(const OrchestratorState& state, DeviceId device) {
  auto it = state.delay.find(device);
  return it == state.delay.end() ? 0.0 : it->second;
}

}  // namespace

const char* to_string(CountSemantics s) { return s == CountSemantics::Snapshot ? "snapshot" : "incremental"; }

CountSemantics count_semantics_from_string(const std::string& s) {
  if (s == "snapshot") return CountSemantics::Snapshot;
  if (s == "incremental") return CountSemantics::Incremental;
  throw Error("ConfigError", "count semantics must be snapshot or incremental, got '" + s + "'");
}

void register_device(OrchestratorState& state, DeviceId id, ProfileRow row, double delay, SmpModel smp, double now) {
  if (!row.complete()) throw Error("MissingEntry", "cannot register a device with missing profile entries");
  state.matrix[id] = std::move(row);
  state.counts.add_device(id);
  smp.observe(Availability::Up);
  state.smp[id] = std::move(smp);
  state.up_since[id] = now;
  state.delay[id] = delay;
}

double t_max(const OrchestratorState& state, const ApplicationProfile& profile) {
  std::vector<const ProfileRow*> rows;
  rows.reserve(state.matrix.size());
  for (const auto& [id, row] : state.matrix) rows.push_back(&row);
  return t_max(profile, rows, state.options.mode);
}

std::vector<DeviceId> filter_available(const OrchestratorState& state, double t_max, double now) {
  std::vector<DeviceId> keep;
  for (const auto& [id, model] : state.smp) {
    auto since = state.up_since.find(id);
    const double age = since != state.up_since.end() ? std::max(0.0, now - since->second) : model.current_age;
    if (reliability(model, age, t_max) > state.params.gamma) keep.push_back(id);
  }
  if (keep.empty()) throw Error("NoEligibleDevice", "no device passes the availability threshold");
  return keep;
}

double expected_time_on(const OrchestratorState& state, DeviceId device, int task,
                        const Eigen::Ref<const Eigen::VectorXi>& counts) {
  return expected_service_time(row_of(state, device), task, counts, state.options.mode) + delay_of(state, device);
}

Eigen::VectorXi counts_for(const OrchestratorState& state, const Assignment& assignment, int task, DeviceId device) {
  Eigen::VectorXi x = state.counts.row(device);
  if (state.options.counts == CountSemantics::Incremental)
    for (int k = 0; k < task && k < static_cast<int>(assignment.tasks.size()); ++k)
      if (assignment.tasks[static_cast<std::size_t>(k)].device == device) ++x(k);
  return x;
}

Assignment min_service_time_schedule(const ApplicationProfile& profile, const std::vector<DeviceId>& eligible,
                                     const OrchestratorState& state) {
  if (eligible.empty()) throw Error("NoEligibleDevice", "empty eligible set");
  Assignment out;
  out.tasks.reserve(static_cast<std::size_t>(profile.size()));
  for (int i = 0; i < profile.size(); ++i) {
    Placement best{eligible.front(), std::numeric_limits<double>::infinity()};
    for (const DeviceId p : eligible) {
      const double st = expected_time_on(state, p, i, counts_for(state, out, i, p));
      // Strict comparison keeps the lowest id on ties; eligible is ascending.
      if (st < best.expected_service_time || (st == best.expected_service_time && to_int(p) < to_int(best.device)))
        best = {p, st};
    }
    out.tasks.push_back(best);
  }
  return out;
}

Assignment reduce_bandwidth(const Assignment& assignment, const ApplicationProfile& profile,
                            const OrchestratorState& state) {
  Assignment out = assignment;
  for (const auto& group : profile.groups) {
    if (group.size() < 2) continue;
    const DeviceId anchor = out.tasks[static_cast<std::size_t>(group.front())].device;
    for (std::size_t k = 1; k < group.size(); ++k) {
      const int task = group[k];
      Placement& placed = out.tasks[static_cast<std::size_t>(task)];
      if (placed.device == anchor) continue;
      const double st_min = placed.expected_service_time;
      const double st_1 = expected_time_on(state, anchor, task, counts_for(state, assignment, task, anchor));
      if ((st_1 - st_min) / st_min <= state.params.beta) placed = {anchor, st_1};
    }
  }
  return out;
}

Assignment schedule_instance(const OrchestratorState& state, const ApplicationProfile& profile, double now) {
  if (state.matrix.empty()) throw Error("NoEligibleDevice", "no device is registered");
  const auto eligible = filter_available(state, t_max(state, profile), now);
  return reduce_bandwidth(min_service_time_schedule(profile, eligible, state), profile, state);
}

bool online_readjust(OrchestratorState& state, int task, DeviceId device, double st_exp, double st_actual,
                     const Eigen::Ref<const Eigen::VectorXi>& x) {
  if (!(st_actual > 0.0)) throw Error("ConfigError", "actual service time must be positive");
  if (std::abs(st_exp - st_actual) / st_actual <= state.params.delta) return false;
  auto it = state.matrix.find(device);
  if (it == state.matrix.end()) return false;  // result from a device that has since left

  ProfileRow& row = it->second;
  const int n = row.tasks();
  const double delay = delay_of(state, device);
  const bool literal = state.options.mode == CompositionMode::PaperLiteral;
  auto predict = [&] { return expected_service_time(row, task, x, state.options.mode) + delay; };

  ++state.stats.events;
  double err = predict() - st_actual;
  for (int step = 0; step < state.options.readjust_steps_max; ++step) {
    if (std::abs(err) / st_actual <= state.options.readjust_target) break;
    const Eigen::RowVectorXd m0 = row.slope.row(task);
    const Eigen::RowVectorXd c0 = row.intercept.row(task);
    // Halve the step if it would not reduce the loss, e.g. when large counts
    // make the fixed rate overshoot or clamping blocks the move.
    double eta = state.options.learn_rate;
    double next = err;
    for (int tries = 0; tries < 40; ++tries) {
      for (int j = 0; j < n; ++j) {
        row.slope(task, j) = std::max(0.0, m0(j) - eta * 2.0 * err * x(j));
        if (literal || j == task) row.intercept(task, j) = std::max(kMinIntercept, c0(j) - eta * 2.0 * err);
      }
      next = predict() - st_actual;
      if (std::abs(next) < std::abs(err)) break;
      row.slope.row(task) = m0;
      row.intercept.row(task) = c0;
      next = err;
      eta *= 0.5;
    }
    ++state.stats.steps;
    if (next == err) break;
    err = next;
  }
  return true;
}

void device_exit(OrchestratorState& state, DeviceId device) {
  auto it = state.matrix.find(device);
  if (it == state.matrix.end())
    throw Error("UnknownDevice", "device " + std::to_string(to_int(device)) + " is not registered");
  SavedDevice saved{std::move(it->second), state.smp[device], delay_of(state, device)};
  state.saved_rows[device] = std::move(saved);
  state.matrix.erase(it);
  state.counts.remove_device(device);
  state.smp.erase(device);
  state.up_since.erase(device);
  state.delay.erase(device);
}

void device_rejoin(OrchestratorState& state, DeviceId device, double now) {
  auto it = state.saved_rows.find(device);
  if (it == state.saved_rows.end())
    throw Error("UnknownDevice", "device " + std::to_string(to_int(device)) + " has no archived row");
  register_device(state, device, it->second.row, it->second.delay, it->second.smp, now);
  state.saved_rows.erase(it);
}

}  // namespace ibot
