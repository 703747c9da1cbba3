#include "ibot/core.hpp"

#include <algorithm>
#include <set>

namespace ibot {

ApplicationProfile make_profile(std::string name, std::vector<TaskType> tasks) {
  ApplicationProfile profile;
  profile.name = std::move(name);
  profile.tasks = std::move(tasks);
  std::vector<int> group_ids;
  for (int pos = 0; pos < profile.size(); ++pos) {
    const int gid = profile.tasks[static_cast<std::size_t>(pos)].input_group;
    auto it = std::find(group_ids.begin(), group_ids.end(), gid);
    if (it == group_ids.end()) {
      group_ids.push_back(gid);
      profile.groups.push_back({pos});
    } else {
      profile.groups[static_cast<std::size_t>(it - group_ids.begin())].push_back(pos);
    }
  }
  return profile;
}

void validate_profile(const ApplicationProfile& profile) {
  if (profile.tasks.empty()) throw Error("EmptyProfile", "profile '" + profile.name + "' has no tasks");
  std::set<int> seen;
  for (const auto& t : profile.tasks) {
    if (!seen.insert(t.index).second)
      throw Error("DuplicateTaskIndex", "task index " + std::to_string(t.index) + " repeated");
    if (!(t.base_service_time > 0.0))
      throw Error("NonPositiveServiceTime", "task '" + t.name + "' has base_service_time <= 0");
  }
  const int n = profile.size();
  if (*seen.begin() != 1 || *seen.rbegin() != n)
    throw Error("DuplicateTaskIndex", "task indices must be exactly 1.." + std::to_string(n));

  std::vector<int> covered(static_cast<std::size_t>(n), 0);
  for (const auto& g : profile.groups) {
    if (g.empty()) throw Error("BadGroups", "empty input group");
    for (int pos : g) {
      if (pos < 0 || pos >= n) throw Error("BadGroups", "group member out of range");
      ++covered[static_cast<std::size_t>(pos)];
    }
  }
  if (profile.groups.empty() ||
      std::any_of(covered.begin(), covered.end(), [](int c) { return c != 1; }))
    throw Error("BadGroups", "input groups must partition the tasks");
}

ApplicationProfile preset_profile(const std::string& name) {
  if (name == "light") {
    return make_profile("light", {{1, "color detection", 1, 0.06},
                                  {2, "image segmentation", 2, 0.12},
                                  {3, "edge detection", 3, 0.17}});
  }
  if (name == "medium") {
    return make_profile("medium", {{1, "kernel filtering", 1, 0.22},
                                   {2, "contour detection", 2, 0.25},
                                   {3, "feature transformation", 3, 0.35}});
  }
  if (name == "heavy") {
    // The three forward-camera tasks share one input.
    return make_profile("heavy", {{1, "driver state detection", 1, 0.39},
                                  {2, "driver body position", 2, 0.45},
                                  {3, "vehicle state analysis", 3, 0.43},
                                  {4, "pedestrian detection", 4, 0.57},
                                  {5, "obstacle detection", 4, 0.60},
                                  {6, "traffic sign analysis", 4, 0.41}});
  }
  throw Error("UnknownPreset", "no built-in profile named '" + name + "'");
}

std::vector<std::string> preset_names() { return {"light", "medium", "heavy"}; }

void TaskCountMatrix::add_device(DeviceId id) {
  rows_.try_emplace(id, Eigen::VectorXi::Zero(tasks_));
}

void TaskCountMatrix::remove_device(DeviceId id) { rows_.erase(id); }

Eigen::VectorXi TaskCountMatrix::row(DeviceId id) const {
  auto it = rows_.find(id);
  if (it == rows_.end()) return Eigen::VectorXi::Zero(tasks_);
  return it->second;
}

int TaskCountMatrix::total(DeviceId id) const {
  auto it = rows_.find(id);
  return it == rows_.end() ? 0 : it->second.sum();
}

long long TaskCountMatrix::grand_total() const {
  long long sum = 0;
  for (const auto& [id, r] : rows_) sum += r.sum();
  return sum;
}

void TaskCountMatrix::increment(DeviceId id, int task) {
  auto [it, inserted] = rows_.try_emplace(id, Eigen::VectorXi::Zero(tasks_));
  ++it->second(task);
}

void TaskCountMatrix::decrement(DeviceId id, int task) {
  auto it = rows_.find(id);
  if (it == rows_.end() || it->second(task) <= 0)
    throw Error("NegativeCount", "task count for device " + std::to_string(to_int(id)) + " would go negative");
  --it->second(task);
}

void validate_trace(const AvailabilityTrace& trace) {
  for (const auto& day : trace.days) {
    for (std::size_t k = 0; k < day.size(); ++k) {
      if (!(day[k].duration > 0.0)) throw Error("BadTrace", "span durations must be positive");
      if (k > 0 && day[k].state == day[k - 1].state) throw Error("BadTrace", "span states must alternate");
    }
  }
}

double DeviceSpec::scale_at(double t) const {
  double s = 1.0;
  for (const auto& ev : capacity_events) {
    if (ev.time > t) break;
    s *= ev.scale;
  }
  return s;
}

void validate_device(const DeviceSpec& spec) {
  if (spec.network_delay < 0.0) throw Error("BadDevice", "negative network delay");
  if (!(spec.nominal_speed > 0.0)) throw Error("BadDevice", "nominal_speed must be positive");
  for (std::size_t k = 0; k < spec.capacity_events.size(); ++k) {
    if (!(spec.capacity_events[k].scale > 0.0)) throw Error("BadDevice", "capacity scale must be positive");
    if (k > 0 && !(spec.capacity_events[k].time > spec.capacity_events[k - 1].time))
      throw Error("BadDevice", "capacity events must be strictly time-ordered");
  }
  validate_trace(spec.history);
}

void validate_hyperparams(const HyperParams& p) {
  if (p.lambda_ < 0 || p.delta < 0 || p.beta < 0 || p.profiling_budget < 0 || p.running_avg_window < 1)
    throw Error("BadHyperParams", "hyperparameters must be non-negative (window >= 1)");
  if (p.gamma < 0.0 || p.gamma > 1.0) throw Error("BadHyperParams", "gamma must lie in [0, 1]");
}

}  // namespace ibot
