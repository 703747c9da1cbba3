#include "ibot/scheduler.hpp"

#include <limits>

namespace ibot {

namespace {

ApplicationProfile single_task(const ApplicationProfile& profile, int task) {
  ApplicationProfile one;
  one.name = profile.name;
  one.tasks = {profile.tasks[static_cast<std::size_t>(task)]};
  one.groups = {{0}};
  return one;
}

}  // namespace

const char* to_string(SchedulerKind kind) {
  switch (kind) {
    case SchedulerKind::IbotPI: return "ibot_pi";
    case SchedulerKind::IbotI2: return "ibot_i2";
    case SchedulerKind::Sqlf: return "sqlf";
    case SchedulerKind::Petrel: return "petrel";
    case SchedulerKind::RoundRobin: return "round_robin";
    case SchedulerKind::Random: return "random";
  }
  return "unknown";
}

SchedulerKind scheduler_kind_from_string(const std::string& s) {
  for (const auto k : {SchedulerKind::IbotPI, SchedulerKind::IbotI2, SchedulerKind::Sqlf, SchedulerKind::Petrel,
                       SchedulerKind::RoundRobin, SchedulerKind::Random})
    if (s == to_string(k)) return k;
  throw Error("ConfigError", "unknown scheduler '" + s + "'");
}

Assignment IbotScheduler::schedule(const ApplicationProfile& profile, const std::vector<DeviceId>&, double now) {
  return schedule_instance(state_, profile, now);
}

Placement IbotScheduler::reschedule(const ApplicationProfile& profile, int task, const std::vector<DeviceId>&,
                                    double now) {
  if (state_.matrix.empty()) throw Error("NoEligibleDevice", "no device is registered");
  const auto eligible = filter_available(state_, t_max(state_, profile), now);
  Placement best{eligible.front(), std::numeric_limits<double>::infinity()};
  for (const DeviceId p : eligible) {
    const double st = expected_time_on(state_, p, task, state_.counts.row(p));
    if (st < best.expected_service_time) best = {p, st};
  }
  return best;
}

void IbotScheduler::dispatched(DeviceId device, int task) { state_.counts.increment(device, task); }

void IbotScheduler::completed(DeviceId device, int task, const Eigen::VectorXi& x, double st_exp, double st_actual) {
  if (!state_.counts.has(device)) return;  // the device left while the task ran
  state_.counts.decrement(device, task);
  online_readjust(state_, task, device, st_exp, st_actual, x);
}

void IbotScheduler::device_down(DeviceId device, double now) {
  auto since = state_.up_since.find(device);
  if (since == state_.up_since.end()) return;
  state_.smp[device].record(Availability::Up, now - since->second);
  device_exit(state_, device);
  down_since_[device] = now;
}

void IbotScheduler::device_up(DeviceId device, double now) {
  auto saved = state_.saved_rows.find(device);
  if (saved == state_.saved_rows.end()) return;
  auto since = down_since_.find(device);
  if (since != down_since_.end()) saved->second.smp.record(Availability::Down, now - since->second);
  device_rejoin(state_, device, now);
}

BaselineScheduler::BaselineScheduler(SchedulerKind kind, int tasks, std::map<DeviceId, double> nominal_speed,
                                     std::uint64_t seed)
    : kind_(kind), counts_(tasks), nominal_speed_(std::move(nominal_speed)), rng_(seed) {
  if (kind == SchedulerKind::IbotPI || kind == SchedulerKind::IbotI2)
    throw Error("ConfigError", "I-BOT is not a baseline policy");
  for (const auto& [id, speed] : nominal_speed_) counts_.add_device(id);
}

Assignment BaselineScheduler::schedule(const ApplicationProfile& profile, const std::vector<DeviceId>& up, double) {
  switch (kind_) {
    case SchedulerKind::Sqlf: return sqlf_schedule(profile, up, counts_);
    case SchedulerKind::Petrel: return petrel_schedule(profile, up, nominal_speed_, counts_, rng_);
    case SchedulerKind::RoundRobin: return round_robin_schedule(profile, up, cursor_);
    default: return random_schedule(profile, up, rng_);
  }
}

Placement BaselineScheduler::reschedule(const ApplicationProfile& profile, int task, const std::vector<DeviceId>& up,
                                        double now) {
  return schedule(single_task(profile, task), up, now).tasks.front();
}

void BaselineScheduler::completed(DeviceId device, int task, const Eigen::VectorXi&, double, double) {
  if (counts_.has(device) && counts_.row(device)(task) > 0) counts_.decrement(device, task);
}

void BaselineScheduler::device_down(DeviceId device, double) { counts_.remove_device(device); }

void BaselineScheduler::device_up(DeviceId device, double) { counts_.add_device(device); }

}  // namespace ibot
