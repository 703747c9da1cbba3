#pragma once

#include "ibot/availability.hpp"
#include "ibot/core.hpp"
#include "ibot/interference.hpp"

#include <map>
#include <vector>

namespace ibot {

/// Which task counts the per-task argmins of one instance read.
/// Snapshot: the counts at instance arrival for every task.
/// Incremental: each assignment is counted before the next task is placed.
enum class CountSemantics : std::uint8_t { Snapshot, Incremental };

const char* to_string(CountSemantics s);
CountSemantics count_semantics_from_string(const std::string& s);

struct OrchestratorOptions {
  CompositionMode mode = CompositionMode::PaperLiteral;
  CountSemantics counts = CountSemantics::Snapshot;
  double learn_rate = 0.01;    // gradient step on the squared prediction error
  int readjust_steps_max = 100;  // gradient steps per triggering feedback event
  double readjust_target = 0.01;  // stop stepping once relative error is this small
};

/// Everything archived when a device leaves, restored verbatim on rejoin.
struct SavedDevice {
  ProfileRow row;
  SmpModel smp;
  double delay = 0.0;
  friend bool operator==(const SavedDevice&, const SavedDevice&) = default;
};

struct ReadjustStats {
  long long events = 0;  // feedback events that crossed delta
  long long steps = 0;   // gradient steps taken in total
};

/// The orchestrator's belief: matrix A, counts Z, availability models,
/// per-device network delay estimates, and archived rows of absent devices.
struct OrchestratorState {
  ProfileMatrix matrix;
  TaskCountMatrix counts;
  std::map<DeviceId, SmpModel> smp;
  std::map<DeviceId, double> up_since;  // simulated time the current up spell began
  std::map<DeviceId, double> delay;     // measured at profiling, seconds
  HyperParams params;
  OrchestratorOptions options;
  std::map<DeviceId, SavedDevice> saved_rows;
  ReadjustStats stats;

  OrchestratorState() = default;
  OrchestratorState(int tasks, HyperParams p, OrchestratorOptions o)
      : counts(tasks), params(p), options(o) {}
};

/// Adds a profiled device. `now` starts its current up spell.
void register_device(OrchestratorState& state, DeviceId id, ProfileRow row, double delay, SmpModel smp, double now);

/// Largest zero-load composed service time over all registered rows, network delay excluded.
double t_max(const OrchestratorState& state, const ApplicationProfile& profile);

/// Devices with R_p(t_max) > gamma, ascending id. Throws Error{NoEligibleDevice}.
std::vector<DeviceId> filter_available(const OrchestratorState& state, double t_max, double now);

/// Composed service time on the believed row plus the device's delay estimate.
double expected_time_on(const OrchestratorState& state, DeviceId device, int task,
                        const Eigen::Ref<const Eigen::VectorXi>& counts);

/// Per-task argmin over `eligible` in profile order, ties to the lowest id.
Assignment min_service_time_schedule(const ApplicationProfile& profile, const std::vector<DeviceId>& eligible,
                                     const OrchestratorState& state);

/// Pulls each group member onto the group's first-task device when the
/// relative increase in its expected time is at most beta.
Assignment reduce_bandwidth(const Assignment& assignment, const ApplicationProfile& profile,
                            const OrchestratorState& state);

/// Counts each task of `profile` would be scheduled against on `device`,
/// given the tasks already placed before it in `assignment`.
Eigen::VectorXi counts_for(const OrchestratorState& state, const Assignment& assignment, int task, DeviceId device);

/// Filter, argmin and bandwidth phases in order.
Assignment schedule_instance(const OrchestratorState& state, const ApplicationProfile& profile, double now);

/// Result-side feedback. When |st_exp - st_actual| / st_actual > delta,
/// runs gradient steps on (prediction - actual)^2 for task row `task` of
/// device `device`, with `x` the counts the prediction was made against.
/// Returns true iff an update was made.
bool online_readjust(OrchestratorState& state, int task, DeviceId device, double st_exp, double st_actual,
                     const Eigen::Ref<const Eigen::VectorXi>& x);

/// Archives the device and removes it from A, Z and the SMP map.
/// Throws Error{UnknownDevice} if it is not registered.
void device_exit(OrchestratorState& state, DeviceId device);

/// Restores an archived device verbatim. Throws Error{UnknownDevice} when no
/// archive exists, in which case the caller must profile it.
void device_rejoin(OrchestratorState& state, DeviceId device, double now);

}  // namespace ibot
