#pragma once

#include "ibot/orchestrator.hpp"
#include "ibot/profiling.hpp"
#include "ibot/scheduler.hpp"

#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <string>
#include <optional>
#include <vector>

namespace ibot {

enum class EventKind : std::uint8_t { DeviceDown = 0, DeviceUp = 1, CapacityChange = 2, Arrival = 3, TaskComplete = 4 };

/// Ordered by time, then kind priority, then insertion sequence.
struct Event {
  double time = 0.0;
  EventKind kind = EventKind::Arrival;
  std::uint64_t seq = 0;
  std::int64_t payload = 0;  // instance id, ticket id or device id

  friend bool operator>(const Event& a, const Event& b) {
    if (a.time != b.time) return a.time > b.time;
    if (a.kind != b.kind) return a.kind > b.kind;
    return a.seq > b.seq;
  }
};

/// Ground-truth device generator. Slopes are drawn per device and per pair;
/// intercepts are the preset base times scaled by a per-device speed factor.
struct GeneratorConfig {
  double slope_min = 0.0;
  double slope_max = 0.1;
  double speed_min = 0.5;  // multiplies every intercept; larger is slower
  double speed_max = 1.5;
  double delay_min = 0.005;
  double delay_max = 0.03;
};

/// Devices that leave and come back. `pct` is the fraction of devices that
/// churn; their up spells are uniform on up_mean * [1 - up_spread, 1 + up_spread]
/// and their down spells exponential. History days follow the same process.
struct ChurnConfig {
  double pct = 0.0;
  double start = 0.0;
  double up_mean = 60.0;
  double up_spread = 0.5;
  double down_mean = 20.0;
  int history_days = 5;
  double day_length = 3600.0;
};

/// Degradation windows. `pct` is the long-run fraction of device time spent
/// degraded; windows have exponential length with mean `window_mean` and
/// multiply the device's true times by `factor`.
struct CapacityConfig {
  double pct = 0.0;
  double start = 0.0;
  double window_mean = 20.0;
  double factor = 2.5;
};

enum class OverheadMode : std::uint8_t { Wall, Simulated };

/// Simulated orchestration cost: c0 + c1 * N * Q + c2 * gradient steps.
struct OverheadModel {
  OverheadMode mode = OverheadMode::Wall;
  double c0 = 2.0e-5;
  double c1 = 2.4e-6;
  double c2 = 1.0e-6;
};

struct Seeds {
  std::uint64_t devices = 1;
  std::uint64_t arrivals = 2;
  std::uint64_t scheduler = 3;
  std::uint64_t noise = 4;
};

struct ScenarioConfig {
  std::string profile = "heavy";
  int devices = 15;
  int instances = 500;
  HyperParams params;
  SchedulerKind scheduler = SchedulerKind::IbotPI;
  CompositionMode mode = CompositionMode::PaperLiteral;
  CountSemantics counts = CountSemantics::Snapshot;
  double learn_rate = 0.01;
  int readjust_steps_max = 100;
  double readjust_target = 0.01;
  double probe_cost = 4.0;  // seconds per probed pair
  int anchors = 3;          // devices profiled in full for ibot_i2
  CompletionConfig completion;
  GeneratorConfig generator;
  ChurnConfig churn;
  CapacityConfig capacity;
  double noise_sigma = 0.0;  // lognormal sigma on actual service times
  bool restart_on_redispatch = true;
  OverheadModel overhead;
  Seeds seeds;
};

/// Throws Error{ConfigError} naming the offending field.
void validate_scenario(const ScenarioConfig& cfg);

/// Ground truth for every device of the scenario. Rows, churn and capacity
/// draw from separate seeded streams so changing one knob leaves the others.
std::vector<DeviceSpec> generate_devices(const ScenarioConfig& cfg, const ApplicationProfile& profile);

/// Network delay plus the capacity-scaled composed service time on the true row and counts.
/// Noise is applied by the caller.
double actual_service_time(const DeviceSpec& spec, int task, const Eigen::Ref<const Eigen::VectorXi>& counts,
                           double time, CompositionMode mode);

struct InstanceMetrics {
  std::int64_t id = 0;
  double arrival = 0.0;
  std::optional<double> service_time;  // empty if the run ended first
  std::optional<double> running_avg;   // empty before the window fills
  double bw_overhead_pct = 0.0;
  double orch_overhead_s = 0.0;
};

struct MetricsRecord {
  std::vector<InstanceMetrics> instances;
  std::vector<long long> tasks_per_device;  // dispatches per device id
  double mean_service_time = 0.0;
  double mean_bw_overhead_pct = 0.0;
  double mean_orch_overhead_s = 0.0;
  double gini = 0.0;
  long long dispatches = 0;
  long long completions = 0;
  long long redispatches = 0;
  long long in_flight_at_end = 0;
  long long readjust_events = 0;
  long long gradient_steps = 0;
  int completed_instances = 0;
  double end_time = 0.0;
};

/// Builds the scheduler the scenario names, profiling devices as needed.
std::unique_ptr<Scheduler> make_scheduler(const ScenarioConfig& cfg, const ApplicationProfile& profile,
                                          const std::vector<DeviceSpec>& devices);

/// Runs the scenario to completion of every instance.
MetricsRecord run(const ScenarioConfig& cfg);
/// Same, on caller-supplied ground truth.
MetricsRecord run(const ScenarioConfig& cfg, const std::vector<DeviceSpec>& devices);

/// Sum over all pairs of |x_p - x_q| divided by 2 Q^2 mean. Throws Error{AllZero}.
double gini(const std::vector<long long>& counts);

/// Percentage of tasks in multi-member input groups that share a device with
/// no other member of their group. Zero when the profile has no such group.
double bandwidth_overhead_pct(const ApplicationProfile& profile, const Assignment& assignment);

void write_per_instance_csv(std::ostream& out, const MetricsRecord& record);
void write_summary_csv_header(std::ostream& out);
void write_summary_csv_row(std::ostream& out, const std::string& label, const MetricsRecord& record);

}  // namespace ibot
