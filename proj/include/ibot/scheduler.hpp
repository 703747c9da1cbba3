#pragma once

#include "ibot/baselines.hpp"
#include "ibot/orchestrator.hpp"

#include <memory>
#include <random>
#include <string>
#include <vector>

namespace ibot {

enum class SchedulerKind : std::uint8_t { IbotPI, IbotI2, Sqlf, Petrel, RoundRobin, Random };

const char* to_string(SchedulerKind kind);
/// Accepts ibot_pi, ibot_i2, sqlf, petrel, round_robin, random.
SchedulerKind scheduler_kind_from_string(const std::string& s);

/// The simulator's view of a placement policy. Every policy sees the same
/// event stream; only I-BOT consults availability models and feedback.
class Scheduler {
 public:
  virtual ~Scheduler() = default;

  [[nodiscard]] virtual SchedulerKind kind() const = 0;

  /// Places every task of a new instance. `up` lists the devices that are up,
  /// ascending. Throws Error{NoEligibleDevice} to ask for the instance to wait.
  virtual Assignment schedule(const ApplicationProfile& profile, const std::vector<DeviceId>& up, double now) = 0;

  /// Places one task again after its device left.
  virtual Placement reschedule(const ApplicationProfile& profile, int task, const std::vector<DeviceId>& up,
                               double now) = 0;

  /// Dispatch and result bookkeeping for Z. `x` is the count vector the
  /// task's service time was computed against.
  virtual void dispatched(DeviceId device, int task) = 0;
  virtual void completed(DeviceId device, int task, const Eigen::VectorXi& x, double st_exp, double st_actual) = 0;

  virtual void device_down(DeviceId device, double now) = 0;
  virtual void device_up(DeviceId device, double now) = 0;

  [[nodiscard]] virtual const TaskCountMatrix& counts() const = 0;
  [[nodiscard]] virtual ReadjustStats readjust_stats() const { return {}; }
};

/// I-BOT: Algorithm 1 placement plus gradient readjustment on results.
class IbotScheduler final : public Scheduler {
 public:
  IbotScheduler(SchedulerKind kind, OrchestratorState state) : kind_(kind), state_(std::move(state)) {}

  [[nodiscard]] SchedulerKind kind() const override { return kind_; }
  Assignment schedule(const ApplicationProfile& profile, const std::vector<DeviceId>& up, double now) override;
  Placement reschedule(const ApplicationProfile& profile, int task, const std::vector<DeviceId>& up,
                       double now) override;
  void dispatched(DeviceId device, int task) override;
  void completed(DeviceId device, int task, const Eigen::VectorXi& x, double st_exp, double st_actual) override;
  void device_down(DeviceId device, double now) override;
  void device_up(DeviceId device, double now) override;
  [[nodiscard]] const TaskCountMatrix& counts() const override { return state_.counts; }
  [[nodiscard]] ReadjustStats readjust_stats() const override { return state_.stats; }

  [[nodiscard]] const OrchestratorState& state() const { return state_; }

 private:
  SchedulerKind kind_;
  OrchestratorState state_;
  std::map<DeviceId, double> down_since_;
};

/// The four comparison policies. They keep their own Z and ignore feedback
/// and availability history.
class BaselineScheduler final : public Scheduler {
 public:
  BaselineScheduler(SchedulerKind kind, int tasks, std::map<DeviceId, double> nominal_speed, std::uint64_t seed);

  [[nodiscard]] SchedulerKind kind() const override { return kind_; }
  Assignment schedule(const ApplicationProfile& profile, const std::vector<DeviceId>& up, double now) override;
  Placement reschedule(const ApplicationProfile& profile, int task, const std::vector<DeviceId>& up,
                       double now) override;
  void dispatched(DeviceId device, int task) override { counts_.increment(device, task); }
  void completed(DeviceId device, int task, const Eigen::VectorXi& x, double st_exp, double st_actual) override;
  void device_down(DeviceId device, double now) override;
  void device_up(DeviceId device, double now) override;
  [[nodiscard]] const TaskCountMatrix& counts() const override { return counts_; }

 private:
  SchedulerKind kind_;
  TaskCountMatrix counts_;
  std::map<DeviceId, double> nominal_speed_;
  std::mt19937_64 rng_;
  std::size_t cursor_ = 0;
};

}  // namespace ibot
