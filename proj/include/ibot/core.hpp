#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace ibot {

/// Error raised for every domain failure. `code` names the failure kind
/// (e.g. "EmptyProfile", "MissingEntry") so callers and tests can branch on it.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& what)
      : std::runtime_error(code + ": " + what), code_(std::move(code)) {}

  [[nodiscard]] const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

/// Dense device identifier assigned at registration. Rejoining devices keep it.
enum class DeviceId : std::int32_t {};

constexpr std::int32_t to_int(DeviceId id) noexcept { return static_cast<std::int32_t>(id); }
constexpr DeviceId device_id(std::int32_t v) noexcept { return static_cast<DeviceId>(v); }

struct TaskType {
  int index = 0;  // 1-based position in the application
  std::string name;
  int input_group = 0;
  double base_service_time = 0.0;  // seconds
};

/// An application: N typed tasks, dispatched in the listed order. Tasks that
/// share an input_group need the same input data.
struct ApplicationProfile {
  std::string name;
  std::vector<TaskType> tasks;
  /// 0-based task positions per input group, groups ordered by first member.
  std::vector<std::vector<int>> groups;

  [[nodiscard]] int size() const noexcept { return static_cast<int>(tasks.size()); }
};

/// Builds a profile and derives `groups` from the tasks' input_group ids.
ApplicationProfile make_profile(std::string name, std::vector<TaskType> tasks);

/// Throws Error{DuplicateTaskIndex | EmptyProfile | NonPositiveServiceTime |
/// BadGroups} when an invariant does not hold.
void validate_profile(const ApplicationProfile& profile);

/// Built-in workloads with the average per-task service times of the light,
/// medium and heavy applications. Names: "light", "medium", "heavy".
ApplicationProfile preset_profile(const std::string& name);
std::vector<std::string> preset_names();

struct ApplicationInstance {
  std::int64_t id = 0;
  double arrival_time = 0.0;
  const ApplicationProfile* profile = nullptr;
  std::vector<std::optional<double>> completion_time;
};

/// Affine interference curve f(k) = m * k + c.
struct InterferencePair {
  double m = 0.0;  // seconds per co-located task
  double c = 0.0;  // seconds

  [[nodiscard]] double at(double k) const noexcept { return m * k + c; }
  friend bool operator==(const InterferencePair&, const InterferencePair&) = default;
};

enum class EntryState : std::uint8_t { Measured, Reconstructed, Missing };

/// One device's N x N table of interference pairs. Entry (i, j) describes how
/// tasks of type j slow a new task of type i. Scalar-templated so oracle code
/// can evaluate in a wider type.
template <typename Scalar>
struct ProfileRowT {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  Matrix slope;      // m_ij
  Matrix intercept;  // c_ij
  std::vector<EntryState> mask;  // row-major (i * N + j)

  ProfileRowT() = default;
  explicit ProfileRowT(int n)
      : slope(Matrix::Zero(n, n)),
        intercept(Matrix::Zero(n, n)),
        mask(static_cast<std::size_t>(n) * static_cast<std::size_t>(n), EntryState::Missing) {}

  [[nodiscard]] int tasks() const noexcept { return static_cast<int>(slope.rows()); }
  [[nodiscard]] EntryState state(int i, int j) const { return mask[static_cast<std::size_t>(i * tasks() + j)]; }
  void set_state(int i, int j, EntryState s) { mask[static_cast<std::size_t>(i * tasks() + j)] = s; }

  [[nodiscard]] InterferencePair pair(int i, int j) const {
    return {static_cast<double>(slope(i, j)), static_cast<double>(intercept(i, j))};
  }
  void set_pair(int i, int j, const InterferencePair& p, EntryState s) {
    slope(i, j) = static_cast<Scalar>(p.m);
    intercept(i, j) = static_cast<Scalar>(p.c);
    set_state(i, j, s);
  }

  [[nodiscard]] bool complete() const {
    for (auto s : mask)
      if (s == EntryState::Missing) return false;
    return true;
  }
  [[nodiscard]] bool fully_measured() const {
    for (auto s : mask)
      if (s != EntryState::Measured) return false;
    return true;
  }

  friend bool operator==(const ProfileRowT& a, const ProfileRowT& b) {
    return a.slope.rows() == b.slope.rows() && a.slope == b.slope && a.intercept == b.intercept &&
           a.mask == b.mask;
  }
};

using ProfileRow = ProfileRowT<double>;

/// The orchestrator's matrix A: one row per registered device, keyed by id.
using ProfileMatrix = std::map<DeviceId, ProfileRow>;

/// Live count Z of tasks of each type per device.
class TaskCountMatrix {
 public:
  TaskCountMatrix() = default;
  explicit TaskCountMatrix(int tasks) : tasks_(tasks) {}

  [[nodiscard]] int tasks() const noexcept { return tasks_; }

  void add_device(DeviceId id);
  void remove_device(DeviceId id);
  [[nodiscard]] bool has(DeviceId id) const { return rows_.count(id) != 0; }

  /// Counts for one device (zeros if unknown).
  [[nodiscard]] Eigen::VectorXi row(DeviceId id) const;
  [[nodiscard]] int total(DeviceId id) const;
  [[nodiscard]] long long grand_total() const;

  void increment(DeviceId id, int task);
  /// Throws Error{NegativeCount} if the entry is already zero.
  void decrement(DeviceId id, int task);

  [[nodiscard]] const std::map<DeviceId, Eigen::VectorXi>& rows() const noexcept { return rows_; }

 private:
  int tasks_ = 0;
  std::map<DeviceId, Eigen::VectorXi> rows_;
};

enum class Availability : std::uint8_t { Up, Down };

struct AvailabilitySpan {
  Availability state = Availability::Up;
  double duration = 0.0;
};

/// Per-day alternating up/down spans.
struct AvailabilityTrace {
  std::vector<std::vector<AvailabilitySpan>> days;
};

/// Throws Error{BadTrace} on non-positive durations or non-alternating states.
void validate_trace(const AvailabilityTrace& trace);

struct CapacityEvent {
  double time = 0.0;
  double scale = 1.0;  // multiplies every true m and c from `time` on
};

/// Ground truth for one simulated device. Never visible to the orchestrator.
struct DeviceSpec {
  DeviceId id{};
  double network_delay = 0.0;
  ProfileRow true_row;
  std::vector<CapacityEvent> capacity_events;  // strictly time-ordered
  AvailabilityTrace history;                   // previous days, for SMP fitting
  std::vector<std::pair<double, Availability>> live_transitions;  // during the run
  double nominal_speed = 1.0;                  // only Petrel reads this

  /// Product of capacity scales with event time <= t.
  [[nodiscard]] double scale_at(double t) const;
};

/// Throws Error{BadDevice} when capacity events are unordered or scale <= 0.
void validate_device(const DeviceSpec& spec);

struct HyperParams {
  double lambda_ = 3.0;  // arrivals per second
  double delta = 0.10;
  double beta = 0.15;
  double gamma = 0.85;
  double profiling_budget = 60.0;  // seconds
  int running_avg_window = 50;
};

/// Throws Error{BadHyperParams}.
void validate_hyperparams(const HyperParams& p);

struct Placement {
  DeviceId device{};
  double expected_service_time = 0.0;
  friend bool operator==(const Placement&, const Placement&) = default;
};

/// Task position (0-based) -> device and expected service time.
struct Assignment {
  std::vector<Placement> tasks;
  friend bool operator==(const Assignment&, const Assignment&) = default;
};

}  // namespace ibot
