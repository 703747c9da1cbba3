#pragma once

#include "ibot/core.hpp"
#include "ibot/interference.hpp"

#include <vector>

namespace ibot {

/// Two-state semi-Markov availability model with empirical holding times.
struct SmpModel {
  std::vector<double> up_holding;    // sorted ascending
  std::vector<double> down_holding;  // sorted ascending
  Availability current_state = Availability::Up;
  double current_age = 0.0;  // seconds spent in current_state

  /// Moves the live state; the age restarts on a change of state.
  void observe(Availability state, double age = 0.0);
  /// Adds a completed holding interval to the matching sample set.
  void record(Availability state, double duration);

  friend bool operator==(const SmpModel&, const SmpModel&) = default;
};

/// Pools the holding times of every span across days. The final span of each
/// day is right-censored by the day boundary but is kept as a sample. The
/// live state is the last span's state with age zero. Throws
/// Error{EmptyHistory} when no up span exists.
SmpModel fit_smp(const AvailabilityTrace& trace);

/// Probability the device stays up for the next `t` seconds given its
/// current state and age: #{u > age + t} / #{u > age}, zero when down or
/// when no sample exceeds the age.
double reliability(const SmpModel& model, double t);
/// Same, with `age` in place of the model's current_age.
double reliability(const SmpModel& model, double age, double t);

/// Largest zero-load expected service time over every task and every row.
/// Throws Error{NoDevices} on an empty set.
double t_max(const ApplicationProfile& profile, const std::vector<const ProfileRow*>& rows, CompositionMode mode);

}  // namespace ibot
