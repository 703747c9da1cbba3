#pragma once

#include "ibot/core.hpp"

#include <functional>
#include <string>

namespace ibot::testing {

/// Error code thrown by `f`, or "" when it returns normally.
inline std::string code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return "";
}

/// Fully measured row with every slope `m` and every intercept `c`.
inline ProfileRow flat_row(int n, double m, double c) {
  ProfileRow row(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) row.set_pair(i, j, {m, c}, EntryState::Measured);
  return row;
}

/// Always-up history of `days` days, `length` seconds each.
inline AvailabilityTrace always_up(int days = 1, double length = 86400.0) {
  AvailabilityTrace trace;
  for (int d = 0; d < days; ++d) trace.days.push_back({{Availability::Up, length}});
  return trace;
}

}  // namespace ibot::testing
