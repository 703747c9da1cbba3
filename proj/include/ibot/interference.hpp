#pragma once

#include "ibot/core.hpp"

#include <Eigen/Core>

namespace ibot {

/// How the N pairwise curves of a task combine into one service time.
/// PaperLiteral sums every curve, intercepts included: sum_j (m_ij a_j + c_ij).
/// Marginal counts one base intercept plus the slope terms: c_ii + sum_j m_ij a_j.
enum class CompositionMode : std::uint8_t { PaperLiteral, Marginal };

const char* to_string(CompositionMode mode);
CompositionMode composition_mode_from_string(const std::string& s);

/// Expected service time of a new task of type `task` on a device whose
/// interference table is `row`, given `counts[j]` co-running tasks of type j.
/// Throws Error{MissingEntry} if any pair of the task's row is missing.
template <typename Scalar>
Scalar expected_service_time(const ProfileRowT<Scalar>& row, int task,
                             const Eigen::Ref<const Eigen::VectorXi>& counts, CompositionMode mode) {
  const int n = row.tasks();
  for (int j = 0; j < n; ++j)
    if (row.state(task, j) == EntryState::Missing)
      throw Error("MissingEntry", "pair (" + std::to_string(task + 1) + "," + std::to_string(j + 1) + ") is missing");

  Scalar total(0);
  if (mode == CompositionMode::PaperLiteral) {
    for (int j = 0; j < n; ++j) total += row.slope(task, j) * static_cast<Scalar>(counts(j)) + row.intercept(task, j);
  } else {
    total = row.intercept(task, task);
    for (int j = 0; j < n; ++j) total += row.slope(task, j) * static_cast<Scalar>(counts(j));
  }
  return total;
}

/// Expected service time with zero co-located tasks.
template <typename Scalar>
Scalar unloaded_service_time(const ProfileRowT<Scalar>& row, int task, CompositionMode mode) {
  return expected_service_time(row, task, Eigen::VectorXi::Zero(row.tasks()), mode);
}

struct ProbePoint {
  double k = 0.0;   // co-located task count
  double st = 0.0;  // observed service time, seconds
};

struct PairFit {
  InterferencePair pair;
  bool clamped = false;  // a negative fitted slope was raised to zero
};

/// Line through two probe observations. Throws Error{DegenerateProbe} when the
/// counts coincide and Error{NonPositiveProbe} when a service time is <= 0.
PairFit fit_pair(ProbePoint a, ProbePoint b);

/// Co-location levels used when probing a pair.
inline constexpr int kProbeLow = 0;
inline constexpr int kProbeHigh = 4;

}  // namespace ibot
