#pragma once

#include "ibot/core.hpp"
#include "ibot/interference.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <utility>
#include <vector>

namespace ibot {

/// Ordered (task, other) pairs to measure, 0-based, with a fixed cost each.
struct ProbePlan {
  std::vector<std::pair<int, int>> pairs;
  double probe_cost = 1.0;  // seconds per pair

  [[nodiscard]] double total_cost() const { return probe_cost * static_cast<double>(pairs.size()); }
};

/// Diagonal pairs first, then off-diagonal pairs in row-major order, truncated
/// to the longest prefix whose cost fits in `budget`.
ProbePlan probe_order(int n, double budget, double probe_cost = 1.0);

/// Runs interference probes on a live device.
class ProbeRunner {
 public:
  virtual ~ProbeRunner() = default;
  /// Service time (seconds) of a task of type `task` while `k` tasks of type
  /// `other` run alongside. Throws Error{DeviceLeft} if the device exits.
  virtual double measure(int task, int other, int k) = 0;
};

/// Measures and fits every one of the N^2 pairs. Errors from the runner
/// (DeviceLeft) propagate and no row is produced.
ProfileRow full_profile(int n, ProbeRunner& runner);

struct CompletionConfig {
  int rank = 3;
  double learn_rate = 0.01;
  double regularization = 0.002;  // per-entry L2 weight on unit-RMS values
  int max_epochs = 500;
  double convergence_tol = 1e-4;  // training-RMSE change per epoch; filled-value change per ridge pass
  int als_sweeps = 50;            // alternating ridge passes between the SVD start and SGD
  std::uint64_t seed = 7;
};

struct CompletionResult {
  Eigen::MatrixXd estimate;  // P * Q^T, same shape as the input
  Eigen::MatrixXd row_factors;
  Eigen::MatrixXd col_factors;
  int sweeps = 0;  // alternating ridge passes run before SGD
  int epochs = 0;
  double train_rmse = 0.0;
};

/// Low-rank completion of `values` on the entries flagged in `observed`:
/// mean imputation, truncated SVD initialisation of P and Q, alternating ridge
/// passes, then SGD on the observed entries with L2 regularisation. Values are
/// scaled to unit RMS internally; the factors are returned in that scale.
CompletionResult complete_matrix(const Eigen::MatrixXd& values,
                                 const Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>& observed,
                                 const CompletionConfig& cfg);

/// Flattens a row into the 2N^2 completion coordinates: slopes then intercepts,
/// each row-major.
Eigen::RowVectorXd flatten(const ProfileRow& row);

/// Fills the missing pairs of `partial` from the measured entries of `existing`.
/// Measured pairs are copied through untouched; filled pairs are clamped to
/// m >= 0, c > 0 and flagged Reconstructed. Throws Error{InsufficientAnchors}
/// when fewer than cfg.rank rows of `existing` are fully measured.
ProfileRow complete_row(const ProfileRow& partial, const ProfileMatrix& existing, const CompletionConfig& cfg);

/// Probes within `budget` and completes the rest. Throws Error{BudgetTooSmall}
/// when the budget admits no probe, plus the errors of complete_row.
ProfileRow partial_profile_and_complete(int n, ProbeRunner& runner, double budget, double probe_cost,
                                        const ProfileMatrix& existing, const CompletionConfig& cfg);

}  // namespace ibot
