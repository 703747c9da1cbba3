#pragma once

#include "ibot/core.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace ibot {

/// How the rate of an N-task batch landing on a queue of length i is derived
/// from the single-queue distribution.
///   ClosedForm: the closed form with tau cut-off, clamped at zero and scaled by lambda.
///   ExactExpectation: lambda times the probability that a tagged queue of length i
///     wins join-shortest-queue with uniform tie-breaking against Q-1 independent
///     queues drawn from pi.
enum class UpRateRule : std::uint8_t { ClosedForm, ExactExpectation };

const char* to_string(UpRateRule rule);
UpRateRule up_rate_rule_from_string(const std::string& s);

/// Homogeneous devices, N task types served in order with exponential rates mu.
struct ChainConfig {
  int N = 2;
  int Q = 3;
  double lambda_ = 10.0;
  std::vector<double> mu{10.0, 30.0};
  int truncation = 400;  // largest queue length kept
  double damping = 0.5;
  double tolerance = 1e-10;  // on the L1 change of pi between iterations
  int max_iterations = 10000;
  UpRateRule rule = UpRateRule::ExactExpectation;
};

/// Throws Error{ConfigError} for Q < 2, bad rates, or an unstable load.
void validate_chain(const ChainConfig& cfg);

/// (1/Q) * sum_k lambda / mu_k.
double utilisation(const ChainConfig& cfg);

/// Rate of the task in service when the queue holds i >= 1 tasks.
double service_rate_at(int i, int N, const std::vector<double>& mu);

/// Smallest j with sum_{l < j} pi_l >= 1/(Q-1); pi.size() + 1 if never reached.
int tau(const Eigen::Ref<const Eigen::VectorXd>& pi, int Q);

/// Batch arrival rate out of every state i under the configured rule.
/// Jumps that would leave the truncated range are dropped.
Eigen::VectorXd up_rates(const Eigen::Ref<const Eigen::VectorXd>& pi, const ChainConfig& cfg);

/// Generator of the truncated birth-and-jump chain whose jump rates come from pi.
Eigen::SparseMatrix<double> transition_rates(const Eigen::Ref<const Eigen::VectorXd>& pi, const ChainConfig& cfg);

/// L1 norm of pi^T G with G built from pi itself.
double balance_residual(const Eigen::Ref<const Eigen::VectorXd>& pi, const ChainConfig& cfg);

struct QueueChainSolution {
  Eigen::VectorXd pi;
  int tau = 0;
  double t_q_raw = 0.0;       // the double sum over task types and positions
  double t_q_per_task = 0.0;  // t_q_raw / N
  double residual = 0.0;
  int iterations = 0;
};

/// Damped fixed point from a geometric start. Throws Error{NoConvergence} or
/// Error{TruncationTooSmall} when the tail above 0.9 L keeps mass >= 1e-8.
QueueChainSolution solve_stationary(const ChainConfig& cfg);

/// The closed-form expected instance time over pi, truncated at pi's length.
double expected_instance_time(const Eigen::Ref<const Eigen::VectorXd>& pi, const ChainConfig& cfg);

enum class QueueDiscipline : std::uint8_t {
  Serial,     // one task at a time, FIFO
  Concurrent  // every queued task is served at its own rate at once
};

struct QueueSimConfig {
  double horizon = 2.0e4;  // simulated seconds
  int warmup_instances = 1000;
  std::uint64_t seed = 1;
  QueueDiscipline discipline = QueueDiscipline::Serial;
};

struct QueueSimResult {
  Eigen::VectorXd histogram;  // time-averaged queue-length distribution, length L+1, tail folded into L
  double mean_per_task = 0.0;  // mean over instances of the average task sojourn
  double mean_instance = 0.0;  // mean over instances of the last task's sojourn
  long long instances = 0;
};

/// Monte Carlo of the dispatch rule: each instance goes whole to a shortest
/// queue (uniform tie-break), tasks 1..N appended in order.
QueueSimResult simulate_queue(const ChainConfig& cfg, const QueueSimConfig& sim);

/// Half the L1 distance; the shorter vector is zero-padded.
double total_variation(const Eigen::Ref<const Eigen::VectorXd>& a, const Eigen::Ref<const Eigen::VectorXd>& b);

struct ComparisonRow {
  double lambda_ = 0.0;
  double t_raw = 0.0;
  double t_per_task = 0.0;
  double t_simulated = 0.0;  // serial discipline, per-task mean
  double tv = 0.0;           // solver pi against the simulated histogram
};

/// One row per lambda with everything else taken from `cfg`.
std::vector<ComparisonRow> compare_analysis_vs_simulation(const ChainConfig& cfg, const std::vector<double>& lambdas,
                                                          const QueueSimConfig& sim);

void write_comparison_csv(std::ostream& out, const std::vector<ComparisonRow>& rows);

}  // namespace ibot
