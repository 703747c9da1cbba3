#include "ibot/profiling.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace ibot {

ProbePlan probe_order(int n, double budget, double probe_cost) {
  if (!(probe_cost > 0.0)) throw Error("ConfigError", "probe cost must be positive");
  ProbePlan plan;
  plan.probe_cost = probe_cost;
  if (n <= 0 || !(budget > 0.0)) return plan;

  std::vector<std::pair<int, int>> all;
  for (int i = 0; i < n; ++i) all.emplace_back(i, i);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j) all.emplace_back(i, j);

  // Small slack so that budget == k * cost admits exactly k probes.
  const double fits = std::floor(budget / probe_cost + 1e-9);
  const auto count = static_cast<std::size_t>(std::min<double>(fits, static_cast<double>(all.size())));
  plan.pairs.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(count));
  return plan;
}

namespace {

InterferencePair probe_pair(ProbeRunner& runner, int i, int j) {
  const double low = runner.measure(i, j, kProbeLow);
  const double high = runner.measure(i, j, kProbeHigh);
  return fit_pair({kProbeLow, low}, {kProbeHigh, high}).pair;
}

ProfileRow measure_plan(int n, ProbeRunner& runner, const ProbePlan& plan) {
  ProfileRow row(n);
  for (const auto& [i, j] : plan.pairs) row.set_pair(i, j, probe_pair(runner, i, j), EntryState::Measured);
  return row;
}

}  // namespace

ProfileRow full_profile(int n, ProbeRunner& runner) {
  if (n <= 0) throw Error("EmptyProfile", "cannot profile zero task types");
  return measure_plan(n, runner, probe_order(n, std::numeric_limits<double>::infinity()));
}

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Entry {
  Eigen::Index row;
  Eigen::Index col;
  double value;
};

double dot(const double* a, const double* b, Eigen::Index k) {
  double s = 0.0;
  for (Eigen::Index t = 0; t < k; ++t) s += a[t] * b[t];
  return s;
}

// Solves (gram + ridge I) x = rhs in place for a tiny symmetric positive
// definite system held in the lower triangle of `gram`; `rhs` becomes x.
void cholesky_solve(Eigen::MatrixXd& gram, double ridge, double* rhs) {
  const Eigen::Index k = gram.rows();
  for (Eigen::Index j = 0; j < k; ++j) {
    double d = gram(j, j) + ridge;
    for (Eigen::Index t = 0; t < j; ++t) d -= gram(j, t) * gram(j, t);
    d = std::sqrt(std::max(d, 1e-300));
    gram(j, j) = d;
    for (Eigen::Index i = j + 1; i < k; ++i) {
      double v = gram(i, j);
      for (Eigen::Index t = 0; t < j; ++t) v -= gram(i, t) * gram(j, t);
      gram(i, j) = v / d;
    }
  }
  for (Eigen::Index i = 0; i < k; ++i) {
    double v = rhs[i];
    for (Eigen::Index t = 0; t < i; ++t) v -= gram(i, t) * rhs[t];
    rhs[i] = v / gram(i, i);
  }
  for (Eigen::Index i = k - 1; i >= 0; --i) {
    double v = rhs[i];
    for (Eigen::Index t = i + 1; t < k; ++t) v -= gram(t, i) * rhs[t];
    rhs[i] = v / gram(i, i);
  }
}

// One ridge pass over every row of `target` with `other` held fixed. Each
// row's normal matrix is the full Gram of `other` minus the rows it does not
// observe, which are few. Ridge weight is reg times the observed count, the
// stationary point of the per-entry SGD update.
void ridge_pass(RowMajor& target, const RowMajor& other, const Eigen::MatrixXd& observed_values,
                const std::vector<std::vector<Eigen::Index>>& unobserved, double reg, Eigen::MatrixXd& gram) {
  const Eigen::Index k = other.cols();
  const Eigen::MatrixXd full = other.transpose() * other;
  target.noalias() = observed_values * other;
  for (Eigen::Index r = 0; r < target.rows(); ++r) {
    const auto& gaps = unobserved[static_cast<std::size_t>(r)];
    const auto seen = other.rows() - static_cast<Eigen::Index>(gaps.size());
    double* x = target.row(r).data();
    if (seen == 0) {
      std::fill(x, x + k, 0.0);
      continue;
    }
    gram = full;
    for (const Eigen::Index t : gaps) {
      const double* o = other.row(t).data();
      for (Eigen::Index a = 0; a < k; ++a)
        for (Eigen::Index b = 0; b <= a; ++b) gram(a, b) -= o[a] * o[b];
    }
    cholesky_solve(gram, reg * static_cast<double>(seen) + 1e-12, x);
  }
}

}  // namespace

CompletionResult complete_matrix(const Eigen::MatrixXd& values,
                                 const Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>& observed,
                                 const CompletionConfig& cfg) {
  const Eigen::Index rows = values.rows();
  const Eigen::Index cols = values.cols();
  if (observed.rows() != rows || observed.cols() != cols)
    throw Error("ConfigError", "observation mask shape differs from the value matrix");
  if (cfg.rank < 1) throw Error("ConfigError", "completion rank must be positive");
  const Eigen::Index rank = std::min<Eigen::Index>(cfg.rank, std::min(rows, cols));

  std::vector<Entry> entries;
  double sum = 0.0;
  double sq = 0.0;
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c)
      if (observed(r, c)) {
        entries.push_back({r, c, values(r, c)});
        sum += values(r, c);
        sq += values(r, c) * values(r, c);
      }
  if (entries.empty()) throw Error("InsufficientAnchors", "no observed entries to complete from");
  const auto count = static_cast<double>(entries.size());

  // Work on unit-RMS values so step size and ridge weight do not depend on the time unit.
  const double scale = sq > 0.0 ? std::sqrt(sq / count) : 1.0;
  for (auto& e : entries) e.value /= scale;
  const double global_mean = sum / count / scale;

  // Mean imputation per column, falling back to the global observed mean.
  Eigen::MatrixXd imputed = Eigen::MatrixXd::Constant(rows, cols, global_mean);
  {
    Eigen::VectorXd col_sum = Eigen::VectorXd::Zero(cols);
    Eigen::VectorXi col_n = Eigen::VectorXi::Zero(cols);
    for (const auto& e : entries) {
      col_sum(e.col) += e.value;
      ++col_n(e.col);
    }
    for (Eigen::Index c = 0; c < cols; ++c)
      if (col_n(c) > 0) imputed.col(c).setConstant(col_sum(c) / col_n(c));
    for (const auto& e : entries) imputed(e.row, e.col) = e.value;
  }

  const Eigen::BDCSVD<Eigen::MatrixXd> svd(imputed, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd root_s = svd.singularValues().head(rank).cwiseSqrt();
  RowMajor p = svd.matrixU().leftCols(rank) * root_s.asDiagonal();
  RowMajor q = svd.matrixV().leftCols(rank) * root_s.asDiagonal();

  // Mean imputation drags partially observed rows toward the column means, so
  // the SVD start can sit far from the optimum for those rows. Alternating
  // ridge solves on the objective the SGD phase minimises close that gap in a
  // few passes.
  int sweeps = 0;
  if (!observed.all() && cfg.als_sweeps > 0) {
    Eigen::MatrixXd observed_values = Eigen::MatrixXd::Zero(rows, cols);
    for (const auto& e : entries) observed_values(e.row, e.col) = e.value;
    const Eigen::MatrixXd observed_t = observed_values.transpose();
    std::vector<std::vector<Eigen::Index>> row_gaps(static_cast<std::size_t>(rows));
    std::vector<std::vector<Eigen::Index>> col_gaps(static_cast<std::size_t>(cols));
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c)
        if (!observed(r, c)) {
          row_gaps[static_cast<std::size_t>(r)].push_back(c);
          col_gaps[static_cast<std::size_t>(c)].push_back(r);
        }
    Eigen::MatrixXd gram(rank, rank);
    // The factors can drift along the P A, Q A^-T ambiguity while the product
    // is settled, so convergence is judged on the filled-in values themselves.
    auto filled = [&] {
      std::vector<double> v;
      for (Eigen::Index r = 0; r < rows; ++r)
        for (const Eigen::Index c : row_gaps[static_cast<std::size_t>(r)])
          v.push_back(dot(p.row(r).data(), q.row(c).data(), rank));
      return v;
    };
    std::vector<double> last = filled();
    for (int sweep = 0; sweep < cfg.als_sweeps; ++sweep) {
      ridge_pass(p, q, observed_values, row_gaps, cfg.regularization, gram);
      ridge_pass(q, p, observed_t, col_gaps, cfg.regularization, gram);
      sweeps = sweep + 1;
      std::vector<double> now = filled();
      double change = 0.0;
      for (std::size_t t = 0; t < now.size(); ++t) change = std::max(change, std::abs(now[t] - last[t]));
      last = std::move(now);
      if (change < cfg.convergence_tol) break;
    }
  }

  std::mt19937_64 rng(cfg.seed);
  const double lr = cfg.learn_rate;
  const double reg = cfg.regularization;
  auto rmse = [&] {
    double sse = 0.0;
    for (const auto& e : entries) {
      const double err = e.value - dot(p.row(e.row).data(), q.row(e.col).data(), rank);
      sse += err * err;
    }
    return std::sqrt(sse / count);
  };

  CompletionResult out;
  double prev = rmse();
  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    std::shuffle(entries.begin(), entries.end(), rng);
    for (const auto& e : entries) {
      double* pr = p.row(e.row).data();
      double* qc = q.row(e.col).data();
      const double err = e.value - dot(pr, qc, rank);
      for (Eigen::Index t = 0; t < rank; ++t) {
        const double pt = pr[t];
        pr[t] += lr * (err * qc[t] - reg * pt);
        qc[t] += lr * (err * pt - reg * qc[t]);
      }
    }
    out.epochs = epoch + 1;
    const double now = rmse();
    const bool done = std::abs(prev - now) < cfg.convergence_tol;
    prev = now;
    if (done) break;
  }
  out.train_rmse = prev;
  out.sweeps = sweeps;
  out.estimate = scale * (p * q.transpose());
  out.row_factors = p;
  out.col_factors = q;
  return out;
}

Eigen::RowVectorXd flatten(const ProfileRow& row) {
  const int n = row.tasks();
  const Eigen::Index nn = static_cast<Eigen::Index>(n) * n;
  Eigen::RowVectorXd flat(2 * nn);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      flat(i * n + j) = row.slope(i, j);
      flat(nn + i * n + j) = row.intercept(i, j);
    }
  return flat;
}

ProfileRow complete_row(const ProfileRow& partial, const ProfileMatrix& existing, const CompletionConfig& cfg) {
  if (partial.complete()) return partial;

  const int n = partial.tasks();
  const Eigen::Index nn = static_cast<Eigen::Index>(n) * n;
  std::vector<const ProfileRow*> rows;
  int anchors = 0;
  for (const auto& [id, row] : existing) {
    if (row.tasks() != n) throw Error("ConfigError", "profile rows disagree on task count");
    rows.push_back(&row);
    if (row.fully_measured()) ++anchors;
  }
  if (anchors < cfg.rank)
    throw Error("InsufficientAnchors", "need " + std::to_string(cfg.rank) + " fully measured rows, have " +
                                           std::to_string(anchors));
  rows.push_back(&partial);

  const auto total_rows = static_cast<Eigen::Index>(rows.size());
  Eigen::MatrixXd values = Eigen::MatrixXd::Zero(total_rows, 2 * nn);
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> observed =
      Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(total_rows, 2 * nn, false);
  for (Eigen::Index r = 0; r < total_rows; ++r) {
    const ProfileRow& row = *rows[static_cast<std::size_t>(r)];
    values.row(r) = flatten(row);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (row.state(i, j) == EntryState::Measured) {
          observed(r, i * n + j) = true;
          observed(r, nn + i * n + j) = true;
        }
  }

  const CompletionResult fit = complete_matrix(values, observed, cfg);
  const Eigen::RowVectorXd est = fit.estimate.row(total_rows - 1);

  ProfileRow out = partial;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (partial.state(i, j) == EntryState::Measured) continue;
      const InterferencePair p{std::max(0.0, est(i * n + j)), std::max(1e-6, est(nn + i * n + j))};
      out.set_pair(i, j, p, EntryState::Reconstructed);
    }
  return out;
}

ProfileRow partial_profile_and_complete(int n, ProbeRunner& runner, double budget, double probe_cost,
                                        const ProfileMatrix& existing, const CompletionConfig& cfg) {
  const ProbePlan plan = probe_order(n, budget, probe_cost);
  if (plan.pairs.empty()) throw Error("BudgetTooSmall", "profiling budget admits no probe");
  return complete_row(measure_plan(n, runner, plan), existing, cfg);
}

}  // namespace ibot
