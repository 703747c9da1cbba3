#include "ibot/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <random>

namespace ibot {

namespace {

/// Binomial coefficient as a double; Q is small.
double choose(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

/// Stationary distribution of the chain with fixed up rates. A cut between k and
/// k+1 is crossed downward only by the service at k+1 and upward by batches
/// from k-N+1..k, which gives a forward recursion.
Eigen::VectorXd cut_balance(const Eigen::VectorXd& up, const ChainConfig& cfg) {
  const int L = cfg.truncation;
  Eigen::VectorXd pi = Eigen::VectorXd::Zero(L + 1);
  pi(0) = 1.0;
  for (int k = 0; k < L; ++k) {
    double flow = 0.0;
    for (int i = std::max(0, k - cfg.N + 1); i <= k; ++i)
      if (i + cfg.N <= L) flow += pi(i) * up(i);
    pi(k + 1) = flow / service_rate_at(k + 1, cfg.N, cfg.mu);
  }
  return pi / pi.sum();
}

}  // namespace

const char* to_string(UpRateRule rule) {
  return rule == UpRateRule::ClosedForm ? "closed_form" : "exact";
}

UpRateRule up_rate_rule_from_string(const std::string& s) {
  if (s == "closed_form") return UpRateRule::ClosedForm;
  if (s == "exact") return UpRateRule::ExactExpectation;
  throw Error("ConfigError", "unknown up-rate rule '" + s + "'");
}

double utilisation(const ChainConfig& cfg) {
  double load = 0.0;
  for (const double m : cfg.mu) load += cfg.lambda_ / m;
  return load / cfg.Q;
}

void validate_chain(const ChainConfig& cfg) {
  if (cfg.N < 1) throw Error("ConfigError", "N must be at least 1");
  if (cfg.Q < 2) throw Error("ConfigError", "Q must be at least 2; the dispatch rule compares against other queues");
  if (static_cast<int>(cfg.mu.size()) != cfg.N) throw Error("ConfigError", "mu must have N entries");
  for (const double m : cfg.mu)
    if (!(m > 0.0)) throw Error("ConfigError", "service rates must be positive");
  if (!(cfg.lambda_ > 0.0)) throw Error("ConfigError", "lambda must be positive");
  if (!(utilisation(cfg) < 1.0)) throw Error("ConfigError", "load is not stable: (1/Q) sum lambda/mu >= 1");
  if (cfg.truncation < 2 * cfg.N) throw Error("ConfigError", "truncation too short for one batch");
  if (!(cfg.damping > 0.0) || cfg.damping > 1.0) throw Error("ConfigError", "damping must lie in (0, 1]");
  if (!(cfg.tolerance > 0.0) || cfg.max_iterations < 1)
    throw Error("ConfigError", "tolerance and iteration cap must be positive");
}

double service_rate_at(int i, int N, const std::vector<double>& mu) {
  const int type = ((i + N - 1) / N) * N - i + 1;
  return mu[static_cast<std::size_t>(type - 1)];
}

int tau(const Eigen::Ref<const Eigen::VectorXd>& pi, int Q) {
  // The slack keeps Q = 2 (bound 1) reachable despite rounding in the running sum.
  const double bound = 1.0 / (Q - 1) - 1e-12;
  double below = 0.0;  // sum over l < j
  for (int j = 0; j <= pi.size(); ++j) {
    if (below >= bound) return j;
    if (j < pi.size()) below += pi(j);
  }
  return static_cast<int>(pi.size()) + 1;
}

Eigen::VectorXd up_rates(const Eigen::Ref<const Eigen::VectorXd>& pi, const ChainConfig& cfg) {
  const int L = static_cast<int>(pi.size()) - 1;
  Eigen::VectorXd up = Eigen::VectorXd::Zero(L + 1);
  const int q1 = cfg.Q - 1;
  double below = 0.0;  // sum over l < i
  const int cut = cfg.rule == UpRateRule::ClosedForm ? tau(pi, cfg.Q) : L + 1;
  for (int i = 0; i + cfg.N <= L; ++i) {
    const double upto = below + pi(i);
    if (i < cut) {
      if (cfg.rule == UpRateRule::ClosedForm) {
        up(i) = std::max(0.0, cfg.lambda_ * (1.0 - q1 * below) / (1.0 + q1 * upto));
      } else {
        const double longer = std::max(0.0, 1.0 - upto);
        double win = 0.0;
        for (int k = 0; k <= q1; ++k)
          win += choose(q1, k) * std::pow(pi(i), k) * std::pow(longer, q1 - k) / (k + 1);
        up(i) = cfg.lambda_ * win;
      }
    }
    below = upto;
  }
  return up;
}

Eigen::SparseMatrix<double> transition_rates(const Eigen::Ref<const Eigen::VectorXd>& pi, const ChainConfig& cfg) {
  const int L = static_cast<int>(pi.size()) - 1;
  const Eigen::VectorXd up = up_rates(pi, cfg);
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(static_cast<std::size_t>(3 * (L + 1)));
  for (int i = 0; i <= L; ++i) {
    double out = 0.0;
    if (i >= 1) {
      const double d = service_rate_at(i, cfg.N, cfg.mu);
      t.emplace_back(i, i - 1, d);
      out += d;
    }
    if (i + cfg.N <= L && up(i) > 0.0) {
      t.emplace_back(i, i + cfg.N, up(i));
      out += up(i);
    }
    t.emplace_back(i, i, -out);
  }
  Eigen::SparseMatrix<double> g(L + 1, L + 1);
  g.setFromTriplets(t.begin(), t.end());
  return g;
}

double balance_residual(const Eigen::Ref<const Eigen::VectorXd>& pi, const ChainConfig& cfg) {
  const Eigen::SparseMatrix<double> g = transition_rates(pi, cfg);
  const Eigen::VectorXd flow = g.transpose() * pi;
  return flow.lpNorm<1>();
}

QueueChainSolution solve_stationary(const ChainConfig& cfg) {
  validate_chain(cfg);
  const int L = cfg.truncation;
  const double rho = utilisation(cfg);
  Eigen::VectorXd pi(L + 1);
  for (int i = 0; i <= L; ++i) pi(i) = (1.0 - rho) * std::pow(rho, i);
  pi /= pi.sum();

  QueueChainSolution sol;
  bool converged = false;
  for (int it = 1; it <= cfg.max_iterations; ++it) {
    const Eigen::VectorXd next = cfg.damping * cut_balance(up_rates(pi, cfg), cfg) + (1.0 - cfg.damping) * pi;
    const double change = (next - pi).lpNorm<1>();
    pi = next;
    sol.iterations = it;
    // A small step alone can stall short of balance when damping is strong, so
    // the residual against pi's own rates must also be within ten tolerances.
    if (change < cfg.tolerance && balance_residual(pi, cfg) <= 10.0 * cfg.tolerance) {
      converged = true;
      break;
    }
  }
  if (!converged) throw Error("NoConvergence", "fixed point did not settle within the iteration cap");
  const int tail_from = static_cast<int>(std::floor(0.9 * L)) + 1;
  if (pi.tail(L + 1 - tail_from).sum() >= 1e-8)
    throw Error("TruncationTooSmall", "more than 1e-8 of the mass sits above 0.9 L");

  sol.pi = pi;
  sol.tau = tau(pi, cfg.Q);
  sol.residual = balance_residual(pi, cfg);
  sol.t_q_raw = expected_instance_time(pi, cfg);
  sol.t_q_per_task = sol.t_q_raw / cfg.N;
  return sol;
}

double expected_instance_time(const Eigen::Ref<const Eigen::VectorXd>& pi, const ChainConfig& cfg) {
  const int L = static_cast<int>(pi.size()) - 1;
  const int N = cfg.N;
  std::vector<double> inv(static_cast<std::size_t>(N) + 1, 0.0);  // 1-based
  double cycle = 0.0;
  for (int m = 1; m <= N; ++m) {
    inv[static_cast<std::size_t>(m)] = 1.0 / cfg.mu[static_cast<std::size_t>(m - 1)];
    cycle += inv[static_cast<std::size_t>(m)];
  }
  auto range = [&](int lo, int hi) {
    double s = 0.0;
    for (int m = std::max(lo, 1); m <= std::min(hi, N); ++m) s += inv[static_cast<std::size_t>(m)];
    return s;
  };
  // at_least[k] = sum_{j >= k} pi_j
  std::vector<double> at_least(static_cast<std::size_t>(L) + 2, 0.0);
  for (int k = L; k >= 0; --k) at_least[static_cast<std::size_t>(k)] = at_least[static_cast<std::size_t>(k) + 1] + pi(k);

  double total = 0.0;
  for (int r = 0; r < N; ++r) {
    for (int i = 1; i <= L; ++i) {
      const int s = ((i + N - 1) / N) * N - i + 1 - r;
      double wait = ((i - 1) / N) * cycle;
      wait += s >= 1 ? range(s, N - r) : range(N - r, s + N);
      const double weight = std::pow(at_least[static_cast<std::size_t>(i - 1)], cfg.Q) -
                            std::pow(at_least[static_cast<std::size_t>(i)], cfg.Q);
      total += wait * weight;
    }
  }
  return total;
}

QueueSimResult simulate_queue(const ChainConfig& cfg, const QueueSimConfig& sim) {
  validate_chain(cfg);
  const int L = cfg.truncation;
  const int N = cfg.N;
  std::mt19937_64 rng(sim.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  struct Task {
    int type;
    long long instance;
  };
  struct Record {
    double arrival;
    int done;
    double sum;
    double last;
  };
  std::vector<std::vector<Task>> queues(static_cast<std::size_t>(cfg.Q));
  std::vector<Record> records;
  Eigen::VectorXd occupancy = Eigen::VectorXd::Zero(L + 1);
  QueueSimResult out;
  double per_task_sum = 0.0;
  double instance_sum = 0.0;

  auto rate_of = [&](const std::vector<Task>& q) {
    if (q.empty()) return 0.0;
    if (sim.discipline == QueueDiscipline::Serial) return cfg.mu[static_cast<std::size_t>(q.front().type - 1)];
    double r = 0.0;
    for (const Task& t : q) r += cfg.mu[static_cast<std::size_t>(t.type - 1)];
    return r;
  };

  double now = 0.0;
  std::vector<double> rates(static_cast<std::size_t>(cfg.Q), 0.0);
  while (now < sim.horizon) {
    double total = cfg.lambda_;
    for (int q = 0; q < cfg.Q; ++q) total += rates[static_cast<std::size_t>(q)] = rate_of(queues[static_cast<std::size_t>(q)]);
    const double dt = std::exponential_distribution<double>(total)(rng);
    for (const auto& q : queues) occupancy(std::min<int>(static_cast<int>(q.size()), L)) += dt;
    now += dt;

    double pick = unit(rng) * total;
    if (pick < cfg.lambda_) {
      std::size_t shortest = queues[0].size();
      for (const auto& q : queues) shortest = std::min(shortest, q.size());
      std::vector<int> ties;
      for (int q = 0; q < cfg.Q; ++q)
        if (queues[static_cast<std::size_t>(q)].size() == shortest) ties.push_back(q);
      const int target = ties[std::uniform_int_distribution<std::size_t>(0, ties.size() - 1)(rng)];
      const auto id = static_cast<long long>(records.size());
      records.push_back({now, 0, 0.0, 0.0});
      for (int type = 1; type <= N; ++type) queues[static_cast<std::size_t>(target)].push_back({type, id});
      continue;
    }
    pick -= cfg.lambda_;
    int device = 0;
    while (device + 1 < cfg.Q && pick >= rates[static_cast<std::size_t>(device)]) {
      pick -= rates[static_cast<std::size_t>(device)];
      ++device;
    }
    auto& q = queues[static_cast<std::size_t>(device)];
    std::size_t slot = 0;
    if (sim.discipline == QueueDiscipline::Concurrent) {
      while (slot + 1 < q.size() && pick >= cfg.mu[static_cast<std::size_t>(q[slot].type - 1)]) {
        pick -= cfg.mu[static_cast<std::size_t>(q[slot].type - 1)];
        ++slot;
      }
    }
    const Task t = q[slot];
    q.erase(q.begin() + static_cast<std::ptrdiff_t>(slot));
    Record& rec = records[static_cast<std::size_t>(t.instance)];
    const double sojourn = now - rec.arrival;
    rec.sum += sojourn;
    rec.last = std::max(rec.last, sojourn);
    if (++rec.done == N && t.instance >= sim.warmup_instances) {
      per_task_sum += rec.sum / N;
      instance_sum += rec.last;
      ++out.instances;
    }
  }
  out.histogram = occupancy / occupancy.sum();
  if (out.instances > 0) {
    out.mean_per_task = per_task_sum / static_cast<double>(out.instances);
    out.mean_instance = instance_sum / static_cast<double>(out.instances);
  }
  return out;
}

double total_variation(const Eigen::Ref<const Eigen::VectorXd>& a, const Eigen::Ref<const Eigen::VectorXd>& b) {
  const Eigen::Index n = std::max(a.size(), b.size());
  double sum = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double x = i < a.size() ? a(i) : 0.0;
    const double y = i < b.size() ? b(i) : 0.0;
    sum += std::abs(x - y);
  }
  return 0.5 * sum;
}

std::vector<ComparisonRow> compare_analysis_vs_simulation(const ChainConfig& cfg, const std::vector<double>& lambdas,
                                                          const QueueSimConfig& sim) {
  std::vector<ComparisonRow> rows;
  for (const double lambda : lambdas) {
    ChainConfig c = cfg;
    c.lambda_ = lambda;
    const auto sol = solve_stationary(c);
    QueueSimConfig s = sim;
    s.discipline = QueueDiscipline::Serial;
    const auto mc = simulate_queue(c, s);
    rows.push_back({lambda, sol.t_q_raw, sol.t_q_per_task, mc.mean_per_task, total_variation(sol.pi, mc.histogram)});
  }
  return rows;
}

void write_comparison_csv(std::ostream& out, const std::vector<ComparisonRow>& rows) {
  out << "lambda,T_analytical_raw,T_analytical_per_task,T_simulated\n";
  out << std::setprecision(10);
  for (const auto& r : rows) out << r.lambda_ << ',' << r.t_raw << ',' << r.t_per_task << ',' << r.t_simulated << '\n';
}

}  // namespace ibot
