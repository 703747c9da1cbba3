#include "doctest.h"
#include "support.hpp"

#include "ibot/orchestrator.hpp"
#include "ibot/simulator.hpp"

#include <cmath>
#include <limits>
#include <random>

using namespace ibot;
using ibot::testing::code_of;
using ibot::testing::flat_row;

namespace {

OrchestratorState state_with(const std::vector<ProfileRow>& rows, HyperParams params = {},
                             OrchestratorOptions options = {}, std::vector<double> delays = {}) {
  OrchestratorState state(rows.front().tasks(), params, options);
  const SmpModel always = fit_smp(ibot::testing::always_up());
  for (std::size_t p = 0; p < rows.size(); ++p)
    register_device(state, device_id(static_cast<int>(p)), rows[p], delays.empty() ? 0.0 : delays[p], always, 0.0);
  return state;
}

/// Row with c_ii = diag[i], every other entry zero slope and tiny intercept.
ProfileRow diagonal_row(const std::vector<double>& diag) {
  const int n = static_cast<int>(diag.size());
  ProfileRow row(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      row.set_pair(i, j, {0.0, i == j ? diag[static_cast<std::size_t>(i)] : 1e-3}, EntryState::Measured);
  return row;
}

ProfileRow random_row(int n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> slope(0.0, 0.1);
  std::uniform_real_distribution<double> base(0.05, 0.6);
  ProfileRow row(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) row.set_pair(i, j, {slope(rng), base(rng)}, EntryState::Measured);
  return row;
}

/// Composed service time written out term by term, independent of the library evaluator.
double oracle_time(const ProfileRow& row, int i, const Eigen::VectorXi& x, CompositionMode mode, double delay) {
  double st = delay;
  for (int j = 0; j < row.tasks(); ++j) {
    st += row.slope(i, j) * x(j);
    if (mode == CompositionMode::PaperLiteral || j == i) st += row.intercept(i, j);
  }
  return st;
}

/// Model whose survival is exactly `frac` at t = 1 with age 0.
SmpModel survival_at_one(int above, int total) {
  SmpModel m;
  for (int k = 0; k < total; ++k) m.up_holding.push_back(k < total - above ? 0.5 : 2.0);
  return m;
}

}  // namespace

TEST_CASE("filter_available keeps R strictly above gamma") {
  OrchestratorState state(1, {}, {});
  const int above[] = {18, 17, 4};  // R = 0.9, 0.85, 0.2 out of 20
  for (int p = 0; p < 3; ++p)
    register_device(state, device_id(p), flat_row(1, 0.0, 0.1), 0.0, survival_at_one(above[p], 20), 0.0);

  state.params.gamma = 0.85;
  CHECK(filter_available(state, 1.0, 0.0) == std::vector<DeviceId>{device_id(0)});

  state.params.gamma = 0.0;
  CHECK(filter_available(state, 1.0, 0.0).size() == 3);

  // Age advances with simulated time: at now = 1 every sample of 0.5 is behind us.
  state.params.gamma = 0.85;
  CHECK(filter_available(state, 0.5, 1.0).size() == 3);

  for (int p = 0; p < 3; ++p) state.smp[device_id(p)].observe(Availability::Down);
  state.params.gamma = 0.0;
  CHECK(code_of([&] { filter_available(state, 1.0, 0.0); }) == "NoEligibleDevice");
}

TEST_CASE("min_service_time_schedule picks the per-task argmin") {
  OrchestratorOptions marginal;
  marginal.mode = CompositionMode::Marginal;

  SUBCASE("two devices, delays included") {
    const auto p = make_profile("one", {{1, "t", 1, 0.3}});
    const auto state = state_with({flat_row(1, 0.0, 0.35), flat_row(1, 0.0, 0.2)}, {}, marginal, {0.05, 0.1});
    const auto a = min_service_time_schedule(p, {device_id(0), device_id(1)}, state);
    CHECK(a.tasks[0].device == device_id(1));
    CHECK(a.tasks[0].expected_service_time == doctest::Approx(0.3));
  }
  SUBCASE("identical devices tie to the lowest id") {
    const auto p = preset_profile("medium");
    const auto row = flat_row(p.size(), 0.02, 0.1);
    const auto state = state_with({row, row, row}, {}, marginal);
    const auto a = min_service_time_schedule(p, {device_id(0), device_id(1), device_id(2)}, state);
    for (const auto& t : a.tasks) CHECK(t.device == device_id(0));
  }
  SUBCASE("Q=3, N=2 random matrices against exhaustive enumeration") {
    const auto p = make_profile("pair", {{1, "a", 1, 0.1}, {2, "b", 2, 0.2}});
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<int> count(0, 4);
    for (const auto mode : {CompositionMode::PaperLiteral, CompositionMode::Marginal}) {
      for (int trial = 0; trial < 50; ++trial) {
        std::vector<ProfileRow> rows{random_row(2, rng), random_row(2, rng), random_row(2, rng)};
        const std::vector<double> delays{0.01, 0.02, 0.03};
        OrchestratorOptions opt;
        opt.mode = mode;
        auto state = state_with(rows, {}, opt, delays);
        for (int q = 0; q < 3; ++q)
          for (int k = 0; k < 2; ++k)
            for (int c = count(rng); c > 0; --c) state.counts.increment(device_id(q), k);

        double best = std::numeric_limits<double>::infinity();
        std::pair<int, int> pick{-1, -1};
        for (int d0 = 0; d0 < 3; ++d0)
          for (int d1 = 0; d1 < 3; ++d1) {
            const double total =
                oracle_time(rows[static_cast<std::size_t>(d0)], 0, state.counts.row(device_id(d0)), mode, delays[static_cast<std::size_t>(d0)]) +
                oracle_time(rows[static_cast<std::size_t>(d1)], 1, state.counts.row(device_id(d1)), mode, delays[static_cast<std::size_t>(d1)]);
            if (total < best) best = total, pick = {d0, d1};
          }
        const auto a = min_service_time_schedule(p, {device_id(0), device_id(1), device_id(2)}, state);
        CHECK(a.tasks[0].device == device_id(pick.first));
        CHECK(a.tasks[1].device == device_id(pick.second));
        CHECK(a.tasks[0].expected_service_time + a.tasks[1].expected_service_time == doctest::Approx(best));
      }
    }
  }
  SUBCASE("single device, single task") {
    const auto p = make_profile("one", {{1, "t", 1, 0.3}});
    const auto state = state_with({flat_row(1, 0.1, 0.3)});
    const auto a = schedule_instance(state, p, 0.0);
    REQUIRE(a.tasks.size() == 1);
    CHECK(a.tasks[0].device == device_id(0));
  }
}

TEST_CASE("snapshot counts let one instance pile onto a device, incremental spreads it") {
  const auto p = make_profile("pair", {{1, "a", 1, 0.1}, {2, "b", 2, 0.1}});
  const auto row = flat_row(2, 0.5, 0.1);
  OrchestratorOptions opt;
  opt.counts = CountSemantics::Snapshot;
  const auto snap = state_with({row, row}, {}, opt);
  const auto a = min_service_time_schedule(p, {device_id(0), device_id(1)}, snap);
  CHECK(a.tasks[0].device == device_id(0));
  CHECK(a.tasks[1].device == device_id(0));

  opt.counts = CountSemantics::Incremental;
  const auto inc = state_with({row, row}, {}, opt);
  const auto b = min_service_time_schedule(p, {device_id(0), device_id(1)}, inc);
  CHECK(b.tasks[0].device == device_id(0));
  CHECK(b.tasks[1].device == device_id(1));
}

TEST_CASE("reduce_bandwidth moves a member when the increase is within beta") {
  const auto p = make_profile("grouped", {{1, "a", 7, 0.5}, {2, "b", 7, 1.0}});
  OrchestratorOptions marginal;
  marginal.mode = CompositionMode::Marginal;
  HyperParams params;
  params.beta = 0.15;
  auto state = state_with({diagonal_row({0.5, 1.10}), diagonal_row({0.9, 1.0})}, params, marginal);
  const auto before = min_service_time_schedule(p, {device_id(0), device_id(1)}, state);
  REQUIRE(before.tasks[1].device == device_id(1));
  REQUIRE(before.tasks[1].expected_service_time == doctest::Approx(1.0));

  const auto moved = reduce_bandwidth(before, p, state);
  CHECK(moved.tasks[1].device == device_id(0));
  CHECK(moved.tasks[1].expected_service_time == doctest::Approx(1.10));
  CHECK(moved.tasks[0] == before.tasks[0]);

  state.params.beta = 0.05;
  CHECK(reduce_bandwidth(before, p, state) == before);
  state.params.beta = 0.0;
  CHECK(reduce_bandwidth(before, p, state) == before);

  // Already co-located: nothing to do.
  Assignment together = before;
  together.tasks[1] = {device_id(0), 1.10};
  state.params.beta = 1.0;
  CHECK(reduce_bandwidth(together, p, state) == together);
}

TEST_CASE("reduce_bandwidth never raises overhead or a task beyond beta") {
  const auto p = preset_profile("heavy");
  std::mt19937_64 rng(5);
  for (const double beta : {0.0, 0.05, 0.15, 0.5}) {
    for (int trial = 0; trial < 40; ++trial) {
      std::vector<ProfileRow> rows;
      for (int q = 0; q < 6; ++q) rows.push_back(random_row(p.size(), rng));
      HyperParams params;
      params.beta = beta;
      const auto state = state_with(rows, params);
      std::vector<DeviceId> all;
      for (int q = 0; q < 6; ++q) all.push_back(device_id(q));
      const auto before = min_service_time_schedule(p, all, state);
      const auto after = reduce_bandwidth(before, p, state);
      CHECK(bandwidth_overhead_pct(p, after) <= bandwidth_overhead_pct(p, before));
      for (std::size_t i = 0; i < before.tasks.size(); ++i) {
        const double rel = (after.tasks[i].expected_service_time - before.tasks[i].expected_service_time) /
                           before.tasks[i].expected_service_time;
        CHECK(rel <= beta + 1e-12);
      }
    }
  }
}

TEST_CASE("schedule_instance is deterministic") {
  const auto p = preset_profile("heavy");
  std::mt19937_64 rng(8);
  std::vector<ProfileRow> rows;
  for (int q = 0; q < 5; ++q) rows.push_back(random_row(p.size(), rng));
  auto state = state_with(rows);
  state.counts.increment(device_id(2), 3);
  CHECK(schedule_instance(state, p, 4.0) == schedule_instance(state, p, 4.0));
  const OrchestratorState copy = state;
  CHECK(schedule_instance(copy, p, 4.0) == schedule_instance(state, p, 4.0));
}

TEST_CASE("online_readjust trigger threshold") {
  const Eigen::VectorXi x = Eigen::VectorXi::Zero(2);
  auto state = state_with({flat_row(2, 0.05, 0.5)});
  const ProfileRow before = state.matrix.at(device_id(0));
  CHECK_FALSE(online_readjust(state, 0, device_id(0), 1.0, 1.0, x));
  CHECK_FALSE(online_readjust(state, 0, device_id(0), 1.0, 1.05, x));  // 0.048 <= 0.10
  CHECK(state.matrix.at(device_id(0)) == before);
  CHECK(state.stats.events == 0);
  CHECK(code_of([&] { online_readjust(state, 0, device_id(0), 1.0, 0.0, x); }) == "ConfigError");
  // Unknown device: result arriving after exit is dropped.
  CHECK_FALSE(online_readjust(state, 0, device_id(9), 1.0, 2.0, x));
}

TEST_CASE("one gradient step lowers the squared loss") {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> count(0, 3);
  std::uniform_real_distribution<double> factor(0.5, 1.6);
  for (const auto mode : {CompositionMode::PaperLiteral, CompositionMode::Marginal}) {
    for (int trial = 0; trial < 100; ++trial) {
      const ProfileRow row = random_row(4, rng);
      OrchestratorOptions opt;
      opt.mode = mode;
      opt.readjust_steps_max = 1;
      auto state = state_with({row}, {}, opt, {0.01});
      Eigen::VectorXi x(4);
      for (auto& v : x) v = count(rng);
      const int task = trial % 4;
      const double pred = oracle_time(row, task, x, mode, 0.01);
      const double actual = pred * factor(rng);
      if (std::abs(pred - actual) / actual <= state.params.delta) continue;
      REQUIRE(online_readjust(state, task, device_id(0), pred, actual, x));
      const double after = oracle_time(state.matrix.at(device_id(0)), task, x, mode, 0.01);
      CHECK((after - actual) * (after - actual) < (pred - actual) * (pred - actual));
      CHECK(state.stats.steps == 1);
      // Other rows of the matrix are untouched.
      for (int i = 0; i < 4; ++i)
        if (i != task) CHECK(state.matrix.at(device_id(0)).slope.row(i) == row.slope.row(i));
      CHECK((state.matrix.at(device_id(0)).slope.array() >= 0.0).all());
      CHECK((state.matrix.at(device_id(0)).intercept.array() > 0.0).all());
    }
  }
}

TEST_CASE("repeated feedback converges to a perturbed truth") {
  const auto p = preset_profile("heavy");
  const int n = p.size();
  std::mt19937_64 rng(4);
  const ProfileRow truth = random_row(n, rng);
  ProfileRow believed = truth;
  believed.intercept *= 1.5;
  Eigen::VectorXi x(n);
  for (int j = 0; j < n; ++j) x(j) = j % 3;

  auto converge = [&](OrchestratorOptions opt, double delta) {
    HyperParams params;
    params.delta = delta;
    auto state = state_with({believed}, params, opt);
    for (int event = 0; event < 200; ++event)
      for (int i = 0; i < n; ++i) {
        const double actual = oracle_time(truth, i, x, opt.mode, 0.0);
        online_readjust(state, i, device_id(0), expected_time_on(state, device_id(0), i, x), actual, x);
      }
    double worst = 0.0;
    for (int i = 0; i < n; ++i) {
      const double actual = oracle_time(truth, i, x, opt.mode, 0.0);
      worst = std::max(worst, std::abs(expected_time_on(state, device_id(0), i, x) - actual) / actual);
    }
    return worst;
  };

  OrchestratorOptions multi;
  CHECK(converge(multi, 0.10) <= 0.05);
  OrchestratorOptions single;
  single.readjust_steps_max = 1;
  CHECK(converge(single, 0.02) <= 0.05);
}

TEST_CASE("device exit and rejoin") {
  std::mt19937_64 rng(6);
  auto state = state_with({random_row(3, rng), random_row(3, rng)}, {}, {}, {0.01, 0.02});
  const ProfileRow row = state.matrix.at(device_id(1));
  const SmpModel smp = state.smp.at(device_id(1));
  state.counts.increment(device_id(1), 2);

  device_exit(state, device_id(1));
  CHECK(state.matrix.count(device_id(1)) == 0);
  CHECK_FALSE(state.counts.has(device_id(1)));
  CHECK(state.smp.count(device_id(1)) == 0);
  CHECK(state.saved_rows.at(device_id(1)).row == row);
  CHECK(code_of([&] { device_exit(state, device_id(1)); }) == "UnknownDevice");

  device_rejoin(state, device_id(1), 50.0);
  CHECK(state.matrix.at(device_id(1)) == row);
  CHECK(state.matrix.at(device_id(1)).slope == row.slope);  // bit-exact
  CHECK(state.delay.at(device_id(1)) == 0.02);
  CHECK(state.smp.at(device_id(1)).up_holding == smp.up_holding);
  CHECK(state.up_since.at(device_id(1)) == 50.0);
  CHECK(state.counts.total(device_id(1)) == 0);
  CHECK(state.saved_rows.empty());

  CHECK(code_of([&] { device_rejoin(state, device_id(7), 0.0); }) == "UnknownDevice");
  CHECK(code_of([&] { device_rejoin(state, device_id(1), 0.0); }) == "UnknownDevice");
}

TEST_CASE("register_device refuses incomplete rows") {
  OrchestratorState state(2, {}, {});
  ProfileRow row(2);
  row.set_pair(0, 0, {0.0, 0.1}, EntryState::Measured);
  CHECK(code_of([&] { register_device(state, device_id(0), row, 0.0, {}, 0.0); }) == "MissingEntry");
  CHECK(code_of([&] { schedule_instance(state, preset_profile("light"), 0.0); }) == "NoEligibleDevice");
}
