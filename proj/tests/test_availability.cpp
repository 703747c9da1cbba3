#include "doctest.h"
#include "support.hpp"

#include "ibot/availability.hpp"

#include <algorithm>
#include <cmath>
#include <random>

using namespace ibot;
using ibot::testing::code_of;

namespace {

SmpModel model_of(std::vector<double> ups, double age = 0.0) {
  SmpModel m;
  std::sort(ups.begin(), ups.end());
  m.up_holding = std::move(ups);
  m.observe(Availability::Up, age);
  return m;
}

std::vector<double> exponential_samples(double mean, int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::exponential_distribution<double> d(1.0 / mean);
  std::vector<double> v(static_cast<std::size_t>(n));
  for (auto& x : v) x = d(rng);
  return v;
}

}  // namespace

TEST_CASE("fit_smp pools holding times across days") {
  AvailabilityTrace trace;
  for (int d = 0; d < 5; ++d)
    trace.days.push_back({{Availability::Up, 3600.0}, {Availability::Down, 600.0}});
  const SmpModel m = fit_smp(trace);
  CHECK(std::count(m.up_holding.begin(), m.up_holding.end(), 3600.0) >= 5);
  CHECK(std::count(m.down_holding.begin(), m.down_holding.end(), 600.0) == 5);
  CHECK(m.current_state == Availability::Down);
  CHECK(m.current_age == 0.0);
}

TEST_CASE("always-up day has no down samples") {
  const SmpModel m = fit_smp(ibot::testing::always_up());
  CHECK(m.down_holding.empty());
  CHECK(m.up_holding.size() == 1);
  CHECK(reliability(m, 100.0) == 1.0);
  CHECK(reliability(m, 86400.0) == 0.0);
}

TEST_CASE("fit_smp needs an up span") {
  AvailabilityTrace none;
  CHECK(code_of([&] { fit_smp(none); }) == "EmptyHistory");
  AvailabilityTrace down_only;
  down_only.days.push_back({{Availability::Down, 10.0}});
  CHECK(code_of([&] { fit_smp(down_only); }) == "EmptyHistory");
}

TEST_CASE("reliability edge cases") {
  const SmpModel up = model_of({10.0, 20.0, 30.0});
  CHECK(reliability(up, 0.0) == 1.0);

  SmpModel down = up;
  down.observe(Availability::Down, 1.0);
  CHECK(reliability(down, 0.0) == 0.0);

  // Age past every sample: empty denominator gives zero.
  CHECK(reliability(model_of({10.0, 20.0}, 25.0), 0.0) == 0.0);

  // Counting convention: #{u > age + t} / #{u > age}.
  CHECK(reliability(model_of({10.0, 20.0, 30.0, 40.0}, 15.0), 10.0) == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("exponential up-times give memoryless reliability") {
  const double mean = 1800.0;
  const auto samples = exponential_samples(mean, 10000, 17);
  for (const double age : {0.0, 600.0, 2000.0})
    for (const double t : {100.0, 900.0, 1800.0, 3600.0}) {
      const double r = reliability(model_of(samples, age), t);
      CHECK(std::abs(r - std::exp(-t / mean)) <= 0.03);
    }
}

TEST_CASE("fitted survival is within KS distance 0.05 of the exponential") {
  const double mean = 1800.0;
  AvailabilityTrace trace;
  for (const double u : exponential_samples(mean, 10000, 5))
    trace.days.push_back({{Availability::Up, u}, {Availability::Down, 1.0}});
  SmpModel m = fit_smp(trace);
  m.observe(Availability::Up, 0.0);
  const auto& s = m.up_holding;
  double ks = 0.0;
  const double n = static_cast<double>(s.size());
  for (std::size_t k = 0; k < s.size(); ++k) {
    const double cdf = 1.0 - std::exp(-s[k] / mean);
    ks = std::max({ks, std::abs(static_cast<double>(k + 1) / n - cdf), std::abs(static_cast<double>(k) / n - cdf)});
  }
  CHECK(ks <= 0.05);
  // The same samples drive reliability.
  CHECK(reliability(m, mean) == doctest::Approx(1.0 - static_cast<double>(std::upper_bound(s.begin(), s.end(), mean) -
                                                                            s.begin()) /
                                                          n));
}

TEST_CASE("reliability is bounded and non-increasing in t") {
  const auto samples = exponential_samples(300.0, 500, 9);
  for (const double age : {0.0, 50.0, 400.0}) {
    const SmpModel m = model_of(samples, age);
    double prev = 1.0;
    for (double t = 0.0; t <= 3000.0; t += 7.5) {
      const double r = reliability(m, t);
      CHECK(r >= 0.0);
      CHECK(r <= 1.0);
      CHECK(r <= prev);
      prev = r;
    }
  }
}

TEST_CASE("scaling durations by k scales level-crossing times by k") {
  const auto base = exponential_samples(120.0, 400, 21);
  const double k = 3.5;
  std::vector<double> scaled = base;
  for (auto& x : scaled) x *= k;
  const SmpModel a = model_of(base, 30.0);
  const SmpModel b = model_of(scaled, 30.0 * k);
  for (double t = 0.0; t <= 600.0; t += 5.0) CHECK(reliability(a, t) == reliability(b, t * k));
}

TEST_CASE("t_max over rows") {
  SUBCASE("heavy preset, one device, marginal: largest intercept") {
    const auto heavy = preset_profile("heavy");
    ProfileRow row(heavy.size());
    for (int i = 0; i < heavy.size(); ++i)
      for (int j = 0; j < heavy.size(); ++j)
        row.set_pair(i, j, {0.01, heavy.tasks[static_cast<std::size_t>(i)].base_service_time},
                     EntryState::Measured);
    CHECK(t_max(heavy, {&row}, CompositionMode::Marginal) == doctest::Approx(0.60));
  }
  SUBCASE("one task, one device") {
    const auto p = make_profile("one", {{1, "t", 1, 0.25}});
    const ProfileRow row = ibot::testing::flat_row(1, 0.2, 0.25);
    CHECK(t_max(p, {&row}, CompositionMode::Marginal) == doctest::Approx(0.25));
    CHECK(t_max(p, {&row}, CompositionMode::PaperLiteral) == doctest::Approx(0.25));
  }
  SUBCASE("dominating device decides") {
    const auto p = make_profile("two", {{1, "a", 1, 0.1}, {2, "b", 2, 0.2}});
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.05, 0.5);
    ProfileRow r1(2), r2(2);
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) {
        const double c = u(rng);
        r1.set_pair(i, j, {0.0, c}, EntryState::Measured);
        r2.set_pair(i, j, {0.0, c + 0.1}, EntryState::Measured);
      }
    for (const auto mode : {CompositionMode::Marginal, CompositionMode::PaperLiteral}) {
      double oracle = 0.0;
      for (const ProfileRow* r : {&r1, &r2})
        for (int i = 0; i < 2; ++i) oracle = std::max(oracle, unloaded_service_time(*r, i, mode));
      CHECK(oracle == doctest::Approx(std::max(unloaded_service_time(r2, 0, mode),
                                               unloaded_service_time(r2, 1, mode))));
      CHECK(t_max(p, {&r1, &r2}, mode) == doctest::Approx(oracle));
    }
  }
  SUBCASE("no rows") {
    const auto p = preset_profile("light");
    CHECK(code_of([&] { t_max(p, {}, CompositionMode::Marginal); }) == "NoDevices");
  }
}
