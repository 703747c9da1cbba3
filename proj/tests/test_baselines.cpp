#include "doctest.h"

#include "ibot/baselines.hpp"

#include <cmath>
#include <random>

using namespace ibot;

namespace {

std::vector<DeviceId> devices(int q) {
  std::vector<DeviceId> out;
  for (int p = 0; p < q; ++p) out.push_back(device_id(p));
  return out;
}

TaskCountMatrix counts_with(int tasks, const std::vector<int>& totals) {
  TaskCountMatrix z(tasks);
  for (std::size_t p = 0; p < totals.size(); ++p) {
    z.add_device(device_id(static_cast<int>(p)));
    for (int c = 0; c < totals[p]; ++c) z.increment(device_id(static_cast<int>(p)), c % tasks);
  }
  return z;
}

ApplicationProfile uniform_profile(int n, double base = 0.2) {
  std::vector<TaskType> tasks;
  for (int i = 1; i <= n; ++i) tasks.push_back({i, "t" + std::to_string(i), i, base});
  return make_profile("uniform", std::move(tasks));
}

std::vector<int> devices_of(const Assignment& a) {
  std::vector<int> out;
  for (const auto& t : a.tasks) out.push_back(to_int(t.device));
  return out;
}

}  // namespace

TEST_CASE("sqlf goes to the shortest total queue") {
  const auto one = uniform_profile(1);
  CHECK(devices_of(sqlf_schedule(one, devices(3), counts_with(1, {3, 1, 2}))) == std::vector<int>{1});

  const auto three = uniform_profile(3);
  const auto a = sqlf_schedule(three, devices(3), counts_with(3, {0, 0, 0}));
  CHECK(devices_of(a) == std::vector<int>{0, 1, 2});

  CHECK(devices_of(sqlf_schedule(three, devices(1), counts_with(3, {5}))) == std::vector<int>{0, 0, 0});

  // Tasks of the same instance count toward the queue they join.
  CHECK(devices_of(sqlf_schedule(three, devices(2), counts_with(3, {0, 1}))) == std::vector<int>{0, 0, 1});
  CHECK(devices_of(sqlf_schedule(three, devices(2), counts_with(3, {0, 2}))) == std::vector<int>{0, 0, 0});
}

TEST_CASE("petrel picks the faster of two sampled devices") {
  const auto one = uniform_profile(1);
  const std::map<DeviceId, double> speeds{{device_id(0), 1.0}, {device_id(1), 2.0}};
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    const auto a = petrel_schedule(one, devices(2), speeds, counts_with(1, {0, 0}), rng);
    CHECK(a.tasks[0].device == device_id(1));
    CHECK(a.tasks[0].expected_service_time == doctest::Approx(0.2 / 2.0));
  }
  // With queues the estimate is (1 + queued) * base / speed: 3*0.2/2 > 1*0.2/1.
  std::mt19937_64 rng(1);
  CHECK(petrel_schedule(one, devices(2), speeds, counts_with(1, {0, 2}), rng).tasks[0].device == device_id(0));

  std::mt19937_64 single(3);
  const auto three = uniform_profile(3);
  CHECK(devices_of(petrel_schedule(three, {device_id(4)}, {{device_id(4), 1.0}}, TaskCountMatrix(3), single)) ==
        std::vector<int>{4, 4, 4});
}

TEST_CASE("petrel is deterministic under a seed") {
  const auto p = uniform_profile(6);
  std::map<DeviceId, double> speeds;
  for (int q = 0; q < 8; ++q) speeds[device_id(q)] = 0.5 + 0.1 * q;
  std::mt19937_64 a(42), b(42);
  const auto z = counts_with(6, {1, 0, 2, 3, 0, 1, 4, 0});
  CHECK(petrel_schedule(p, devices(8), speeds, z, a) == petrel_schedule(p, devices(8), speeds, z, b));
}

TEST_CASE("round robin cycles and keeps its cursor") {
  const auto three = uniform_profile(3);
  std::size_t cursor = 0;
  auto first = devices_of(round_robin_schedule(three, devices(3), cursor));
  const auto second = devices_of(round_robin_schedule(three, devices(3), cursor));
  first.insert(first.end(), second.begin(), second.end());
  CHECK(first == std::vector<int>{0, 1, 2, 0, 1, 2});
  const auto two = uniform_profile(2);
  CHECK(devices_of(round_robin_schedule(two, devices(3), cursor)) == std::vector<int>{0, 1});
}

TEST_CASE("random placement") {
  const auto p = uniform_profile(5);
  std::mt19937_64 rng(7);
  CHECK(devices_of(random_schedule(p, {device_id(0)}, rng)) == std::vector<int>{0, 0, 0, 0, 0});

  const auto one = uniform_profile(1);
  std::mt19937_64 seeded(123);
  std::vector<int> hits(4, 0);
  const int n = 10000;
  for (int t = 0; t < n; ++t) ++hits[static_cast<std::size_t>(to_int(random_schedule(one, devices(4), seeded).tasks[0].device))];
  double chi2 = 0.0;
  for (const int h : hits) {
    CHECK(std::abs(static_cast<double>(h) / n - 0.25) <= 0.03);
    chi2 += (h - n / 4.0) * (h - n / 4.0) / (n / 4.0);
  }
  CHECK(chi2 < 16.27);  // 3 degrees of freedom, p = 0.001

  std::mt19937_64 a(9), b(9);
  CHECK(random_schedule(p, devices(6), a) == random_schedule(p, devices(6), b));
}
