#include "doctest.h"

#include "ibot/core.hpp"

#include <functional>

using namespace ibot;

namespace {

std::string code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return "";
}

}  // namespace

TEST_CASE("heavy preset validates and groups its forward-camera tasks") {
  const auto heavy = preset_profile("heavy");
  CHECK_NOTHROW(validate_profile(heavy));
  REQUIRE(heavy.size() == 6);
  REQUIRE(heavy.groups.size() == 4);
  CHECK(heavy.groups[3] == std::vector<int>{3, 4, 5});
  CHECK(heavy.tasks[4].base_service_time == doctest::Approx(0.60));
}

TEST_CASE("every preset validates") {
  for (const auto& name : preset_names()) CHECK_NOTHROW(validate_profile(preset_profile(name)));
  CHECK(code_of([] { preset_profile("ultra"); }) == "UnknownPreset");
}

TEST_CASE("profile validation errors") {
  CHECK(code_of([] { validate_profile(make_profile("empty", {})); }) == "EmptyProfile");
  CHECK(code_of([] { validate_profile(make_profile("neg", {{1, "a", 1, -1.0}})); }) == "NonPositiveServiceTime");
  CHECK(code_of([] { validate_profile(make_profile("dup", {{1, "a", 1, 0.1}, {1, "b", 2, 0.1}})); }) ==
        "DuplicateTaskIndex");
  auto broken = make_profile("p", {{1, "a", 1, 0.1}, {2, "b", 1, 0.2}});
  broken.groups = {{0}};
  CHECK(code_of([&] { validate_profile(broken); }) == "BadGroups");
}

TEST_CASE("task counts track dispatches and refuse to go negative") {
  TaskCountMatrix z(3);
  z.add_device(device_id(0));
  z.add_device(device_id(1));
  z.increment(device_id(1), 2);
  z.increment(device_id(1), 2);
  z.increment(device_id(0), 0);
  CHECK(z.total(device_id(1)) == 2);
  CHECK(z.grand_total() == 3);
  z.decrement(device_id(1), 2);
  CHECK(z.row(device_id(1))(2) == 1);
  CHECK(code_of([&] { z.decrement(device_id(0), 1); }) == "NegativeCount");
  z.remove_device(device_id(0));
  CHECK_FALSE(z.has(device_id(0)));
  CHECK(z.row(device_id(0)).sum() == 0);
}

TEST_CASE("capacity scale folds every event up to t") {
  DeviceSpec d;
  d.capacity_events = {{10.0, 2.0}, {20.0, 0.5}, {30.0, 3.0}};
  CHECK(d.scale_at(5.0) == 1.0);
  CHECK(d.scale_at(10.0) == 2.0);
  CHECK(d.scale_at(25.0) == 1.0);
  CHECK(d.scale_at(31.0) == 3.0);
  CHECK_NOTHROW(validate_device(d));
  d.capacity_events.push_back({30.0, 1.0});
  CHECK(code_of([&] { validate_device(d); }) == "BadDevice");
}

TEST_CASE("trace and hyperparameter validation") {
  AvailabilityTrace ok{{{{Availability::Up, 5.0}, {Availability::Down, 1.0}}}};
  CHECK_NOTHROW(validate_trace(ok));
  AvailabilityTrace same{{{{Availability::Up, 5.0}, {Availability::Up, 1.0}}}};
  CHECK(code_of([&] { validate_trace(same); }) == "BadTrace");
  AvailabilityTrace zero{{{{Availability::Up, 0.0}}}};
  CHECK(code_of([&] { validate_trace(zero); }) == "BadTrace");

  HyperParams p;
  CHECK(p.lambda_ == 3.0);
  CHECK(p.running_avg_window == 50);
  CHECK_NOTHROW(validate_hyperparams(p));
  p.gamma = 1.5;
  CHECK(code_of([&] { validate_hyperparams(p); }) == "BadHyperParams");
}
