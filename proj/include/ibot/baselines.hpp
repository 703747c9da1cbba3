#pragma once

#include "ibot/core.hpp"

#include <map>
#include <random>
#include <vector>

namespace ibot {

/// Shortest queue first: each task goes to the eligible device with the
/// fewest running tasks, counting the tasks placed earlier in the same
/// instance. Ties go to the lowest id.
Assignment sqlf_schedule(const ApplicationProfile& profile, const std::vector<DeviceId>& eligible,
                         const TaskCountMatrix& counts);

/// Power of two choices: per task, sample two distinct eligible devices and
/// keep the one with the smaller (1 + queued) * base_time / nominal_speed.
/// Tasks placed earlier in the instance count as queued.
Assignment petrel_schedule(const ApplicationProfile& profile, const std::vector<DeviceId>& eligible,
                           const std::map<DeviceId, double>& nominal_speed, const TaskCountMatrix& counts,
                           std::mt19937_64& rng);

/// Cyclic placement over `eligible`; `cursor` persists across instances.
Assignment round_robin_schedule(const ApplicationProfile& profile, const std::vector<DeviceId>& eligible,
                                std::size_t& cursor);

/// Uniform placement over `eligible`.
Assignment random_schedule(const ApplicationProfile& profile, const std::vector<DeviceId>& eligible,
                           std::mt19937_64& rng);

}  // namespace ibot
