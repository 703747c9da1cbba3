#include "ibot/baselines.hpp"

namespace ibot {

namespace {

void require_devices(const std::vector<DeviceId>& eligible) {
  if (eligible.empty()) throw Error("NoEligibleDevice", "empty eligible set");
}

/// Running totals for the eligible devices, indexed like `eligible`.
std::vector<long long> totals_of(const std::vector<DeviceId>& eligible, const TaskCountMatrix& counts) {
  std::vector<long long> totals;
  totals.reserve(eligible.size());
  for (const DeviceId p : eligible) totals.push_back(counts.total(p));
  return totals;
}

}  // namespace

Assignment sqlf_schedule(const ApplicationProfile& profile, const std::vector<DeviceId>& eligible,
                         const TaskCountMatrix& counts) {
  require_devices(eligible);
  auto totals = totals_of(eligible, counts);
  Assignment out;
  for (int i = 0; i < profile.size(); ++i) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < eligible.size(); ++k)
      if (totals[k] < totals[best] || (totals[k] == totals[best] && to_int(eligible[k]) < to_int(eligible[best])))
        best = k;
    ++totals[best];
    out.tasks.push_back({eligible[best], 0.0});
  }
  return out;
}

Assignment petrel_schedule(const ApplicationProfile& profile, const std::vector<DeviceId>& eligible,
                           const std::map<DeviceId, double>& nominal_speed, const TaskCountMatrix& counts,
                           std::mt19937_64& rng) {
  require_devices(eligible);
  auto totals = totals_of(eligible, counts);
  auto speed = [&](std::size_t k) {
    auto it = nominal_speed.find(eligible[k]);
    return it == nominal_speed.end() ? 1.0 : it->second;
  };
  Assignment out;
  for (int i = 0; i < profile.size(); ++i) {
    const double base = profile.tasks[static_cast<std::size_t>(i)].base_service_time;
    auto estimate = [&](std::size_t k) { return (1.0 + static_cast<double>(totals[k])) * base / speed(k); };
    std::size_t pick = 0;
    if (eligible.size() > 1) {
      std::uniform_int_distribution<std::size_t> first(0, eligible.size() - 1);
      std::uniform_int_distribution<std::size_t> second(0, eligible.size() - 2);
      const std::size_t a = first(rng);
      std::size_t b = second(rng);
      if (b >= a) ++b;
      const double ea = estimate(a);
      const double eb = estimate(b);
      pick = (eb < ea || (eb == ea && to_int(eligible[b]) < to_int(eligible[a]))) ? b : a;
    }
    out.tasks.push_back({eligible[pick], estimate(pick)});
    ++totals[pick];
  }
  return out;
}

Assignment round_robin_schedule(const ApplicationProfile& profile, const std::vector<DeviceId>& eligible,
                                std::size_t& cursor) {
  require_devices(eligible);
  Assignment out;
  for (int i = 0; i < profile.size(); ++i) {
    out.tasks.push_back({eligible[cursor % eligible.size()], 0.0});
    cursor = (cursor + 1) % eligible.size();
  }
  return out;
}

Assignment random_schedule(const ApplicationProfile& profile, const std::vector<DeviceId>& eligible,
                           std::mt19937_64& rng) {
  require_devices(eligible);
  std::uniform_int_distribution<std::size_t> pick(0, eligible.size() - 1);
  Assignment out;
  for (int i = 0; i < profile.size(); ++i) out.tasks.push_back({eligible[pick(rng)], 0.0});
  return out;
}

}  // namespace ibot
