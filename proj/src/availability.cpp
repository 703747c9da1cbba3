#include "ibot/availability.hpp"

#include <algorithm>

namespace ibot {

void SmpModel::observe(Availability state, double age) {
  current_state = state;
  current_age = age;
}

void SmpModel::record(Availability state, double duration) {
  auto& samples = state == Availability::Up ? up_holding : down_holding;
  samples.insert(std::upper_bound(samples.begin(), samples.end(), duration), duration);
}

SmpModel fit_smp(const AvailabilityTrace& trace) {
  validate_trace(trace);
  SmpModel model;
  for (const auto& day : trace.days)
    for (const auto& span : day) {
      auto& samples = span.state == Availability::Up ? model.up_holding : model.down_holding;
      samples.push_back(span.duration);
    }
  if (model.up_holding.empty()) throw Error("EmptyHistory", "availability history has no up interval");
  std::sort(model.up_holding.begin(), model.up_holding.end());
  std::sort(model.down_holding.begin(), model.down_holding.end());
  for (auto day = trace.days.rbegin(); day != trace.days.rend(); ++day)
    if (!day->empty()) {
      model.current_state = day->back().state;
      break;
    }
  return model;
}

double reliability(const SmpModel& model, double t) { return reliability(model, model.current_age, t); }

double reliability(const SmpModel& model, double age, double t) {
  if (model.current_state == Availability::Down) return 0.0;
  const auto& u = model.up_holding;
  const auto beyond = [&](double x) { return static_cast<double>(u.end() - std::upper_bound(u.begin(), u.end(), x)); };
  const double alive = beyond(age);
  if (alive == 0.0) return 0.0;
  return beyond(age + std::max(t, 0.0)) / alive;
}

double t_max(const ApplicationProfile& profile, const std::vector<const ProfileRow*>& rows, CompositionMode mode) {
  if (rows.empty()) throw Error("NoDevices", "t_max needs at least one device row");
  double best = 0.0;
  for (const ProfileRow* row : rows)
    for (int i = 0; i < profile.size(); ++i) best = std::max(best, unloaded_service_time(*row, i, mode));
  return best;
}

}  // namespace ibot
