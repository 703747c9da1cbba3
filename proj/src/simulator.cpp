#include "ibot/simulator.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <iomanip>
#include <limits>
#include <ostream>
#include <queue>
#include <set>
#include <sstream>

namespace ibot {

namespace {

/// Independent stream per purpose so one knob does not reshuffle the others.
std::mt19937_64 stream(std::uint64_t seed, std::uint64_t purpose) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(purpose)};
  return std::mt19937_64(seq);
}

enum Stream : std::uint64_t { kRows = 1, kChurnPick = 2, kChurn = 3, kCapacity = 4, kProbeNoise = 5 };

/// Alternating up/down spans covering [0, length), starting up.
std::vector<AvailabilitySpan> churn_day(const ChurnConfig& c, double length, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> up(c.up_mean * (1.0 - c.up_spread), c.up_mean * (1.0 + c.up_spread));
  std::exponential_distribution<double> down(1.0 / c.down_mean);
  std::vector<AvailabilitySpan> day;
  double t = 0.0;
  bool is_up = true;
  while (t < length) {
    const double d = std::min(is_up ? up(rng) : down(rng), length - t);
    if (d > 0.0) day.push_back({is_up ? Availability::Up : Availability::Down, d});
    t += d;
    is_up = !is_up;
  }
  return day;
}

/// Horizon long enough to cover every arrival with a generous tail.
double horizon(const ScenarioConfig& cfg) {
  return std::max(cfg.churn.start, cfg.capacity.start) + 4.0 * cfg.instances / cfg.params.lambda_ +
         600.0;
}

class SimProbeRunner : public ProbeRunner {
 public:
  SimProbeRunner(const DeviceSpec& spec, double sigma, std::mt19937_64& rng) : spec_(spec), sigma_(sigma), rng_(rng) {}

  double measure(int task, int other, int k) override {
    double st = spec_.scale_at(0.0) * spec_.true_row.pair(task, other).at(k);
    if (sigma_ > 0.0) st *= std::lognormal_distribution<double>(-0.5 * sigma_ * sigma_, sigma_)(rng_);
    return st;
  }

 private:
  const DeviceSpec& spec_;
  double sigma_;
  std::mt19937_64& rng_;
};

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

}  // namespace

void validate_scenario(const ScenarioConfig& cfg) {
  auto fail = [](const std::string& key, const std::string& why) { throw Error("ConfigError", key + ": " + why); };
  if (cfg.devices < 1) fail("devices", "need at least one device");
  if (cfg.instances < 1) fail("instances", "need at least one instance");
  if (!(cfg.params.lambda_ > 0.0)) fail("lambda", "arrival rate must be positive");
  try {
    validate_hyperparams(cfg.params);
    preset_profile(cfg.profile);
  } catch (const Error& e) {
    fail(e.code() == "UnknownPreset" ? "profile.name" : "hyperparams", e.what());
  }
  if (cfg.generator.slope_min < 0.0 || cfg.generator.slope_max < cfg.generator.slope_min)
    fail("slope_min/slope_max", "need 0 <= slope_min <= slope_max");
  if (!(cfg.generator.speed_min > 0.0) || cfg.generator.speed_max < cfg.generator.speed_min)
    fail("speed_min/speed_max", "need 0 < speed_min <= speed_max");
  if (cfg.generator.delay_min < 0.0 || cfg.generator.delay_max < cfg.generator.delay_min)
    fail("delay_min/delay_max", "need 0 <= delay_min <= delay_max");
  if (cfg.churn.pct < 0.0 || cfg.churn.pct > 1.0) fail("churn.pct", "must lie in [0, 1]");
  if (!(cfg.churn.up_mean > 0.0) || !(cfg.churn.down_mean > 0.0)) fail("churn.up_mean/down_mean", "must be positive");
  if (cfg.churn.up_spread < 0.0 || cfg.churn.up_spread >= 1.0) fail("churn.up_spread", "must lie in [0, 1)");
  if (cfg.churn.history_days < 1) fail("churn.history_days", "need at least one day");
  if (cfg.capacity.pct < 0.0 || cfg.capacity.pct >= 1.0) fail("capacity.pct", "must lie in [0, 1)");
  if (!(cfg.capacity.window_mean > 0.0) || !(cfg.capacity.factor > 0.0))
    fail("capacity.window_mean/factor", "must be positive");
  if (cfg.noise_sigma < 0.0) fail("noise_sigma", "must be non-negative");
  if (!(cfg.probe_cost > 0.0)) fail("probe_cost", "must be positive");
  if (cfg.anchors < 1) fail("anchors", "need at least one fully profiled device");
}

std::vector<DeviceSpec> generate_devices(const ScenarioConfig& cfg, const ApplicationProfile& profile) {
  const int n = profile.size();
  const auto& g = cfg.generator;
  auto rows_rng = stream(cfg.seeds.devices, kRows);
  std::uniform_real_distribution<double> slope(g.slope_min, g.slope_max);
  std::uniform_real_distribution<double> speed(g.speed_min, g.speed_max);
  std::uniform_real_distribution<double> delay(g.delay_min, g.delay_max);

  std::vector<DeviceSpec> devices(static_cast<std::size_t>(cfg.devices));
  for (int d = 0; d < cfg.devices; ++d) {
    DeviceSpec& spec = devices[static_cast<std::size_t>(d)];
    spec.id = device_id(d);
    const double s = speed(rows_rng);
    spec.nominal_speed = 1.0 / s;
    spec.network_delay = delay(rows_rng);
    spec.true_row = ProfileRow(n);
    for (int i = 0; i < n; ++i) {
      const double c = profile.tasks[static_cast<std::size_t>(i)].base_service_time * s;
      for (int j = 0; j < n; ++j) spec.true_row.set_pair(i, j, {slope(rows_rng), c}, EntryState::Measured);
    }
  }

  // Churning devices: a seeded choice of round(pct * Q) devices.
  std::vector<int> order(static_cast<std::size_t>(cfg.devices));
  for (int d = 0; d < cfg.devices; ++d) order[static_cast<std::size_t>(d)] = d;
  auto pick_rng = stream(cfg.seeds.devices, kChurnPick);
  std::shuffle(order.begin(), order.end(), pick_rng);
  const auto churners = static_cast<std::size_t>(std::lround(cfg.churn.pct * cfg.devices));
  std::vector<bool> churns(static_cast<std::size_t>(cfg.devices), false);
  for (std::size_t k = 0; k < churners; ++k) churns[static_cast<std::size_t>(order[k])] = true;

  const double end = horizon(cfg);
  for (int d = 0; d < cfg.devices; ++d) {
    DeviceSpec& spec = devices[static_cast<std::size_t>(d)];
    auto churn_rng = stream(cfg.seeds.devices, kChurn + 16 * static_cast<std::uint64_t>(d));
    for (int day = 0; day < cfg.churn.history_days; ++day) {
      if (churns[static_cast<std::size_t>(d)])
        spec.history.days.push_back(churn_day(cfg.churn, cfg.churn.day_length, churn_rng));
      else  // a device that never leaves has been up for at least as long as the run lasts
        spec.history.days.push_back({{Availability::Up, std::max(cfg.churn.day_length, end)}});
    }
    if (churns[static_cast<std::size_t>(d)]) {
      // Live spells continue the same process; the first up spell is counted from time zero.
      std::uniform_real_distribution<double> up(cfg.churn.up_mean * (1.0 - cfg.churn.up_spread),
                                                cfg.churn.up_mean * (1.0 + cfg.churn.up_spread));
      std::exponential_distribution<double> down(1.0 / cfg.churn.down_mean);
      double t = cfg.churn.start + up(churn_rng);
      while (t < end) {
        spec.live_transitions.emplace_back(t, Availability::Down);
        t += down(churn_rng);
        spec.live_transitions.emplace_back(t, Availability::Up);
        t += up(churn_rng);
      }
    }

    if (cfg.capacity.pct > 0.0) {
      auto cap_rng = stream(cfg.seeds.devices, kCapacity + 16 * static_cast<std::uint64_t>(d));
      std::exponential_distribution<double> normal(1.0 / (cfg.capacity.window_mean * (1.0 - cfg.capacity.pct) /
                                                          cfg.capacity.pct));
      std::exponential_distribution<double> degraded(1.0 / cfg.capacity.window_mean);
      double t = cfg.capacity.start + normal(cap_rng);
      while (t < end) {
        spec.capacity_events.push_back({t, cfg.capacity.factor});
        t += degraded(cap_rng);
        spec.capacity_events.push_back({t, 1.0 / cfg.capacity.factor});
        t += normal(cap_rng);
      }
    }
  }
  return devices;
}

double actual_service_time(const DeviceSpec& spec, int task, const Eigen::Ref<const Eigen::VectorXi>& counts,
                           double time, CompositionMode mode) {
  return spec.network_delay + spec.scale_at(time) * expected_service_time(spec.true_row, task, counts, mode);
}

std::unique_ptr<Scheduler> make_scheduler(const ScenarioConfig& cfg, const ApplicationProfile& profile,
                                          const std::vector<DeviceSpec>& devices) {
  const int n = profile.size();
  if (cfg.scheduler != SchedulerKind::IbotPI && cfg.scheduler != SchedulerKind::IbotI2) {
    std::map<DeviceId, double> speeds;
    for (const auto& d : devices) speeds[d.id] = d.nominal_speed;
    return std::make_unique<BaselineScheduler>(cfg.scheduler, n, std::move(speeds), cfg.seeds.scheduler);
  }

  OrchestratorOptions opts;
  opts.mode = cfg.mode;
  opts.counts = cfg.counts;
  opts.learn_rate = cfg.learn_rate;
  opts.readjust_steps_max = cfg.readjust_steps_max;
  opts.readjust_target = cfg.readjust_target;
  OrchestratorState state(n, cfg.params, opts);

  auto noise_rng = stream(cfg.seeds.noise, kProbeNoise);
  for (const auto& d : devices) {
    SimProbeRunner runner(d, cfg.noise_sigma, noise_rng);
    ProfileRow row;
    const bool full = cfg.scheduler == SchedulerKind::IbotPI || to_int(d.id) < cfg.anchors;
    if (full) {
      row = full_profile(n, runner);
    } else {
      row = partial_profile_and_complete(n, runner, cfg.params.profiling_budget, cfg.probe_cost, state.matrix,
                                         cfg.completion);
    }
    register_device(state, d.id, std::move(row), d.network_delay, fit_smp(d.history), 0.0);
  }
  return std::make_unique<IbotScheduler>(cfg.scheduler, std::move(state));
}

double gini(const std::vector<long long>& counts) {
  double total = 0.0;
  for (const long long c : counts) {
    if (c < 0) throw Error("ConfigError", "gini needs non-negative counts");
    total += static_cast<double>(c);
  }
  if (counts.empty() || total == 0.0) throw Error("AllZero", "gini of all-zero counts is undefined");
  const double q = static_cast<double>(counts.size());
  double sum = 0.0;
  for (const long long a : counts)
    for (const long long b : counts) sum += std::abs(static_cast<double>(a - b));
  return sum / (2.0 * q * q * (total / q));
}

double bandwidth_overhead_pct(const ApplicationProfile& profile, const Assignment& assignment) {
  int shared = 0;
  int split = 0;
  for (const auto& group : profile.groups) {
    if (group.size() < 2) continue;
    for (const int task : group) {
      ++shared;
      const DeviceId here = assignment.tasks[static_cast<std::size_t>(task)].device;
      const bool alone = std::none_of(group.begin(), group.end(), [&](int other) {
        return other != task && assignment.tasks[static_cast<std::size_t>(other)].device == here;
      });
      if (alone) ++split;
    }
  }
  return shared == 0 ? 0.0 : 100.0 * split / shared;
}

MetricsRecord run(const ScenarioConfig& cfg) {
  const auto profile = preset_profile(cfg.profile);
  return run(cfg, generate_devices(cfg, profile));
}

MetricsRecord run(const ScenarioConfig& cfg, const std::vector<DeviceSpec>& devices) {
  validate_scenario(cfg);
  const auto profile = preset_profile(cfg.profile);
  const int n = profile.size();
  for (std::size_t k = 0; k < devices.size(); ++k) {
    validate_device(devices[k]);
    if (to_int(devices[k].id) != static_cast<int>(k))
      throw Error("ConfigError", "devices: ids must be 0, 1, ... in order");
  }

  std::map<DeviceId, const DeviceSpec*> spec_of;
  for (const auto& d : devices) spec_of[d.id] = &d;

  auto scheduler = make_scheduler(cfg, profile, devices);
  const bool simulated = cfg.overhead.mode == OverheadMode::Simulated;

  struct Ticket {
    std::int64_t instance;
    int task;
    DeviceId device;
    double start;
    double duration;
    double st_exp;
    Eigen::VectorXi x;
    bool live;
  };
  struct Instance {
    double arrival = 0.0;
    std::vector<double> finish;
    int remaining = 0;
    double overhead = 0.0;
    double bw = 0.0;
  };

  std::priority_queue<Event, std::vector<Event>, std::greater<>> events;
  std::uint64_t seq = 0;
  auto push = [&](double t, EventKind k, std::int64_t payload) { events.push({t, k, seq++, payload}); };

  std::vector<Ticket> tickets;
  std::vector<Instance> instances(static_cast<std::size_t>(cfg.instances));
  std::map<DeviceId, Eigen::VectorXi> live_counts;
  std::set<DeviceId> up;
  for (const auto& d : devices) {
    live_counts[d.id] = Eigen::VectorXi::Zero(n);
    up.insert(d.id);
    for (const auto& [t, state] : d.live_transitions)
      push(t, state == Availability::Down ? EventKind::DeviceDown : EventKind::DeviceUp, to_int(d.id));
    for (const auto& ev : d.capacity_events) push(ev.time, EventKind::CapacityChange, to_int(d.id));
  }

  auto arrival_rng = stream(cfg.seeds.arrivals, 0);
  auto noise_rng = stream(cfg.seeds.noise, 0);
  std::exponential_distribution<double> gap(cfg.params.lambda_);
  std::lognormal_distribution<double> noise(-0.5 * cfg.noise_sigma * cfg.noise_sigma, cfg.noise_sigma);
  push(gap(arrival_rng), EventKind::Arrival, 0);

  MetricsRecord rec;
  rec.tasks_per_device.assign(devices.size(), 0);
  std::deque<std::int64_t> waiting_instances;
  std::deque<std::size_t> waiting_tickets;  // cancelled tickets awaiting a device
  int finished = 0;
  double now = 0.0;

  auto up_list = [&] { return std::vector<DeviceId>(up.begin(), up.end()); };
  auto wall = [] { return std::chrono::steady_clock::now(); };
  auto seconds = [](auto a, auto b) { return std::chrono::duration<double>(b - a).count(); };

  auto launch = [&](std::int64_t inst, int task, const Placement& placed, const Eigen::VectorXi& x, double work) {
    const DeviceSpec& spec = *spec_of.at(placed.device);
    double duration = actual_service_time(spec, task, x, now, cfg.mode);
    if (cfg.noise_sigma > 0.0) duration *= noise(noise_rng);
    duration *= work;
    tickets.push_back({inst, task, placed.device, now, duration, placed.expected_service_time * work, x, true});
    scheduler->dispatched(placed.device, task);
    ++live_counts[placed.device](task);
    ++rec.dispatches;
    ++rec.tasks_per_device[static_cast<std::size_t>(to_int(placed.device))];
    push(now + duration, EventKind::TaskComplete, static_cast<std::int64_t>(tickets.size() - 1));
  };

  auto try_instance = [&](std::int64_t id) {
    Instance& inst = instances[static_cast<std::size_t>(id)];
    const auto t0 = wall();
    Assignment a;
    try {
      a = scheduler->schedule(profile, up_list(), now);
    } catch (const Error& e) {
      if (e.code() != "NoEligibleDevice") throw;
      waiting_instances.push_back(id);
      return;
    }
    inst.overhead += simulated ? cfg.overhead.c0 + cfg.overhead.c1 * n * static_cast<double>(up.size())
                               : seconds(t0, wall());
    inst.bw = bandwidth_overhead_pct(profile, a);
    // Every task of the instance is costed against the counts before any of its dispatches
    // in snapshot mode, or after the earlier ones in incremental mode.
    std::map<DeviceId, Eigen::VectorXi> before;
    for (const auto& p : a.tasks) before.emplace(p.device, live_counts[p.device]);
    for (int i = 0; i < n; ++i) {
      const Placement& p = a.tasks[static_cast<std::size_t>(i)];
      const Eigen::VectorXi x = cfg.counts == CountSemantics::Snapshot ? before[p.device] : live_counts[p.device];
      launch(id, i, p, x, 1.0);
    }
  };

  auto try_ticket = [&](std::size_t k) {
    const Ticket old = tickets[k];
    Placement p;
    try {
      p = scheduler->reschedule(profile, old.task, up_list(), now);
    } catch (const Error& e) {
      if (e.code() != "NoEligibleDevice") throw;
      waiting_tickets.push_back(k);
      return;
    }
    double work = 1.0;
    if (!cfg.restart_on_redispatch) work = std::clamp(1.0 - (now - old.start) / old.duration, 0.0, 1.0);
    ++rec.redispatches;
    launch(old.instance, old.task, p, live_counts[p.device], work);
  };

  while (!events.empty() && finished < cfg.instances) {
    const Event ev = events.top();
    events.pop();
    now = ev.time;
    switch (ev.kind) {
      case EventKind::Arrival: {
        Instance& inst = instances[static_cast<std::size_t>(ev.payload)];
        inst.arrival = now;
        inst.finish.assign(static_cast<std::size_t>(n), 0.0);
        inst.remaining = n;
        if (ev.payload + 1 < cfg.instances) push(now + gap(arrival_rng), EventKind::Arrival, ev.payload + 1);
        try_instance(ev.payload);
        break;
      }
      case EventKind::TaskComplete: {
        Ticket& t = tickets[static_cast<std::size_t>(ev.payload)];
        if (!t.live) break;
        t.live = false;
        ++rec.completions;
        --live_counts[t.device](t.task);
        Instance& inst = instances[static_cast<std::size_t>(t.instance)];
        const auto steps_before = scheduler->readjust_stats().steps;
        const auto t0 = wall();
        scheduler->completed(t.device, t.task, t.x, t.st_exp, t.duration);
        inst.overhead += simulated ? cfg.overhead.c2 * static_cast<double>(scheduler->readjust_stats().steps - steps_before)
                                   : seconds(t0, wall());
        inst.finish[static_cast<std::size_t>(t.task)] = now;
        if (--inst.remaining == 0) ++finished;
        break;
      }
      case EventKind::DeviceDown: {
        const DeviceId d = device_id(static_cast<std::int32_t>(ev.payload));
        if (!up.erase(d)) break;
        scheduler->device_down(d, now);
        live_counts[d].setZero();
        std::vector<std::size_t> lost;
        for (std::size_t k = 0; k < tickets.size(); ++k)
          if (tickets[k].live && tickets[k].device == d) {
            tickets[k].live = false;
            lost.push_back(k);
          }
        for (const std::size_t k : lost) try_ticket(k);
        break;
      }
      case EventKind::DeviceUp: {
        const DeviceId d = device_id(static_cast<std::int32_t>(ev.payload));
        if (!up.insert(d).second) break;
        scheduler->device_up(d, now);
        auto tasks = std::move(waiting_tickets);
        waiting_tickets.clear();
        for (const std::size_t k : tasks) try_ticket(k);
        auto queued = std::move(waiting_instances);
        waiting_instances.clear();
        for (const std::int64_t id : queued) try_instance(id);
        break;
      }
      case EventKind::CapacityChange:
        break;  // the scale is folded in at dispatch time
    }
  }
  rec.end_time = now;

  for (const auto& t : tickets)
    if (t.live) ++rec.in_flight_at_end;
  const auto stats = scheduler->readjust_stats();
  rec.readjust_events = stats.events;
  rec.gradient_steps = stats.steps;

  const int window = cfg.params.running_avg_window;
  double st_sum = 0.0, bw_sum = 0.0, oh_sum = 0.0;
  int st_n = 0;
  for (int k = 0; k < cfg.instances; ++k) {
    const Instance& inst = instances[static_cast<std::size_t>(k)];
    InstanceMetrics m;
    m.id = k;
    m.arrival = inst.arrival;
    m.bw_overhead_pct = inst.bw;
    m.orch_overhead_s = inst.overhead;
    if (!inst.finish.empty() && inst.remaining == 0) {
      double total = 0.0;
      for (const double f : inst.finish) total += f - inst.arrival;
      m.service_time = total / n;
      st_sum += *m.service_time;
      ++st_n;
    }
    rec.instances.push_back(m);
    bw_sum += m.bw_overhead_pct;
    oh_sum += m.orch_overhead_s;
  }
  for (int k = window - 1; k < cfg.instances; ++k) {
    double sum = 0.0;
    int cnt = 0;
    for (int j = k - window + 1; j <= k; ++j)
      if (rec.instances[static_cast<std::size_t>(j)].service_time) {
        sum += *rec.instances[static_cast<std::size_t>(j)].service_time;
        ++cnt;
      }
    if (cnt > 0) rec.instances[static_cast<std::size_t>(k)].running_avg = sum / cnt;
  }
  rec.completed_instances = st_n;
  rec.mean_service_time = st_n > 0 ? st_sum / st_n : std::numeric_limits<double>::quiet_NaN();
  rec.mean_bw_overhead_pct = bw_sum / cfg.instances;
  rec.mean_orch_overhead_s = oh_sum / cfg.instances;
  bool any = false;
  for (const long long c : rec.tasks_per_device) any = any || c > 0;
  rec.gini = any ? gini(rec.tasks_per_device) : 0.0;
  return rec;
}

void write_per_instance_csv(std::ostream& out, const MetricsRecord& record) {
  out << "instance_id,arrival_t,service_time,running_avg,bw_overhead_pct,orch_overhead_s\n";
  for (const auto& m : record.instances) {
    out << m.id << ',' << fmt(m.arrival) << ',' << (m.service_time ? fmt(*m.service_time) : "") << ','
        << (m.running_avg ? fmt(*m.running_avg) : "") << ',' << fmt(m.bw_overhead_pct) << ','
        << fmt(m.orch_overhead_s) << '\n';
  }
}

void write_summary_csv_header(std::ostream& out) {
  out << "label,mean_service_time,mean_bw_overhead_pct,mean_orch_overhead_s,gini,completed_instances,dispatches,"
         "completions,redispatches,in_flight_at_end,readjust_events,gradient_steps\n";
}

void write_summary_csv_row(std::ostream& out, const std::string& label, const MetricsRecord& r) {
  out << label << ',' << fmt(r.mean_service_time) << ',' << fmt(r.mean_bw_overhead_pct) << ','
      << fmt(r.mean_orch_overhead_s) << ',' << fmt(r.gini) << ',' << r.completed_instances << ',' << r.dispatches
      << ',' << r.completions << ',' << r.redispatches << ',' << r.in_flight_at_end << ',' << r.readjust_events << ','
      << r.gradient_steps << '\n';
}

}  // namespace ibot
