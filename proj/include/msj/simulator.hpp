#pragma once

// Event-driven simulation of a k-server multiserver-job system.
//
// Event order at equal timestamps: completions, then nMSR schedule switches,
// then arrivals. The policy is consulted after every event.

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "msj/errors.hpp"
#include "msj/policy.hpp"
#include "msj/state.hpp"
#include "msj/workload.hpp"

namespace msj {

struct JobRecord {
  std::uint64_t id = 0;
  std::uint32_t cls = 0;
  double arrival = 0;
  double start = 0;
  double completion = 0;

  double response() const { return completion - arrival; }
  friend bool operator==(const JobRecord&, const JobRecord&) = default;
};

struct PhaseRecord {
  PhaseState phase;
  std::string label;
  double entry = 0;
  double exit = 0;
  std::vector<long> n_at_entry;  // jobs in system per class when the phase began
};

struct SeriesPoint {
  double t = 0;
  std::vector<long> n;
};

struct EventLog {
  WorkloadSpec spec;
  PolicyConfig policy;
  double horizon = 0;
  double warmup = 0;
  std::uint64_t seed = 0;

  std::vector<JobRecord> jobs;  // completed jobs, completion order
  std::vector<PhaseRecord> phases;
  std::vector<SeriesPoint> series;

  std::uint64_t arrivals = 0;
  std::uint64_t events = 0;
  double busy_server_time = 0;          // integral of busy servers over [0, horizon]
  std::vector<double> n_time_integral;  // integral of n_i over [warmup, horizon]
  std::vector<double> occupancy_bins;   // mean total n per equal-width bin of [0, horizon]
  // Jobs in service or queued at the horizon: (need, start or -1, arrival).
  struct Unfinished {
    std::uint32_t cls;
    double arrival;
    std::optional<double> start;
  };
  std::vector<Unfinished> unfinished;

  // Post-warmup time-average number in system, per class.
  std::vector<double> mean_in_system() const {
    std::vector<double> out(n_time_integral.size(), 0.0);
    const double span = horizon - warmup;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = span > 0 ? n_time_integral[i] / span : 0;
    return out;
  }
};

struct RunOptions {
  double horizon = 1e5;
  std::optional<double> warmup;  // default: 10% of horizon
  std::uint64_t seed = 1;
  bool keep_jobs = true;
  std::size_t series_stride = 0;  // 0: no time series; m: every m-th change of n
  std::size_t occupancy_bins = 0;
};

class Simulator {
 public:
  Simulator(WorkloadSpec spec, PolicyConfig policy, RunOptions options)
      : spec_(std::move(spec)), scheduler_(policy, spec_), options_(options), state_(spec_),
        arrivals_(spec_, options.seed), timer_rng_(substream(options.seed, 0, 0x74696d6572ULL)) {
    if (!(options_.horizon > 0)) throw ConfigError("simulate: horizon must be positive");
    warmup_ = options_.warmup.value_or(0.1 * options_.horizon);
    if (!(warmup_ >= 0) || !(warmup_ < options_.horizon)) {
      throw ConfigError("simulate: need 0 <= warmup < horizon");
    }
    log_.spec = spec_;
    log_.policy = policy;
    log_.horizon = options_.horizon;
    log_.warmup = warmup_;
    log_.seed = options_.seed;
    log_.n_time_integral.assign(spec_.size(), 0.0);
    if (options_.occupancy_bins > 0) log_.occupancy_bins.assign(options_.occupancy_bins, 0.0);
  }

  EventLog run() && {
    state_.phase = scheduler_.initial_phase();
    if (scheduler_.has_phases()) open_phase(state_.phase);
    if (scheduler_.has_timer()) arm_timer();
    record_series(true);
    apply(scheduler_.decide(state_));

    const double horizon = options_.horizon;
    for (;;) {
      const double t_done = state_.running.empty() ? kInf : state_.running.top().completion;
      const double t_timer = next_timer_;
      const double t_arrival = arrivals_.peek_time();
      const double t = std::min({t_done, t_timer, t_arrival});
      if (!(t <= horizon)) break;
      advance(t);
      ++log_.events;
      if (t_done <= t_timer && t_done <= t_arrival) {
        complete();
      } else if (t_timer <= t_arrival) {
        state_.phase = scheduler_.on_timer(state_.phase);
        open_phase(state_.phase);
        arm_timer();
      } else {
        Job job = arrivals_.next();
        ++log_.arrivals;
        state_.queue[job.cls].push_back(job);
      }
      apply(scheduler_.decide(state_));
      record_series(false);
    }
    advance(horizon);
    if (!log_.phases.empty()) log_.phases.back().exit = horizon;
    finish_bins();
    collect_unfinished();
    return std::move(log_);
  }

 private:
  static constexpr double kInf = std::numeric_limits<double>::infinity();

  void advance(double t) {
    const double dt = t - state_.clock;
    if (dt > 0) {
      log_.busy_server_time += dt * state_.busy;
      const double from = std::max(state_.clock, warmup_);
      if (t > from) {
        for (std::size_t c = 0; c < spec_.size(); ++c) {
          log_.n_time_integral[c] += (t - from) * static_cast<double>(state_.in_system(c));
        }
      }
      if (!log_.occupancy_bins.empty()) accumulate_bins(state_.clock, t);
    }
    state_.clock = t;
  }

  void accumulate_bins(double t0, double t1) {
    const double width = options_.horizon / static_cast<double>(log_.occupancy_bins.size());
    const double n = static_cast<double>(state_.total_in_system());
    while (t0 < t1) {
      auto bin = static_cast<std::size_t>(t0 / width);
      if (bin >= log_.occupancy_bins.size()) bin = log_.occupancy_bins.size() - 1;
      const double edge = std::min(t1, width * static_cast<double>(bin + 1));
      const double seg = (edge > t0 ? edge : t1) - t0;
      log_.occupancy_bins[bin] += seg * n;
      t0 += seg;
    }
  }

  void finish_bins() {
    const double width = options_.horizon / static_cast<double>(std::max<std::size_t>(1, log_.occupancy_bins.size()));
    for (double& b : log_.occupancy_bins) b /= width;
  }

  void complete() {
    const RunningJob r = state_.running.top();
    state_.running.pop();
    --state_.in_service[r.cls];
    state_.busy -= state_.needs[r.cls];
    if (options_.keep_jobs) {
      log_.jobs.push_back({r.id, static_cast<std::uint32_t>(r.cls), r.arrival, r.start, r.completion});
    }
  }

  void apply(const Decision& d) {
    for (std::size_t c : d.admit) {
      Job job = state_.queue[c].front();
      state_.queue[c].pop_front();
      ++state_.in_service[c];
      state_.busy += job.need;
      // Completion time is fixed at admission so coupled runs agree exactly.
      state_.running.push({state_.clock + job.size, job.id, c, state_.clock, job.arrival});
    }
    for (const auto& p : d.entered) open_phase(p);
    state_.phase = d.phase;
  }

  void open_phase(const PhaseState& p) {
    if (!log_.phases.empty()) log_.phases.back().exit = state_.clock;
    PhaseRecord rec{p, scheduler_.label(p), state_.clock, state_.clock, {}};
    rec.n_at_entry.reserve(spec_.size());
    for (std::size_t c = 0; c < spec_.size(); ++c) rec.n_at_entry.push_back(state_.in_system(c));
    log_.phases.push_back(std::move(rec));
  }

  void arm_timer() {
    const double mean = scheduler_.holding_mean(state_.phase);
    next_timer_ = state_.clock + std::exponential_distribution<double>(1.0 / mean)(timer_rng_);
  }

  void record_series(bool force) {
    if (options_.series_stride == 0) return;
    ++series_counter_;
    if (!force && series_counter_ % options_.series_stride != 0) return;
    SeriesPoint p{state_.clock, {}};
    for (std::size_t c = 0; c < spec_.size(); ++c) p.n.push_back(state_.in_system(c));
    if (!log_.series.empty() && log_.series.back().n == p.n) return;
    log_.series.push_back(std::move(p));
  }

  void collect_unfinished() {
    auto running = state_.running;
    while (!running.empty()) {
      const auto& r = running.top();
      log_.unfinished.push_back({static_cast<std::uint32_t>(r.cls), r.arrival, r.start});
      running.pop();
    }
    for (std::size_t c = 0; c < spec_.size(); ++c) {
      for (const auto& j : state_.queue[c]) {
        log_.unfinished.push_back({static_cast<std::uint32_t>(c), j.arrival, std::nullopt});
      }
    }
  }

  WorkloadSpec spec_;
  Scheduler scheduler_;
  RunOptions options_;
  double warmup_ = 0;
  SimState state_;
  ArrivalStream arrivals_;
  std::mt19937_64 timer_rng_;
  double next_timer_ = kInf;
  std::size_t series_counter_ = 0;
  EventLog log_;
};

inline EventLog run(const WorkloadSpec& spec, const PolicyConfig& policy, const RunOptions& options) {
  return Simulator(spec, policy, options).run();
}

inline EventLog run(const WorkloadSpec& spec, const PolicyConfig& policy, double horizon,
                    double warmup, std::uint64_t seed) {
  RunOptions o;
  o.horizon = horizon;
  o.warmup = warmup;
  o.seed = seed;
  return run(spec, policy, o);
}

// ---------------------------------------------------------------------------
// Phase statistics

struct PhaseSample {
  std::string label;
  std::size_t count = 0;
  double mean = 0;          // E[H]
  double second = 0;        // E[H^2]
  double time_fraction = 0; // m
  std::vector<double> mean_n_at_entry;
};

struct PhaseStats {
  bool complete = false;  // at least one full cycle after warmup
  std::size_t cycles = 0;
  std::vector<PhaseSample> phases;  // ordered by first appearance (MSFQ: P1..P4)

  // MSFQ extras, over complete cycles P1..P4.
  double mean_h234 = 0, second_h234 = 0;
  double mean_h41 = 0, second_h41 = 0;
  double mean_large_at_p1 = 0, second_large_at_p1 = 0;  // N1L
  double mean_small_at_p2 = 0, second_small_at_p2 = 0;  // N2S
  double fraction_p1_without_large = 0;  // P1 entered with no large job
  double fraction_p2_below_k = 0;        // P2 entered with fewer than k small jobs

  const PhaseSample* find(const std::string& label) const {
    for (const auto& p : phases) {
      if (p.label == label) return &p;
    }
    return nullptr;
  }
};

namespace detail {

// Moments of the interval sum over consecutive records starting at `i`
// whose labels match `labels` in order.
inline std::optional<double> cycle_span(const std::vector<PhaseRecord>& ph, std::size_t i,
                                        std::initializer_list<const char*> labels) {
  double span = 0;
  for (const char* l : labels) {
    if (i >= ph.size() || ph[i].label != l) return std::nullopt;
    span += ph[i].exit - ph[i].entry;
    ++i;
  }
  return span;
}

}  // namespace detail

// Phases entered after warmup and closed before the horizon. Cycles start at
// each P1 (MSFQ) or at the first recorded phase label otherwise.
inline PhaseStats measure_phase_stats(const EventLog& log) {
  PhaseStats out;
  const auto& ph = log.phases;
  // Drop the phase still open at the horizon.
  const std::size_t last = ph.empty() ? 0 : ph.size() - 1;
  std::size_t first = 0;
  while (first < last && ph[first].entry < log.warmup) ++first;
  if (first >= last) return out;
  const std::string& anchor = ph[first].label == "P1" || ph[first].label.rfind('P', 0) != 0
                                  ? ph[first].label
                                  : std::string("P1");
  // Start at the first anchor so cycles are whole.
  while (first < last && ph[first].label != anchor) ++first;
  std::size_t end = last;
  while (end > first && ph[end].label != anchor) --end;  // [first, end) whole cycles
  if (end <= first) return out;

  double total_time = 0;
  for (std::size_t i = first; i < end; ++i) {
    const auto& r = ph[i];
    const double h = r.exit - r.entry;
    total_time += h;
    if (r.label == anchor) ++out.cycles;
    PhaseSample* s = nullptr;
    for (auto& p : out.phases) {
      if (p.label == r.label) s = &p;
    }
    if (!s) {
      out.phases.push_back({r.label, 0, 0, 0, 0, std::vector<double>(r.n_at_entry.size(), 0.0)});
      s = &out.phases.back();
    }
    ++s->count;
    s->mean += h;
    s->second += h * h;
    s->time_fraction += h;
    for (std::size_t c = 0; c < r.n_at_entry.size(); ++c) {
      s->mean_n_at_entry[c] += static_cast<double>(r.n_at_entry[c]);
    }
  }
  for (auto& p : out.phases) {
    p.time_fraction = total_time > 0 ? p.time_fraction / total_time : 0;
    p.mean /= static_cast<double>(p.count);
    p.second /= static_cast<double>(p.count);
    for (double& n : p.mean_n_at_entry) n /= static_cast<double>(p.count);
  }
  out.complete = out.cycles > 0;

  if (anchor == "P1") {
    const auto small = log.spec.index_of_need(1);
    const auto large = log.spec.index_of_need(log.spec.k());
    std::size_t cycles = 0, without_large = 0, below_k = 0;
    for (std::size_t i = first; i + 3 < end + 1 && i < end; ++i) {
      if (ph[i].label != "P1") continue;
      const auto h41 = i > 0 ? detail::cycle_span(ph, i - 1, {"P4", "P1"}) : std::nullopt;
      const auto h234 = detail::cycle_span(ph, i + 1, {"P2", "P3", "P4"});
      if (!h41 || !h234) continue;
      ++cycles;
      out.mean_h41 += *h41;
      out.second_h41 += *h41 * *h41;
      out.mean_h234 += *h234;
      out.second_h234 += *h234 * *h234;
      const double nl = large ? static_cast<double>(ph[i].n_at_entry[*large]) : 0.0;
      const double ns = small ? static_cast<double>(ph[i + 1].n_at_entry[*small]) : 0.0;
      out.mean_large_at_p1 += nl;
      out.second_large_at_p1 += nl * nl;
      out.mean_small_at_p2 += ns;
      out.second_small_at_p2 += ns * ns;
      if (nl == 0) ++without_large;
      if (ns < log.spec.k()) ++below_k;
    }
    if (cycles > 0) {
      const double c = static_cast<double>(cycles);
      out.mean_h41 /= c;
      out.second_h41 /= c;
      out.mean_h234 /= c;
      out.second_h234 /= c;
      out.mean_large_at_p1 /= c;
      out.second_large_at_p1 /= c;
      out.mean_small_at_p2 /= c;
      out.second_small_at_p2 /= c;
      out.fraction_p1_without_large = static_cast<double>(without_large) / c;
      out.fraction_p2_below_k = static_cast<double>(below_k) / c;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Common random numbers

struct PairedComparison {
  EventLog a;
  EventLog b;
  std::size_t matched = 0;           // jobs completed in both runs
  std::size_t identical = 0;         // same start and completion
  double mean_response_delta = 0;    // mean over matched post-warmup jobs of T_b - T_a
};

inline PairedComparison compare_runs(EventLog a, EventLog b) {
  if (a.horizon != b.horizon || a.seed != b.seed || a.warmup != b.warmup ||
      a.spec.k() != b.spec.k() || a.spec.needs() != b.spec.needs()) {
    throw ConfigError("couple: runs differ in workload, horizon, warmup or seed");
  }
  for (std::size_t c = 0; c < a.spec.size(); ++c) {
    if (a.spec[c].arrival_rate != b.spec[c].arrival_rate || a.spec[c].mean_size != b.spec[c].mean_size) {
      throw ConfigError("couple: runs differ in workload");
    }
  }
  PairedComparison out;
  std::vector<const JobRecord*> by_id_b;
  for (const auto& j : b.jobs) {
    if (j.id >= by_id_b.size()) by_id_b.resize(j.id + 1, nullptr);
    by_id_b[j.id] = &j;
  }
  double delta = 0;
  std::size_t counted = 0;
  for (const auto& ja : a.jobs) {
    if (ja.id >= by_id_b.size() || !by_id_b[ja.id]) continue;
    const auto& jb = *by_id_b[ja.id];
    ++out.matched;
    if (ja.start == jb.start && ja.completion == jb.completion) ++out.identical;
    if (ja.arrival >= a.warmup) {
      delta += jb.response() - ja.response();
      ++counted;
    }
  }
  out.mean_response_delta = counted ? delta / static_cast<double>(counted) : 0;
  out.a = std::move(a);
  out.b = std::move(b);
  return out;
}

// Runs both policies on the same job stream.
inline PairedComparison couple(const WorkloadSpec& spec, const PolicyConfig& a,
                               const PolicyConfig& b, const RunOptions& options) {
  return compare_runs(run(spec, a, options), run(spec, b, options));
}

}  // namespace msj
