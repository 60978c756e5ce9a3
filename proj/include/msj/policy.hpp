#pragma once

// Non-preemptive admission policies. A Scheduler is a pure function of the
// state: decide() reports which queued jobs enter service now (always the
// heads of their class queues, in the order listed) and the phase sequence the
// policy passes through at this instant.

#include <algorithm>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "msj/errors.hpp"
#include "msj/state.hpp"
#include "msj/workload.hpp"

namespace msj {

enum class PolicyKind {
  fcfs,
  first_fit,
  msf,
  msfq,
  static_quickswap,
  adaptive_quickswap,
  nmsr_simplified
};

inline std::string to_string(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::fcfs: return "fcfs";
    case PolicyKind::first_fit: return "first_fit";
    case PolicyKind::msf: return "msf";
    case PolicyKind::msfq: return "msfq";
    case PolicyKind::static_quickswap: return "static_quickswap";
    case PolicyKind::adaptive_quickswap: return "adaptive_quickswap";
    case PolicyKind::nmsr_simplified: return "nmsr_simplified";
  }
  return "?";
}

inline PolicyKind policy_kind_from_string(const std::string& name) {
  for (auto kind : {PolicyKind::fcfs, PolicyKind::first_fit, PolicyKind::msf, PolicyKind::msfq,
                    PolicyKind::static_quickswap, PolicyKind::adaptive_quickswap,
                    PolicyKind::nmsr_simplified}) {
    if (to_string(kind) == name) return kind;
  }
  if (name == "nmsr") return PolicyKind::nmsr_simplified;
  if (name == "firstfit" || name == "first-fit") return PolicyKind::first_fit;
  throw ConfigError("unknown policy '" + name + "'");
}

struct PolicyConfig {
  PolicyKind kind = PolicyKind::fcfs;
  // Quickswap threshold. Unset: k-1 (MSFQ and Static Quickswap).
  std::optional<int> threshold;
  // Static Quickswap only: per-need threshold overrides.
  std::vector<std::pair<int, int>> threshold_overrides;
  // Static Quickswap only: needs in service order. Empty: descending need.
  std::vector<int> cycle_order;
  // nMSR only: mean holding time per schedule (one schedule per class with
  // positive load, descending need). Empty: load-proportional defaults.
  std::vector<double> holding_means;
  // nMSR only: mean time to traverse the whole chain, in mean job sizes.
  double cycle_length = 10.0;

  std::string label() const {
    std::string out = to_string(kind);
    if ((kind == PolicyKind::msfq || kind == PolicyKind::static_quickswap) && threshold) {
      out += "(" + std::to_string(*threshold) + ")";
    }
    return out;
  }

  friend bool operator==(const PolicyConfig&, const PolicyConfig&) = default;
};

inline nlohmann::json policy_to_json(const PolicyConfig& p) {
  nlohmann::json j{{"kind", to_string(p.kind)}};
  if (p.threshold) j["ell"] = *p.threshold;
  if (!p.cycle_order.empty()) j["cycle_order"] = p.cycle_order;
  if (!p.threshold_overrides.empty()) {
    nlohmann::json o = nlohmann::json::object();
    for (auto [need, ell] : p.threshold_overrides) o[std::to_string(need)] = ell;
    j["ell_overrides"] = o;
  }
  if (!p.holding_means.empty()) j["holding_means"] = p.holding_means;
  if (p.kind == PolicyKind::nmsr_simplified) j["cycle_length"] = p.cycle_length;
  return j;
}

inline PolicyConfig policy_from_json(const nlohmann::json& j) {
  try {
    if (j.is_string()) return PolicyConfig{policy_kind_from_string(j.get<std::string>())};
    PolicyConfig p;
    p.kind = policy_kind_from_string(j.at("kind").get<std::string>());
    if (j.contains("ell")) p.threshold = j["ell"].get<int>();
    if (j.contains("cycle_order")) p.cycle_order = j["cycle_order"].get<std::vector<int>>();
    if (j.contains("ell_overrides")) {
      for (auto& [need, ell] : j["ell_overrides"].items()) {
        p.threshold_overrides.emplace_back(std::stoi(need), ell.get<int>());
      }
    }
    if (j.contains("holding_means")) p.holding_means = j["holding_means"].get<std::vector<double>>();
    if (j.contains("cycle_length")) p.cycle_length = j["cycle_length"].get<double>();
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("policy: ") + e.what());
  }
}

// Short tag for phase logs: P1..P4, W<need>/D<need>/idle, working/draining,
// S<need>.
inline std::string phase_label(const PhaseState& phase, const std::vector<int>& needs,
                               const std::vector<std::size_t>& order = {}) {
  struct Visitor {
    const std::vector<int>& needs;
    const std::vector<std::size_t>& order;
    std::string operator()(std::monostate) const { return "-"; }
    std::string operator()(MsfqPhase p) const { return "P" + std::to_string(static_cast<int>(p)); }
    std::string operator()(const StaticQuickswapPhase& p) const {
      if (p.idle) return "idle";
      const int need = needs[order.empty() ? p.position : order[p.position]];
      return (p.mode == SwapMode::working ? "W" : "D") + std::to_string(need);
    }
    std::string operator()(const AdaptiveQuickswapPhase& p) const {
      return p.mode == SwapMode::working ? "working" : "draining";
    }
    std::string operator()(const NmsrPhase& p) const {
      const int need = needs[order.empty() ? p.schedule : order[p.schedule]];
      return "S" + std::to_string(need);
    }
  };
  return std::visit(Visitor{needs, order}, phase);
}

struct Decision {
  std::vector<std::size_t> admit;     // class indices; each entry admits that queue's head
  std::vector<PhaseState> entered;    // phases entered at this instant, in order
  PhaseState phase;                   // phase after the decision
};

namespace detail {

// Tentative admissions against a snapshot of the state.
class Admissions {
 public:
  explicit Admissions(const SimState& s)
      : s_(s), taken_(s.classes(), 0), u_(s.in_service), free_(s.free_servers()) {}

  bool has(std::size_t c) const { return taken_[c] < s_.queue[c].size(); }
  bool fits(std::size_t c) const { return s_.needs[c] <= free_; }
  const Job& head(std::size_t c) const { return s_.queue[c][taken_[c]]; }
  long queued(std::size_t c) const { return static_cast<long>(s_.queue[c].size() - taken_[c]); }
  long in_service(std::size_t c) const { return u_[c]; }
  long in_system(std::size_t c) const { return queued(c) + u_[c]; }
  int free() const { return free_; }

  void take(std::size_t c) {
    free_ -= s_.needs[c];
    ++u_[c];
    ++taken_[c];
    out_.push_back(c);
  }

  // Earliest-arrived head among classes satisfying `pred`.
  template <class Pred>
  std::optional<std::size_t> earliest_head(Pred pred) const {
    std::optional<std::size_t> best;
    for (std::size_t c = 0; c < s_.classes(); ++c) {
      if (has(c) && pred(c) && (!best || head(c).id < head(*best).id)) best = c;
    }
    return best;
  }

  // Queued class with the largest need satisfying `pred`.
  template <class Pred>
  std::optional<std::size_t> largest_head(Pred pred) const {
    std::optional<std::size_t> best;
    for (std::size_t c = 0; c < s_.classes(); ++c) {
      if (has(c) && pred(c) && (!best || s_.needs[c] > s_.needs[*best])) best = c;
    }
    return best;
  }

  std::vector<std::size_t> release() { return std::move(out_); }

 private:
  const SimState& s_;
  std::vector<std::size_t> taken_;
  std::vector<long> u_;
  int free_;
  std::vector<std::size_t> out_;
};

}  // namespace detail

class Scheduler {
 public:
  Scheduler(const PolicyConfig& config, const WorkloadSpec& spec)
      : config_(config), k_(spec.k()), needs_(spec.needs()) {
    by_need_desc_.resize(needs_.size());
    std::iota(by_need_desc_.begin(), by_need_desc_.end(), std::size_t{0});
    std::sort(by_need_desc_.begin(), by_need_desc_.end(),
              [&](std::size_t a, std::size_t b) { return needs_[a] > needs_[b]; });

    switch (config_.kind) {
      case PolicyKind::msfq: setup_msfq(spec); break;
      case PolicyKind::static_quickswap: setup_static(); break;
      case PolicyKind::nmsr_simplified: setup_nmsr(spec); break;
      default:
        if (config_.threshold) {
          throw ConfigError("policy: threshold only applies to msfq and static_quickswap");
        }
        break;
    }
  }

  const PolicyConfig& config() const { return config_; }

  PhaseState initial_phase() const {
    switch (config_.kind) {
      case PolicyKind::msfq: return MsfqPhase::p1;
      case PolicyKind::static_quickswap: return StaticQuickswapPhase{0, SwapMode::working, true};
      case PolicyKind::adaptive_quickswap: return AdaptiveQuickswapPhase{};
      case PolicyKind::nmsr_simplified: return NmsrPhase{0};
      default: return std::monostate{};
    }
  }

  bool has_phases() const { return !std::holds_alternative<std::monostate>(initial_phase()); }

  std::string label(const PhaseState& phase) const {
    return phase_label(phase, needs_, phase_order());
  }

  // Class indices in the order phase positions refer to.
  const std::vector<std::size_t>& phase_order() const {
    static const std::vector<std::size_t> none;
    if (config_.kind == PolicyKind::static_quickswap) return cycle_;
    if (config_.kind == PolicyKind::nmsr_simplified) return schedules_;
    return none;
  }

  Decision decide(const SimState& s) const {
    switch (config_.kind) {
      case PolicyKind::fcfs: return fcfs(s);
      case PolicyKind::first_fit: return first_fit(s);
      case PolicyKind::msf: return msf(s);
      case PolicyKind::msfq: return msfq(s);
      case PolicyKind::static_quickswap: return static_quickswap(s);
      case PolicyKind::adaptive_quickswap: return adaptive_quickswap(s);
      case PolicyKind::nmsr_simplified: return nmsr(s);
    }
    return {};
  }

  // nMSR schedule chain: holding-time mean of the active schedule and the
  // phase after a schedule switch. Other policies have no timer.
  bool has_timer() const { return config_.kind == PolicyKind::nmsr_simplified; }
  double holding_mean(const PhaseState& phase) const {
    return holding_means_.at(std::get<NmsrPhase>(phase).schedule);
  }
  PhaseState on_timer(const PhaseState& phase) const {
    const auto next = (std::get<NmsrPhase>(phase).schedule + 1) % schedules_.size();
    return NmsrPhase{next};
  }

  std::optional<std::size_t> small_class() const { return small_; }
  std::optional<std::size_t> large_class() const { return large_; }

 private:
  // -- setup ---------------------------------------------------------------

  void setup_msfq(const WorkloadSpec& spec) {
    if (!spec.is_one_or_all()) {
      throw ConfigError("msfq: workload must be one-or-all (needs in {1, k})");
    }
    if (k_ < 2) throw ConfigError("msfq: needs k >= 2");
    threshold_ = config_.threshold.value_or(k_ - 1);
    if (threshold_ < 0 || threshold_ > k_ - 1) {
      throw ConfigError("msfq: threshold must lie in 0..k-1");
    }
    small_ = spec.index_of_need(1);
    large_ = spec.index_of_need(k_);
  }

  void setup_static() {
    threshold_ = config_.threshold.value_or(k_ - 1);
    if (threshold_ < 0 || threshold_ > k_ - 1) {
      throw ConfigError("static_quickswap: threshold must lie in 0..k-1");
    }
    if (config_.cycle_order.empty()) {
      cycle_ = by_need_desc_;
    } else {
      std::vector<int> given = config_.cycle_order;
      std::vector<int> have = needs_;
      std::sort(given.begin(), given.end());
      std::sort(have.begin(), have.end());
      if (given != have) {
        throw ConfigError("static_quickswap: cycle_order must be a permutation of the class needs");
      }
      for (int need : config_.cycle_order) {
        cycle_.push_back(static_cast<std::size_t>(
            std::find(needs_.begin(), needs_.end(), need) - needs_.begin()));
      }
    }
    class_threshold_.assign(needs_.size(), threshold_);
    for (auto [need, ell] : config_.threshold_overrides) {
      const auto it = std::find(needs_.begin(), needs_.end(), need);
      if (it == needs_.end()) throw ConfigError("static_quickswap: override for unknown need");
      if (ell < 0 || ell > k_ - 1) throw ConfigError("static_quickswap: override outside 0..k-1");
      class_threshold_[static_cast<std::size_t>(it - needs_.begin())] = ell;
    }
  }

  void setup_nmsr(const WorkloadSpec& spec) {
    if (config_.threshold) throw ConfigError("nmsr: threshold does not apply");
    const auto load = load_share(spec);
    for (std::size_t c : by_need_desc_) {
      if (load.per_class[c] > 0) schedules_.push_back(c);
    }
    if (schedules_.empty()) schedules_ = by_need_desc_;
    if (!config_.holding_means.empty()) {
      if (config_.holding_means.size() != schedules_.size()) {
        throw ConfigError("nmsr: holding_means needs one entry per loaded class");
      }
      for (double m : config_.holding_means) {
        if (!(m > 0)) throw ConfigError("nmsr: holding means must be positive");
      }
      holding_means_ = config_.holding_means;
      return;
    }
    if (!(config_.cycle_length > 0)) throw ConfigError("nmsr: cycle_length must be positive");
    const auto p = spec.fractions();
    double mean_size = 0;
    for (std::size_t c = 0; c < spec.size(); ++c) mean_size += p[c] * spec[c].mean_size;
    if (!(mean_size > 0)) mean_size = 1.0;
    const double cycle = config_.cycle_length * mean_size;
    for (std::size_t c : schedules_) {
      const double share = load.total > 0 ? load.per_class[c] / load.total
                                           : 1.0 / static_cast<double>(schedules_.size());
      holding_means_.push_back(cycle * share);
    }
  }

  // -- policies ------------------------------------------------------------

  Decision fcfs(const SimState& s) const {
    detail::Admissions a(s);
    while (auto c = a.earliest_head([](std::size_t) { return true; })) {
      if (!a.fits(*c)) break;
      a.take(*c);
    }
    return {a.release(), {}, s.phase};
  }

  // A class whose head does not fit stays blocked for the rest of the scan
  // (free servers only shrink), so scanning in arrival order is the same as
  // repeatedly taking the earliest head that fits.
  Decision first_fit(const SimState& s) const {
    detail::Admissions a(s);
    while (auto c = a.earliest_head([&](std::size_t c) { return a.fits(c); })) a.take(*c);
    return {a.release(), {}, s.phase};
  }

  Decision msf(const SimState& s) const {
    detail::Admissions a(s);
    for (std::size_t c : by_need_desc_) {
      while (a.has(c) && a.fits(c)) a.take(c);
    }
    return {a.release(), {}, s.phase};
  }

  Decision msfq(const SimState& s) const {
    detail::Admissions a(s);
    auto n = [&](std::optional<std::size_t> c) { return c ? a.in_system(*c) : 0L; };
    auto u = [&](std::optional<std::size_t> c) { return c ? a.in_service(*c) : 0L; };
    auto fill_small = [&] {
      if (!small_) return;
      while (a.has(*small_) && a.fits(*small_)) a.take(*small_);
    };

    Decision d;
    auto phase = std::get<MsfqPhase>(s.phase);
    auto enter = [&](MsfqPhase p) {
      phase = p;
      d.entered.push_back(p);
    };
    // Every pass through P2 admits waiting small jobs, and P4 only ends once
    // they finish, so this settles within one lap.
    for (int guard = 0; guard < 8; ++guard) {
      bool moved = false;
      switch (phase) {
        case MsfqPhase::p1:
          if (large_ && u(large_) == 0 && a.has(*large_) && a.fits(*large_)) a.take(*large_);
          // An empty system rests in P1.
          if (n(large_) == 0 && n(small_) > 0) {
            enter(MsfqPhase::p2);
            moved = true;
          }
          break;
        case MsfqPhase::p2:
          fill_small();
          if (n(small_) < k_) {
            enter(MsfqPhase::p3);
            moved = true;
          }
          break;
        case MsfqPhase::p3:
          fill_small();
          if (n(small_) <= threshold_) {
            enter(MsfqPhase::p4);
            moved = true;
          }
          break;
        case MsfqPhase::p4:
          if (u(small_) == 0) {
            enter(MsfqPhase::p1);
            moved = true;
          }
          break;
      }
      if (!moved) break;
    }
    d.admit = a.release();
    d.phase = phase;
    return d;
  }

  // Idle servers in class c's working schedule floor(k/i) * 1{j=i}.
  int idle_in_schedule(const detail::Admissions& a, std::size_t c) const {
    const int need = needs_[c];
    const long slots = k_ / need;
    return static_cast<int>(need * (slots - a.in_service(c)));
  }

  Decision static_quickswap(const SimState& s) const {
    detail::Admissions a(s);
    Decision d;
    auto phase = std::get<StaticQuickswapPhase>(s.phase);
    auto enter = [&](StaticQuickswapPhase p) {
      phase = p;
      d.entered.push_back(p);
    };
    // First class with waiting jobs, starting at cycle position `from`.
    auto next_nonempty = [&](std::size_t from) -> std::optional<std::size_t> {
      for (std::size_t step = 0; step < cycle_.size(); ++step) {
        const auto pos = (from + step) % cycle_.size();
        if (a.has(cycle_[pos])) return pos;
      }
      return std::nullopt;
    };

    for (int guard = 0; guard < 4 * static_cast<int>(cycle_.size()) + 4; ++guard) {
      bool moved = false;
      if (phase.idle) {
        if (auto pos = next_nonempty(phase.position)) {
          enter({*pos, SwapMode::working, false});
          moved = true;
        }
      } else if (phase.mode == SwapMode::working) {
        const auto c = cycle_[phase.position];
        const long slots = k_ / needs_[c];
        while (a.in_service(c) < slots && a.has(c) && a.fits(c)) a.take(c);
        if (idle_in_schedule(a, c) > k_ - class_threshold_[c]) {
          enter({phase.position, SwapMode::draining, false});
          moved = true;
        }
      } else {
        const auto c = cycle_[phase.position];
        if (a.in_service(c) == 0) {
          const auto after = (phase.position + 1) % cycle_.size();
          if (auto pos = next_nonempty(after)) {
            enter({*pos, SwapMode::working, false});
          } else {
            enter({after, SwapMode::working, true});
          }
          moved = true;
        }
      }
      if (!moved) break;
    }
    d.admit = a.release();
    d.phase = phase;
    return d;
  }

  Decision adaptive_quickswap(const SimState& s) const {
    detail::Admissions a(s);
    Decision d;
    auto phase = std::get<AdaptiveQuickswapPhase>(s.phase);
    auto enter = [&](SwapMode m) {
      phase.mode = m;
      d.entered.push_back(phase);
    };
    auto triggered = [&] {
      bool waiting_outsider = false;
      for (std::size_t c = 0; c < needs_.size(); ++c) {
        if (a.in_service(c) > 0 && a.has(c)) return false;
        if (a.in_service(c) == 0 && a.has(c)) waiting_outsider = true;
      }
      return waiting_outsider;
    };

    // Each lap either admits a job or stops.
    for (;;) {
      if (phase.mode == SwapMode::working) {
        while (auto c = a.largest_head([&](std::size_t c) { return a.fits(c); })) a.take(*c);
        if (!triggered()) break;
        enter(SwapMode::draining);
      } else {
        const auto target = a.largest_head([](std::size_t) { return true; });
        if (!target || !a.fits(*target)) break;
        a.take(*target);
        enter(SwapMode::working);
      }
    }
    d.admit = a.release();
    d.phase = phase;
    return d;
  }

  Decision nmsr(const SimState& s) const {
    detail::Admissions a(s);
    const auto c = schedules_[std::get<NmsrPhase>(s.phase).schedule];
    const long cap = k_ / needs_[c];
    while (a.in_service(c) < cap && a.has(c) && a.fits(c)) a.take(c);
    return {a.release(), {}, s.phase};
  }

  PolicyConfig config_;
  int k_;
  std::vector<int> needs_;
  std::vector<std::size_t> by_need_desc_;
  int threshold_ = 0;
  std::optional<std::size_t> small_, large_;
  std::vector<std::size_t> cycle_;
  std::vector<int> class_threshold_;
  std::vector<std::size_t> schedules_;
  std::vector<double> holding_means_;
};

}  // namespace msj
