#pragma once

#include <cstdint>
#include <deque>
#include <queue>
#include <string>
#include <variant>
#include <vector>

#include "msj/workload.hpp"

namespace msj {

// ---------------------------------------------------------------------------
// Policy phase variable z

enum class MsfqPhase : int { p1 = 1, p2 = 2, p3 = 3, p4 = 4 };

enum class SwapMode : int { working = 0, draining = 1 };

struct StaticQuickswapPhase {
  std::size_t position = 0;  // index into the cycle order
  SwapMode mode = SwapMode::working;
  bool idle = false;  // every queue was empty at the last switch
  friend bool operator==(const StaticQuickswapPhase&, const StaticQuickswapPhase&) = default;
};

struct AdaptiveQuickswapPhase {
  SwapMode mode = SwapMode::working;
  friend bool operator==(const AdaptiveQuickswapPhase&, const AdaptiveQuickswapPhase&) = default;
};

struct NmsrPhase {
  std::size_t schedule = 0;
  friend bool operator==(const NmsrPhase&, const NmsrPhase&) = default;
};

// std::monostate: the policy carries no phase (FCFS, First-Fit, MSF).
using PhaseState =
    std::variant<std::monostate, MsfqPhase, StaticQuickswapPhase, AdaptiveQuickswapPhase, NmsrPhase>;

// ---------------------------------------------------------------------------
// System state (n, u, z)

struct RunningJob {
  double completion = 0;
  std::uint64_t id = 0;
  std::size_t cls = 0;
  double start = 0;
  double arrival = 0;
};

struct LaterCompletion {
  bool operator()(const RunningJob& a, const RunningJob& b) const {
    if (a.completion != b.completion) return a.completion > b.completion;
    return a.id > b.id;
  }
};

struct SimState {
  explicit SimState(const WorkloadSpec& spec)
      : k(spec.k()), needs(spec.needs()), queue(spec.size()), in_service(spec.size(), 0) {}

  int k = 1;
  double clock = 0;
  std::vector<int> needs;
  std::vector<std::deque<Job>> queue;  // per class, arrival order
  std::vector<long> in_service;        // u
  int busy = 0;                        // sum of need * u
  PhaseState phase;
  std::priority_queue<RunningJob, std::vector<RunningJob>, LaterCompletion> running;

  std::size_t classes() const { return needs.size(); }
  int free_servers() const { return k - busy; }
  long queued(std::size_t c) const { return static_cast<long>(queue[c].size()); }
  long in_system(std::size_t c) const { return queued(c) + in_service[c]; }  // n
  long total_in_system() const {
    long n = 0;
    for (std::size_t c = 0; c < classes(); ++c) n += in_system(c);
    return n;
  }
};

}  // namespace msj
