#pragma once

// Stability regions for the one-or-all setting and for general class tables.

#include <cmath>
#include <limits>

#include "msj/errors.hpp"
#include "msj/workload.hpp"

namespace msj::analysis {

struct OneOrAllRates {
  int k = 2;
  double lambda_small = 0;  // need 1
  double lambda_large = 0;  // need k
  double mu_small = 1;
  double mu_large = 1;
};

struct StabilityVerdict {
  bool stable = true;
  double margin = 1;  // 1 - load; positive iff stable
};

// Stable iff lambda_1/(k mu_1) + lambda_k/mu_k < 1.
inline StabilityVerdict stability_one_or_all(const OneOrAllRates& r) {
  const double load = r.lambda_small / (r.k * r.mu_small) + r.lambda_large / r.mu_large;
  return {load < 1.0, 1.0 - load};
}

struct GeneralStability {
  bool sufficient_stable = true;   // Static Quickswap stabilizes the system
  bool necessary_unstable = false; // no policy can stabilize the system
  double sufficient_margin = 1;    // 1 - sum lambda_j / (floor(k/j) mu_j)
  double necessary_margin = 1;     // 1 - sum lambda_j / ((k/j) mu_j)
};

inline GeneralStability stability_general(const WorkloadSpec& spec) {
  double floor_load = 0;
  double work_load = 0;
  for (const auto& c : spec.classes()) {
    const double mu = c.service_rate();
    floor_load += c.arrival_rate / (static_cast<double>(spec.k() / c.need) * mu);
    work_load += c.arrival_rate * c.need / (static_cast<double>(spec.k()) * mu);
  }
  return {floor_load < 1.0, work_load >= 1.0, 1.0 - floor_load, 1.0 - work_load};
}

// Total arrival rates at which the class mix of `spec` (fractions held fixed)
// reaches each stability boundary. Infinite when the mix carries no load.
struct StabilityBoundary {
  double sufficient = std::numeric_limits<double>::infinity();
  double necessary = std::numeric_limits<double>::infinity();
};

inline StabilityBoundary stability_boundary(const WorkloadSpec& spec) {
  const double total = spec.total_rate();
  if (!(total > 0)) return {};
  const auto unit = spec.with_total_rate(1.0);
  const auto g = stability_general(unit);
  StabilityBoundary b;
  if (g.sufficient_margin < 1) b.sufficient = 1.0 / (1.0 - g.sufficient_margin);
  if (g.necessary_margin < 1) b.necessary = 1.0 / (1.0 - g.necessary_margin);
  return b;
}

inline OneOrAllRates one_or_all_rates(const WorkloadSpec& spec) {
  if (!spec.is_one_or_all()) throw ConfigError("workload is not one-or-all (needs 1 and k)");
  OneOrAllRates r;
  r.k = spec.k();
  // An absent class contributes no arrivals.
  if (const auto i = spec.index_of_need(1)) {
    r.lambda_small = spec[*i].arrival_rate;
    r.mu_small = spec[*i].service_rate();
  }
  if (const auto i = spec.index_of_need(spec.k())) {
    r.lambda_large = spec[*i].arrival_rate;
    r.mu_large = spec[*i].service_rate();
  }
  return r;
}

// Total arrival rate at which a one-or-all mix reaches the boundary.
inline double stability_boundary_one_or_all(const WorkloadSpec& spec) {
  const auto r = one_or_all_rates(spec.with_total_rate(1.0));
  const double per_unit = r.lambda_small / (r.k * r.mu_small) + r.lambda_large / r.mu_large;
  return per_unit > 0 ? 1.0 / per_unit : std::numeric_limits<double>::infinity();
}

}  // namespace msj::analysis
