#pragma once

// Transform building blocks for the one-or-all MSFQ approximation: M/M/1
// busy periods, the draining-phase transit time, the pure-death final
// phase, the exceptional-first-service queue, and the phase-3 visit counts.
// Transform evaluators are templates over the scalar type so the same code
// runs on double, long double and jets.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "msj/analysis/jet.hpp"
#include "msj/analysis/stability.hpp"
#include "msj/errors.hpp"

namespace msj::analysis {

// One-or-all rates plus the MSFQ threshold.
struct MsfqParams {
  int k = 2;
  double lambda_small = 0;
  double lambda_large = 0;
  double mu_small = 1;
  double mu_large = 1;
  int ell = 1;

  OneOrAllRates rates() const { return {k, lambda_small, lambda_large, mu_small, mu_large}; }
  double lambda() const { return lambda_small + lambda_large; }

  void validate() const {
    if (k < 2) throw ConfigError("msfq analysis: k must be at least 2");
    if (ell < 0 || ell > k - 1) throw ConfigError("msfq analysis: threshold must lie in [0, k-1]");
    if (!(lambda_small >= 0) || !(lambda_large >= 0)) throw ConfigError("msfq analysis: negative arrival rate");
    if (!(mu_small > 0) || !(mu_large > 0)) throw ConfigError("msfq analysis: service rates must be positive");
  }

  void require_stable() const {
    validate();
    const auto v = stability_one_or_all(rates());
    if (!v.stable) {
      throw UnstableError("msfq analysis: load " + std::to_string(1 - v.margin) + " is outside the stability region");
    }
  }

  static MsfqParams from_workload(const WorkloadSpec& spec, int ell) {
    const auto r = one_or_all_rates(spec);
    return {r.k, r.lambda_small, r.lambda_large, r.mu_small, r.mu_large, ell};
  }
};

// ---------------------------------------------------------------------------
// Busy period of an M/M/1 queue: arrivals at rate lambda, service at rate mu.

class BusyPeriod {
 public:
  BusyPeriod(double lambda, double mu) : lambda_(lambda), mu_(mu) {
    if (!(mu > 0)) throw ConfigError("busy period: service rate must be positive");
    if (!(lambda >= 0)) throw ConfigError("busy period: negative arrival rate");
    if (!(lambda < mu)) throw UnstableError("busy period: arrival rate must be below service rate");
  }

  double lambda() const { return lambda_; }
  double mu() const { return mu_; }
  double load() const { return lambda_ / mu_; }

  // Root of lambda B^2 - (lambda + mu + s) B + mu = 0 with B(0) = 1. The
  // discriminant is rewritten as (mu - lambda + s)^2 + 4 lambda s and the
  // denominator split so that B(0) == 1 exactly and lambda = 0 needs no
  // special case.
  template <class T>
  T operator()(const T& s) const {
    using R = scalar_of_t<T>;
    const R lam = static_cast<R>(lambda_);
    const R mu = static_cast<R>(mu_);
    const R gap = mu - lam;
    const T shifted = T(gap) + s;
    const T root = square_root(shifted * shifted + T(R(4) * lam) * s);
    const T den = T(R(2) * mu) + s + s * (T(R(2) * (mu + lam)) + s) / (root + T(gap));
    return T(R(2) * mu) / den;
  }

  Moments moments() const {
    const double rho = load();
    const double es = 1.0 / mu_;
    return {es / (1 - rho), 2 * es * es / std::pow(1 - rho, 3)};
  }

 private:
  double lambda_;
  double mu_;
};

// Busy period of the large class: one large job at a time, rate mu_k.
inline BusyPeriod large_busy_period(const MsfqParams& p) { return {p.lambda_large, p.mu_large}; }

// Busy period of small jobs with all k servers working: rate k mu_1.
inline BusyPeriod small_busy_period(const MsfqParams& p) { return {p.lambda_small, p.k * p.mu_small}; }

// ---------------------------------------------------------------------------
// Final phase: threshold ell small jobs drain with no admissions.

template <class T>
T h4_lst(const MsfqParams& p, const T& s) {
  using R = scalar_of_t<T>;
  T prod(R(1));
  for (int j = 1; j <= p.ell; ++j) {
    const R rate = static_cast<R>(j) * static_cast<R>(p.mu_small);
    prod *= T(rate) / (T(rate) + s);
  }
  return prod;
}

inline Moments h4_moments(const MsfqParams& p) {
  double mean = 0, var = 0;
  for (int j = 1; j <= p.ell; ++j) {
    const double m = 1.0 / (j * p.mu_small);
    mean += m;
    var += m * m;
  }
  return {mean, var + mean * mean};
}

// Draining phase: time for the small-job count to fall from k-1 to ell while
// arrivals keep joining. The transit out of level j is
//   H_j(s) = j mu / (lambda + j mu + s - lambda H_{j+1}(s)),
// with H_k the small busy period.
template <class T>
T h3_lst(const MsfqParams& p, const T& s) {
  using R = scalar_of_t<T>;
  const R lam = static_cast<R>(p.lambda_small);
  T h = small_busy_period(p)(s);
  T prod(R(1));
  for (int j = p.k - 1; j > p.ell; --j) {
    const R rate = static_cast<R>(j) * static_cast<R>(p.mu_small);
    h = T(rate) / (T(lam + rate) + s - T(lam) * h);
    prod *= h;
  }
  return prod;
}

inline Moments h3_moments(const MsfqParams& p) {
  return lst_moments([&](const Jet& s) { return h3_lst(p, s); });
}

// ---------------------------------------------------------------------------
// M/G/1 with exceptional first service.

struct ServiceMoments {
  double m1 = 0;
  double m2 = 0;
};

inline void require_efs_stable(double lambda, const ServiceMoments& s, const ServiceMoments& sx) {
  if (!(lambda * s.m1 < 1)) throw UnstableError("efs: lambda E[S] must be below 1");
  if (!(1 - lambda * s.m1 + lambda * sx.m1 > 0)) throw UnstableError("efs: nonpositive normalizer");
}

inline double efs_mean_work(double lambda, const ServiceMoments& s, const ServiceMoments& sx) {
  require_efs_stable(lambda, s, sx);
  return lambda * s.m2 / (2 * (1 - lambda * s.m1)) +
         lambda * (sx.m2 - s.m2) / (2 * (1 - lambda * s.m1 + lambda * sx.m1));
}

inline double efs_empty_prob(double lambda, const ServiceMoments& s, const ServiceMoments& sx) {
  require_efs_stable(lambda, s, sx);
  return (1 - lambda * s.m1) / (1 - lambda * s.m1 + lambda * sx.m1);
}

// Mean work seen by an arrival conditioned on a busy EFS system, W/(1-p).
// With A = 1 - lambda E[S] and D = A + lambda E[S'] this is
//   E[S^2] D / (2 A E[S']) + (E[S'^2] - E[S^2]) / (2 E[S']),
// which needs no separate lambda = 0 case and stays finite when D <= 0.
// That happens only for a negative mean exceptional work (possible when the
// moments come from an approximation); the value is passed through. Zero
// exceptional work gives 0.
inline double efs_conditional_work(double lambda, const ServiceMoments& s, const ServiceMoments& sx) {
  if (!(lambda * s.m1 < 1)) throw UnstableError("efs: lambda E[S] must be below 1");
  if (sx.m1 == 0) return 0.0;
  const double a = 1 - lambda * s.m1;
  const double d = a + lambda * sx.m1;
  return s.m2 * d / (2 * a * sx.m1) + (sx.m2 - s.m2) / (2 * sx.m1);
}

// ---------------------------------------------------------------------------
// Phase-3 visit counts. Starting from k-1 small jobs, the small count moves
// up at rate lambda_1 and down at rate min(j, k) mu_1 until it reaches ell;
// C_j is the expected number of visits to level j (j > ell).

inline std::vector<double> c_coefficients(const MsfqParams& p, int max_level) {
  const double a = p.lambda_small;
  const double mu = p.mu_small;
  const int k = p.k;
  std::vector<double> c;
  if (p.ell >= k - 1 || max_level <= p.ell) return c;
  const int first = p.ell + 1;
  c.push_back((a + first * mu) / (first * mu));
  for (int j = first + 1; j <= max_level; ++j) {
    const double prev = c.back();
    double next;
    if (j <= k) {
      next = prev * a * (a + j * mu) / (j * mu * (a + (j - 1) * mu));
      if (j <= k - 1) next += (a + j * mu) / (j * mu);
    } else {
      next = prev * a / (k * mu);
    }
    c.push_back(next);
  }
  return c;
}

// Mean response of a small job arriving in phase 3. Empty when ell = k-1
// (the phase never occurs).
inline std::optional<double> t3_small(const MsfqParams& p) {
  p.require_stable();
  if (p.ell >= p.k - 1) return std::nullopt;
  const double a = p.lambda_small;
  const double mu = p.mu_small;
  const int k = p.k;
  const int first = p.ell + 1;
  double c = 0;
  double num = 0, den = 0;
  for (int j = first;; ++j) {
    if (j == first) {
      c = (a + first * mu) / (first * mu);
    } else if (j <= k) {
      c = c * a * (a + j * mu) / (j * mu * (a + (j - 1) * mu)) + (j <= k - 1 ? (a + j * mu) / (j * mu) : 0.0);
    } else {
      c = c * a / (k * mu);
    }
    const double weight = c / (a + std::min(j, k) * mu);
    const double response = (k + std::max(j - k + 1, 0)) / (k * mu);
    num += weight * response;
    den += weight;
    if (j > k && (weight * response < 1e-12 * num || c == 0)) break;
    if (j > k + 10'000'000) throw UnstableError("t3_small: tail did not converge");
  }
  return num / den;
}

}  // namespace msj::analysis
