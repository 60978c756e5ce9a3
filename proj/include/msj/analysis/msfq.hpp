#pragma once

// Mean response time approximation for MSFQ in the one-or-all setting.
//
// Phase durations H1..H4 and the counts at phase boundaries (large jobs at
// the start of P1, small jobs at the start of P2) depend on each other
// cyclically through
//   H1(s)  = N1L(BL(s))
//   N1L(z) = H2(x) H3(x) H4(x),                    x = lambda_k (1 - z)
//   N2S(z) = H2(t) H3(t) H4(t + lambda_1 (1 - z)),  t = lambda_k (1 - BL(lambda_1 (1 - z)))
//   H2(s)  = N2S(BS(s)) BS(s)^(1-k)
// Moments are obtained by pushing second-order jets through these maps. H2
// enters its own equation only through its first two moments, so the map
// from assumed to implied H2 moments is affine and is solved exactly.

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <tuple>
#include <type_traits>
#include <utility>

#include <json.hpp>

#include "msj/analysis/jet.hpp"
#include "msj/analysis/stability.hpp"
#include "msj/analysis/transforms.hpp"
#include "msj/errors.hpp"

namespace msj::analysis {

// Second-order model of a Laplace transform around 0.
struct LocalLst {
  double m1 = 0;
  double m2 = 0;

  // Exact to second order when x.v == 0.
  template <class T>
  T operator()(const T& x) const {
    using R = scalar_of_t<T>;
    return T(R(1)) - T(static_cast<R>(m1)) * x + T(static_cast<R>(m2 / 2)) * x * x;
  }
};

// The coupled transforms, with H2 supplied by the caller.
class MsfqTransforms {
 public:
  explicit MsfqTransforms(const MsfqParams& p)
      : p_(p), bl_(large_busy_period(p)), bs_(small_busy_period(p)) {}

  const MsfqParams& params() const { return p_; }
  const BusyPeriod& large_busy() const { return bl_; }
  const BusyPeriod& small_busy() const { return bs_; }

  template <class T, class H2>
  T n1l(const T& z, const H2& h2) const {
    using R = scalar_of_t<T>;
    const T x = T(static_cast<R>(p_.lambda_large)) * (T(R(1)) - z);
    return h2(x) * h3_lst(p_, x) * h4_lst(p_, x);
  }

  template <class T, class H2>
  T h1(const T& s, const H2& h2) const {
    return n1l(bl_(s), h2);
  }

  template <class T, class H2>
  T n2s(const T& z, const H2& h2) const {
    using R = scalar_of_t<T>;
    const T a1z = T(static_cast<R>(p_.lambda_small)) * (T(R(1)) - z);
    const T t = T(static_cast<R>(p_.lambda_large)) * (T(R(1)) - bl_(a1z));
    return h2(t) * h3_lst(p_, t) * h4_lst(p_, t + a1z);
  }

  template <class T, class H2>
  T h2(const T& s, const H2& h2_inner) const {
    using R = scalar_of_t<T>;
    const T u = bs_(s);
    return n2s(u, h2_inner) * power(u, static_cast<R>(1 - p_.k));
  }

  // One factor of the product form of H2: with u = BS(s),
  //   H2(s) = u^(1-k) H3(t) H4(t + lambda_1 (1 - u)) H2(t),  t = lambda_k (1 - BL(lambda_1 (1 - u))).
  // Returns the factor and the next argument t.
  template <class T>
  std::pair<T, T> h2_factor(const T& s) const {
    using R = scalar_of_t<T>;
    const T u = bs_(s);
    const T a1u = T(static_cast<R>(p_.lambda_small)) * (T(R(1)) - u);
    const T t = T(static_cast<R>(p_.lambda_large)) * (T(R(1)) - bl_(a1u));
    return {power(u, static_cast<R>(1 - p_.k)) * h3_lst(p_, t) * h4_lst(p_, t + a1u), t};
  }

  // H2 as an infinite product of factors along the contracting argument
  // sequence. Independent of the moment solver; used to check it.
  template <class T>
  T h2_product(const T& s) const {
    using R = scalar_of_t<T>;
    using std::abs;
    T prod(R(1));
    T x = s;
    const R start = abs(value_of(s));
    if (start == R(0) && std::is_arithmetic_v<T>) return prod;
    R previous = start;
    for (int i = 0; i < 10'000'000; ++i) {
      auto [factor, next] = h2_factor(x);
      prod *= factor;
      x = next;
      const R mag = abs(value_of(x));
      if constexpr (std::is_arithmetic_v<T>) {
        // Stop once the argument is negligible or stalls at rounding level.
        if (mag <= start * R(1e-30) || mag >= previous) return prod;
        previous = mag;
      } else {
        const R d = abs(x.d1) + abs(x.d2);
        if ((mag + d) <= R(1e-30) * (R(1) + start)) return prod;
      }
    }
    throw UnstableError("h2 product: argument sequence did not contract");
  }

 private:
  MsfqParams p_;
  BusyPeriod bl_;
  BusyPeriod bs_;
};

struct FixedPointCheck {
  bool converged = false;
  int iterations = 0;
  double residual = 0;  // max relative gap to the direct solution
};

struct PhaseMoments {
  std::array<Moments, 4> h;  // H1..H4
  CountMoments n1l;          // large jobs at the start of P1
  CountMoments n2s;          // small jobs at the start of P2
  Moments h234;              // H2 + H3 + H4
  Moments h41;               // H4 followed by the next H1
  std::array<double, 4> m{};  // time fractions
  double contraction = 0;     // slope of the H2 mean map; < 1 under stability
  std::array<double, 2> linear_first_moments{};  // (E[H1], E[H2]) from the 2x2 system
  FixedPointCheck fixed_point;
};

namespace detail {

inline std::pair<double, double> h2_map(const MsfqTransforms& tr, double m1, double m2) {
  const LocalLst model{m1, m2};
  const auto r = lst_moments([&](const Jet& s) { return tr.h2(s, model); });
  return {r.m1, r.m2};
}

}  // namespace detail

inline PhaseMoments solve_phase_moments(const MsfqParams& p) {
  p.require_stable();
  const MsfqTransforms tr(p);
  PhaseMoments out;

  // The implied mean is A + B m1 and, for a fixed mean, the implied second
  // moment is C + D m2. Read the coefficients off by probing.
  const double a0 = detail::h2_map(tr, 0, 0).first;
  const double b0 = detail::h2_map(tr, 1, 0).first - a0;
  if (!(b0 < 1)) throw UnstableError("phase moments: H2 map does not contract");
  const double h2m1 = a0 / (1 - b0);
  const double c0 = detail::h2_map(tr, h2m1, 0).second;
  const double d0 = detail::h2_map(tr, h2m1, 1).second - c0;
  if (!(d0 < 1)) throw UnstableError("phase moments: H2 second-moment map does not contract");
  const double h2m2 = c0 / (1 - d0);
  out.contraction = b0;
  const LocalLst h2{h2m1, h2m2};

  out.h[1] = {h2m1, h2m2};
  out.h[0] = lst_moments([&](const Jet& s) { return tr.h1(s, h2); });
  out.h[2] = h3_moments(p);
  out.h[3] = h4_moments(p);
  out.n1l = pgf_moments([&](const Jet& z) { return tr.n1l(z, h2); });
  out.n2s = pgf_moments([&](const Jet& z) { return tr.n2s(z, h2); });

  const double e1 = out.h[0].m1, e2 = out.h[1].m1, e3 = out.h[2].m1, e4 = out.h[3].m1;
  const double a = p.lambda_small, b = p.lambda_large;

  // Second moments of the two intervals over which arrivals are counted.
  // With a positive rate the count's factorial moment gives E[X^2] =
  // E[N(N-1)] / rate^2; with no arrivals fall back to the direct sums.
  out.h234.m1 = e2 + e3 + e4;
  if (b > 0) {
    out.h234.m2 = out.n1l.factorial2 / (b * b);
  } else {
    out.h234.m2 = out.h[1].m2 + out.h[2].m2 + out.h[3].m2 + 2 * (e2 * e3 + e2 * e4 + e3 * e4);
  }
  out.h41.m1 = e4 + e1;
  if (a > 0) {
    out.h41.m2 = out.n2s.factorial2 / (a * a);
  } else {
    const double cross = b * tr.large_busy().moments().m1 * (e4 * e2 + e4 * e3 + out.h[3].m2);
    out.h41.m2 = out.h[3].m2 + 2 * cross + out.h[0].m2;
  }

  const double total = e1 + e2 + e3 + e4;
  for (int i = 0; i < 4; ++i) out.m[i] = out.h[i].m1 / total;

  // First moments from the explicit linear system
  //   E[H1] = b E[BL] (E[H2] + E[H3] + E[H4])
  //   E[H2] = E[BS] (a (E[H4] + E[H1]) - k + 1)
  {
    const double c1 = b * tr.large_busy().moments().m1;
    const double c2 = tr.small_busy().moments().m1;
    const double x2 = (c2 * (a * e4 - p.k + 1) + a * c1 * c2 * (e3 + e4)) / (1 - a * c1 * c2);
    out.linear_first_moments = {c1 * (x2 + e3 + e4), x2};
  }

  // Damped fixed-point iteration on the H2 moments as a cross-check.
  {
    double x1 = 0, x2 = 0;
    const double omega = 0.5;
    auto rel = [](double u, double v) { return std::abs(u - v) / std::max(1.0, std::abs(v)); };
    FixedPointCheck& fp = out.fixed_point;
    for (fp.iterations = 1; fp.iterations <= 100'000; ++fp.iterations) {
      const auto [y1, y2] = detail::h2_map(tr, x1, x2);
      const double n1 = (1 - omega) * x1 + omega * y1;
      const double n2 = (1 - omega) * x2 + omega * y2;
      const double step = std::max(rel(n1, x1), rel(n2, x2));
      x1 = n1;
      x2 = n2;
      if (step < 1e-13) {
        fp.converged = true;
        break;
      }
    }
    fp.residual = std::max(rel(x1, h2m1), rel(x2, h2m2));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Conditional response times

struct ResponseTerms {
  double t1_large = 0;    // large job arriving in P1
  double t234_large = 0;  // large job arriving in P2, P3 or P4
  double t14_small = 0;   // small job arriving in P4 or P1
  double t2_small = 0;    // small job arriving in P2
  std::optional<double> t3_small;  // small job arriving in P3; empty when ell = k-1
};

inline double t1_large(const MsfqParams& p, const PhaseMoments& pm) {
  const double mu = p.mu_large;
  const ServiceMoments s{1 / mu, 2 / (mu * mu)};
  const ServiceMoments sx{pm.n1l.m1 / mu, (pm.n1l.m2 + pm.n1l.m1) / (mu * mu)};
  return efs_conditional_work(p.lambda_large, s, sx) + 1 / mu;
}

inline double t2_small(const MsfqParams& p, const PhaseMoments& pm) {
  const double k = p.k;
  const double rate = k * p.mu_small;
  const ServiceMoments s{1 / rate, 2 / (rate * rate)};
  // Work present when P2 starts: N2S - k + 1 small jobs served at rate k mu_1.
  const ServiceMoments sx{(pm.n2s.m1 - k + 1) / rate,
                          (pm.n2s.m2 - (2 * k - 3) * pm.n2s.m1 + k * k - 3 * k + 2) / (rate * rate)};
  return efs_conditional_work(p.lambda_small, s, sx) + 1 / p.mu_small;
}

// Arrivals during a random interval wait out its excess, plus the work of
// same-class arrivals ahead of them in that interval.
inline std::pair<double, double> t_excess(const MsfqParams& p, const PhaseMoments& pm) {
  auto excess = [](const Moments& x) { return x.m1 > 0 ? x.m2 / (2 * x.m1) : 0.0; };
  const double large = (p.lambda_large / p.mu_large + 1) * excess(pm.h234) + 1 / p.mu_large;
  const double small = (p.lambda_small / (p.k * p.mu_small) + 1) * excess(pm.h41) + 1 / p.mu_small;
  return {large, small};
}

struct Assumptions {
  double mean_large_at_p1 = 0;  // E[N1L]; the approximation takes N1L >= 1
  double mean_small_at_p2 = 0;  // E[N2S]; the approximation takes N2S >= k
  bool large_at_p1_holds = true;
  bool small_at_p2_holds = true;
  bool h2_positive = true;
};

struct MsfqResult {
  MsfqParams params;
  PhaseMoments moments;
  ResponseTerms terms;
  double mean_response = 0;        // E[T]
  double mean_response_small = 0;  // E[T^(1)]
  double mean_response_large = 0;  // E[T^(k)]
  double weighted_response = 0;    // load-weighted E[T^w]
  Assumptions assumptions;
};

inline MsfqResult analyze_msfq(const MsfqParams& p) {
  MsfqResult r;
  r.params = p;
  r.moments = solve_phase_moments(p);
  const auto& pm = r.moments;
  const auto& m = pm.m;

  r.terms.t1_large = t1_large(p, pm);
  r.terms.t2_small = t2_small(p, pm);
  std::tie(r.terms.t234_large, r.terms.t14_small) = t_excess(p, pm);
  r.terms.t3_small = t3_small(p);

  r.mean_response_large = r.terms.t1_large * m[0] + r.terms.t234_large * (m[1] + m[2] + m[3]);
  r.mean_response_small = r.terms.t14_small * (m[0] + m[3]) + r.terms.t2_small * m[1] +
                          r.terms.t3_small.value_or(0.0) * m[2];

  const double lambda = p.lambda();
  if (lambda > 0) {
    r.mean_response = (p.lambda_large * r.mean_response_large + p.lambda_small * r.mean_response_small) / lambda;
  }
  const double rho_small = p.lambda_small / p.mu_small;
  const double rho_large = p.k * p.lambda_large / p.mu_large;
  if (rho_small + rho_large > 0) {
    r.weighted_response =
        (rho_small * r.mean_response_small + rho_large * r.mean_response_large) / (rho_small + rho_large);
  }

  r.assumptions.mean_large_at_p1 = pm.n1l.m1;
  r.assumptions.mean_small_at_p2 = pm.n2s.m1;
  r.assumptions.large_at_p1_holds = pm.n1l.m1 >= 1;
  r.assumptions.small_at_p2_holds = pm.n2s.m1 >= p.k;
  r.assumptions.h2_positive = pm.h[1].m1 > 0;
  return r;
}

inline MsfqResult analyze_msfq(const WorkloadSpec& spec, int ell) {
  return analyze_msfq(MsfqParams::from_workload(spec, ell));
}

// ---------------------------------------------------------------------------
// JSON export

inline nlohmann::json to_json(const MsfqParams& p) {
  return {{"k", p.k},
          {"lambda_small", p.lambda_small},
          {"lambda_large", p.lambda_large},
          {"mu_small", p.mu_small},
          {"mu_large", p.mu_large},
          {"ell", p.ell}};
}

inline nlohmann::json to_json(const MsfqResult& r) {
  using nlohmann::json;
  const auto& pm = r.moments;
  json h = json::array();
  for (const auto& x : pm.h) h.push_back({{"mean", x.m1}, {"second", x.m2}});
  json terms = {{"T1_large", r.terms.t1_large},
                {"T234_large", r.terms.t234_large},
                {"T14_small", r.terms.t14_small},
                {"T2_small", r.terms.t2_small},
                {"T3_small", r.terms.t3_small ? json(*r.terms.t3_small) : json(nullptr)}};
  return {{"params", to_json(r.params)},
          {"m", pm.m},
          {"H_moments", h},
          {"H234", {{"mean", pm.h234.m1}, {"second", pm.h234.m2}}},
          {"H41", {{"mean", pm.h41.m1}, {"second", pm.h41.m2}}},
          {"N_moments",
           {{"N1L", {{"mean", pm.n1l.m1}, {"second", pm.n1l.m2}}},
            {"N2S", {{"mean", pm.n2s.m1}, {"second", pm.n2s.m2}}}}},
          {"T_terms", terms},
          {"E_T", r.mean_response},
          {"E_T_small", r.mean_response_small},
          {"E_T_large", r.mean_response_large},
          {"E_T_weighted", r.weighted_response},
          {"assumptions",
           {{"large_at_p1_holds", r.assumptions.large_at_p1_holds},
            {"small_at_p2_holds", r.assumptions.small_at_p2_holds},
            {"h2_positive", r.assumptions.h2_positive}}}};
}

}  // namespace msj::analysis
