#pragma once

// Second-order forward-mode jets: a value with its first and second
// derivatives along one variable. Composing transforms on jets yields
// moments at the expansion point.

#include <cmath>
#include <ostream>
#include <type_traits>

namespace msj::analysis {

template <class R>
struct BasicJet {
  R v{};   // value
  R d1{};  // first derivative
  R d2{};  // second derivative

  constexpr BasicJet() = default;
  constexpr BasicJet(R value) : v(value) {}  // NOLINT: constants promote implicitly
  constexpr BasicJet(R value, R first, R second) : v(value), d1(first), d2(second) {}

  static constexpr BasicJet variable(R at) { return {at, R(1), R(0)}; }

  friend constexpr BasicJet operator+(const BasicJet& a, const BasicJet& b) {
    return {a.v + b.v, a.d1 + b.d1, a.d2 + b.d2};
  }
  friend constexpr BasicJet operator-(const BasicJet& a, const BasicJet& b) {
    return {a.v - b.v, a.d1 - b.d1, a.d2 - b.d2};
  }
  friend constexpr BasicJet operator-(const BasicJet& a) { return {-a.v, -a.d1, -a.d2}; }
  friend constexpr BasicJet operator*(const BasicJet& a, const BasicJet& b) {
    return {a.v * b.v, a.d1 * b.v + a.v * b.d1, a.d2 * b.v + R(2) * a.d1 * b.d1 + a.v * b.d2};
  }
  friend constexpr BasicJet operator/(const BasicJet& a, const BasicJet& b) { return a * reciprocal(b); }

  BasicJet& operator+=(const BasicJet& o) { return *this = *this + o; }
  BasicJet& operator-=(const BasicJet& o) { return *this = *this - o; }
  BasicJet& operator*=(const BasicJet& o) { return *this = *this * o; }
  BasicJet& operator/=(const BasicJet& o) { return *this = *this / o; }

  friend constexpr BasicJet reciprocal(const BasicJet& a) {
    const R r = R(1) / a.v;
    return {r, -a.d1 * r * r, R(2) * a.d1 * a.d1 * r * r * r - a.d2 * r * r};
  }

  // Applies a scalar function given its value and first two derivatives at a.v.
  friend BasicJet chain(const BasicJet& a, R f, R f1, R f2) {
    return {f, f1 * a.d1, f2 * a.d1 * a.d1 + f1 * a.d2};
  }

  friend BasicJet sqrt(const BasicJet& a) {
    using std::sqrt;
    const R r = sqrt(a.v);
    return chain(a, r, R(1) / (R(2) * r), R(-1) / (R(4) * r * a.v));
  }

  friend BasicJet pow(const BasicJet& a, R p) {
    using std::pow;
    if (p == R(0)) return BasicJet(R(1));
    const R f = pow(a.v, p);
    return chain(a, f, p * pow(a.v, p - R(1)), p * (p - R(1)) * pow(a.v, p - R(2)));
  }

  friend std::ostream& operator<<(std::ostream& os, const BasicJet& a) {
    return os << '(' << a.v << ", " << a.d1 << ", " << a.d2 << ')';
  }
};

using Jet = BasicJet<double>;

// Scalar helpers so transforms can be written once for double, long double
// and jets.
template <class T>
struct ScalarOf {
  using type = T;
};
template <class R>
struct ScalarOf<BasicJet<R>> {
  using type = R;
};
template <class T>
using scalar_of_t = typename ScalarOf<T>::type;

template <class T>
T power(const T& x, scalar_of_t<T> p) {
  using std::pow;
  return pow(x, p);
}

template <class T>
T square_root(const T& x) {
  using std::sqrt;
  return sqrt(x);
}

template <class T>
scalar_of_t<T> value_of(const T& x) {
  if constexpr (std::is_arithmetic_v<T>) {
    return x;
  } else {
    return x.v;
  }
}

// Moments of a nonnegative random variable from its Laplace-Stieltjes transform.
struct Moments {
  double m1 = 0;  // E[X]
  double m2 = 0;  // E[X^2]

  double variance() const { return m2 - m1 * m1; }
};

// Moments of a count from its probability generating function.
struct CountMoments {
  double m1 = 0;        // E[N]
  double m2 = 0;        // E[N^2]
  double factorial2 = 0;  // E[N(N-1)]
};

template <class F>
Moments lst_moments(F&& f) {
  const Jet j = f(Jet::variable(0.0));
  return {-j.d1, j.d2};
}

template <class F>
CountMoments pgf_moments(F&& f) {
  const Jet j = f(Jet::variable(1.0));
  return {j.d1, j.d2 + j.d1, j.d2};
}

}  // namespace msj::analysis
