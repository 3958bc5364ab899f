#pragma once

#include <cmath>

#include "npr/errors.hpp"

namespace npr {

/// Second-order truncated Taylor scalar in a single direction:
///
///   f(x + eps * s) = val + d1 * eps + 0.5 * d2 * eps^2 + O(eps^3)
///
/// so d1 and d2 are the first and second directional derivatives themselves
/// (the 1/2 lives in the series, not in the stored coefficient).
struct Jet2 {
  double val = 0.0;
  double d1 = 0.0;
  double d2 = 0.0;

  constexpr Jet2() = default;
  constexpr Jet2(double v, double first, double second) : val(v), d1(first), d2(second) {}

  static constexpr Jet2 constant(double v) { return {v, 0.0, 0.0}; }
  /// Seed of the active coordinate: unit first derivative, zero curvature.
  static constexpr Jet2 seed(double v) { return {v, 1.0, 0.0}; }
};

inline constexpr Jet2 operator+(const Jet2& a, const Jet2& b) {
  return {a.val + b.val, a.d1 + b.d1, a.d2 + b.d2};
}
inline constexpr Jet2 operator-(const Jet2& a, const Jet2& b) {
  return {a.val - b.val, a.d1 - b.d1, a.d2 - b.d2};
}
inline constexpr Jet2 operator-(const Jet2& a) { return {-a.val, -a.d1, -a.d2}; }

inline constexpr Jet2 operator*(const Jet2& a, const Jet2& b) {
  return {a.val * b.val,
          a.d1 * b.val + a.val * b.d1,
          a.d2 * b.val + 2.0 * a.d1 * b.d1 + a.val * b.d2};
}

inline Jet2 operator/(const Jet2& a, const Jet2& b) {
  if (b.val == 0.0) throw NumericError("jet division by value 0");
  const double v = a.val / b.val;
  const double d1 = (a.d1 - v * b.d1) / b.val;
  const double d2 = (a.d2 - v * b.d2 - 2.0 * d1 * b.d1) / b.val;
  return {v, d1, d2};
}

inline constexpr Jet2 operator+(const Jet2& a, double c) { return {a.val + c, a.d1, a.d2}; }
inline constexpr Jet2 operator+(double c, const Jet2& a) { return a + c; }
inline constexpr Jet2 operator-(const Jet2& a, double c) { return {a.val - c, a.d1, a.d2}; }
inline constexpr Jet2 operator-(double c, const Jet2& a) { return {c - a.val, -a.d1, -a.d2}; }
inline constexpr Jet2 operator*(const Jet2& a, double c) { return {a.val * c, a.d1 * c, a.d2 * c}; }
inline constexpr Jet2 operator*(double c, const Jet2& a) { return a * c; }
inline Jet2 operator/(const Jet2& a, double c) { return {a.val / c, a.d1 / c, a.d2 / c}; }
inline Jet2 operator/(double c, const Jet2& a) { return Jet2::constant(c) / a; }

/// Chain rule for w = f(v) given f, f', f'' at v.val.
inline constexpr Jet2 jet_chain(double f0, double f1, double f2, const Jet2& v) {
  return {f0, f1 * v.d1, f1 * v.d2 + f2 * v.d1 * v.d1};
}

inline Jet2 sin(const Jet2& v) {
  const double s = std::sin(v.val), c = std::cos(v.val);
  return jet_chain(s, c, -s, v);
}
inline Jet2 cos(const Jet2& v) {
  const double s = std::sin(v.val), c = std::cos(v.val);
  return jet_chain(c, -s, -c, v);
}
inline Jet2 exp(const Jet2& v) {
  const double e = std::exp(v.val);
  return jet_chain(e, e, e, v);
}
inline Jet2 tanh(const Jet2& v) {
  const double t = std::tanh(v.val);
  const double sech2 = 1.0 - t * t;
  return jet_chain(t, sech2, -2.0 * t * sech2, v);
}

/// Integer power. n may be negative (requires val != 0).
inline Jet2 pow_int(const Jet2& v, int n) {
  if (n == 0) return Jet2::constant(1.0);
  if (n < 0 && v.val == 0.0) throw NumericError("jet pow: zero base with negative exponent");
  const double f0 = std::pow(v.val, n);
  const double f1 = n * std::pow(v.val, n - 1);
  const double f2 = static_cast<double>(n) * (n - 1) * std::pow(v.val, n - 2);
  return jet_chain(f0, f1, f2, v);
}

/// |v| with the subgradient convention sign(0) = 0.
inline Jet2 abs(const Jet2& v) {
  const double s = v.val > 0.0 ? 1.0 : (v.val < 0.0 ? -1.0 : 0.0);
  return {std::abs(v.val), s * v.d1, s * v.d2};
}

/// min by value; derivatives follow the selected branch.
inline Jet2 min(const Jet2& a, const Jet2& b) { return a.val <= b.val ? a : b; }

}  // namespace npr
