#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

namespace clbf {

// Outward-rounded interval arithmetic. Instead of toggling the FPU rounding
// mode we inflate every elementary result: one ulp for IEEE-exact operations
// (+ - * / sqrt), two for libm calls, which glibc documents as good to a
// couple of ulps but not correctly rounded.

inline double ulp_up(double x) {
  return std::nextafter(x, std::numeric_limits<double>::infinity());
}
inline double ulp_dn(double x) {
  return std::nextafter(x, -std::numeric_limits<double>::infinity());
}
inline double ulp_up2(double x) { return ulp_up(ulp_up(x)); }
inline double ulp_dn2(double x) { return ulp_dn(ulp_dn(x)); }

struct interval {
  double lo = 0.0;
  double hi = 0.0;

  interval() = default;
  interval(double v) : lo(v), hi(v) {}
  interval(double l, double h) : lo(l), hi(h) {}

  static interval entire() {
    double inf = std::numeric_limits<double>::infinity();
    return {-inf, inf};
  }

  double width() const { return hi - lo; }
  double mid() const { return 0.5 * (lo + hi); }
  bool contains(double v) const { return lo <= v && v <= hi; }
  bool is_finite() const { return std::isfinite(lo) && std::isfinite(hi); }
};

inline interval operator+(const interval& a, const interval& b) {
  return {ulp_dn(a.lo + b.lo), ulp_up(a.hi + b.hi)};
}
inline interval operator-(const interval& a, const interval& b) {
  return {ulp_dn(a.lo - b.hi), ulp_up(a.hi - b.lo)};
}
inline interval operator-(const interval& a) { return {-a.hi, -a.lo}; }

namespace detail {
// 0 * inf must act as 0 for bound purposes.
inline double iprod(double a, double b) {
  if (a == 0.0 || b == 0.0) return 0.0;
  return a * b;
}
}  // namespace detail

inline interval operator*(const interval& a, const interval& b) {
  double p1 = detail::iprod(a.lo, b.lo);
  double p2 = detail::iprod(a.lo, b.hi);
  double p3 = detail::iprod(a.hi, b.lo);
  double p4 = detail::iprod(a.hi, b.hi);
  double lo = std::min(std::min(p1, p2), std::min(p3, p4));
  double hi = std::max(std::max(p1, p2), std::max(p3, p4));
  return {ulp_dn(lo), ulp_up(hi)};
}

// Division by a zero-containing interval yields the whole line; expression
// evaluation flags that case as a domain violation.
inline interval operator/(const interval& a, const interval& b) {
  if (b.lo <= 0.0 && b.hi >= 0.0) return interval::entire();
  double q1 = a.lo / b.lo, q2 = a.lo / b.hi, q3 = a.hi / b.lo, q4 = a.hi / b.hi;
  double lo = std::min(std::min(q1, q2), std::min(q3, q4));
  double hi = std::max(std::max(q1, q2), std::max(q3, q4));
  return {ulp_dn(lo), ulp_up(hi)};
}

// Tight rule: the image of x^2, not the naive product bound.
inline interval isqr(const interval& a) {
  double alo = std::abs(a.lo), ahi = std::abs(a.hi);
  double big = std::max(alo, ahi);
  double small = std::min(alo, ahi);
  double lo = (a.lo <= 0.0 && a.hi >= 0.0) ? 0.0 : ulp_dn(small * small);
  return {std::max(0.0, lo), ulp_up(big * big)};
}

inline interval iabs(const interval& a) {
  if (a.lo >= 0.0) return a;
  if (a.hi <= 0.0) return {-a.hi, -a.lo};
  return {0.0, std::max(-a.lo, a.hi)};
}

inline interval isqrt(const interval& a) {
  // caller guarantees a.lo >= 0 (clipped + flagged upstream otherwise)
  double lo = a.lo <= 0.0 ? 0.0 : ulp_dn(std::sqrt(a.lo));
  return {std::max(0.0, lo), ulp_up(std::sqrt(a.hi))};
}

inline interval iexp(const interval& a) {
  double lo = ulp_dn2(std::exp(a.lo));
  return {std::max(0.0, lo), ulp_up2(std::exp(a.hi))};
}

inline interval ilog(const interval& a) {
  // caller guarantees a.lo > 0
  return {ulp_dn2(std::log(a.lo)), ulp_up2(std::log(a.hi))};
}

namespace detail {
// Is there an integer k with c + 2*pi*k inside [lo, hi]?  Slightly widened so
// rounding can only add a peak, never miss one.
inline bool hits_phase(double lo, double hi, double c) {
  constexpr double two_pi = 6.283185307179586476925286766559;
  double klo = std::ceil((lo - c) / two_pi - 1e-12);
  double khi = std::floor((hi - c) / two_pi + 1e-12);
  return klo <= khi;
}
}  // namespace detail

inline interval isin(const interval& a) {
  constexpr double half_pi = 1.5707963267948966192313216916398;
  if (!a.is_finite() || a.width() >= 6.283185307179586)
    return {-1.0, 1.0};
  double s1 = std::sin(a.lo), s2 = std::sin(a.hi);
  double lo = std::min(s1, s2), hi = std::max(s1, s2);
  if (detail::hits_phase(a.lo, a.hi, half_pi)) hi = 1.0;
  if (detail::hits_phase(a.lo, a.hi, -half_pi)) lo = -1.0;
  return {std::max(-1.0, ulp_dn2(lo)), std::min(1.0, ulp_up2(hi))};
}

inline interval icos(const interval& a) {
  constexpr double pi = 3.1415926535897932384626433832795;
  if (!a.is_finite() || a.width() >= 6.283185307179586)
    return {-1.0, 1.0};
  double c1 = std::cos(a.lo), c2 = std::cos(a.hi);
  double lo = std::min(c1, c2), hi = std::max(c1, c2);
  if (detail::hits_phase(a.lo, a.hi, 0.0)) hi = 1.0;
  if (detail::hits_phase(a.lo, a.hi, pi)) lo = -1.0;
  return {std::max(-1.0, ulp_dn2(lo)), std::min(1.0, ulp_up2(hi))};
}

inline interval imin(const interval& a, const interval& b) {
  return {std::min(a.lo, b.lo), std::min(a.hi, b.hi)};
}
inline interval imax(const interval& a, const interval& b) {
  return {std::max(a.lo, b.lo), std::max(a.hi, b.hi)};
}

inline interval ipow(const interval& a, int n) {
  if (n == 0) return {1.0, 1.0};
  if (n == 1) return a;
  if (n < 0) return interval{1.0, 1.0} / ipow(a, -n);
  if (n % 2 == 0) {
    interval t = iabs(a);  // monotone on [0, inf)
    return {std::max(0.0, ulp_dn2(std::pow(t.lo, n))), ulp_up2(std::pow(t.hi, n))};
  }
  return {ulp_dn2(std::pow(a.lo, n)), ulp_up2(std::pow(a.hi, n))};
}

inline interval hull(const interval& a, const interval& b) {
  return {std::min(a.lo, b.lo), std::max(a.hi, b.hi)};
}

using hyperbox = std::vector<interval>;

inline std::size_t widest_dim(const hyperbox& b) {
  std::size_t best = 0;
  double w = -1.0;
  for (std::size_t i = 0; i < b.size(); ++i) {
    double wi = b[i].width();
    if (wi > w) { w = wi; best = i; }
  }
  return best;
}

inline double max_width(const hyperbox& b) {
  double w = 0.0;
  for (const auto& iv : b) w = std::max(w, iv.width());
  return w;
}

inline std::vector<double> box_mid(const hyperbox& b) {
  std::vector<double> m(b.size());
  for (std::size_t i = 0; i < b.size(); ++i) m[i] = b[i].mid();
  return m;
}

}  // namespace clbf
