#pragma once

#include <cmath>
#include <limits>
#include <numbers>

namespace hdsim::normal {

inline constexpr double inv_sqrt_2pi = 0.3989422804014326779399460599343818684758586311649;

/// Standard normal density.
inline double pdf(double x) noexcept { return inv_sqrt_2pi * std::exp(-0.5 * x * x); }

/// Standard normal CDF; relative accuracy of erfc in both tails.
inline double cdf(double x) noexcept { return 0.5 * std::erfc(-x * std::numbers::sqrt2 / 2.0); }

/// Upper tail 1 - cdf(x) without cancellation.
inline double ccdf(double x) noexcept { return 0.5 * std::erfc(x * std::numbers::sqrt2 / 2.0); }

namespace detail {

// Acklam's rational approximation (|rel err| < 1.2e-9), refined below.
inline double acklam(double p) noexcept {
  constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                          1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                          6.680131188771972e+01,  -1.328068155288572e+01};
  constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                          -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                          3.754408661907416e+00};
  constexpr double p_low = 0.02425;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  if (p <= 1.0 - p_low) {
    const double q = p - 0.5;
    const double r = q * q;
    return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
           (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  }
  const double q = std::sqrt(-2.0 * std::log1p(-p));
  return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
         ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
}

// One Halley step on cdf(x) = p, done in the lower tail for precision.
inline double refine_lower(double x, double p) noexcept {
  const double dens = pdf(x);
  if (dens == 0.0) return x;
  const double u = (cdf(x) - p) / dens;
  return x - u / (1.0 + 0.5 * x * u);
}

}  // namespace detail

/// Inverse standard normal CDF, |error| well below 1e-12 on (0, 1).
inline double quantile(double p) noexcept {
  if (std::isnan(p) || p < 0.0 || p > 1.0) return std::numeric_limits<double>::quiet_NaN();
  if (p == 0.0) return -std::numeric_limits<double>::infinity();
  if (p == 1.0) return std::numeric_limits<double>::infinity();
  if (p > 0.5) {
    // Work on the lower tail of the complement; 1 - p is exact here.
    const double q = 1.0 - p;
    double x = detail::acklam(q);
    x = detail::refine_lower(x, q);
    return -detail::refine_lower(x, q);
  }
  double x = detail::acklam(p);
  x = detail::refine_lower(x, p);
  return detail::refine_lower(x, p);
}

/// x with ccdf(x) = q, accurate for tiny q.
inline double upper_quantile(double q) noexcept { return -quantile(q); }

}  // namespace hdsim::normal
