#pragma once

// Standard normal helpers evaluated in log space where it matters.

namespace agemix::special {

inline constexpr double kLogSqrt2Pi = 0.91893853320467274178;
inline constexpr double kLog2 = 0.69314718055994530942;

double std_normal_log_pdf(double x);
double std_normal_cdf(double x);
/// log Phi(x), accurate deep into the left tail.
double std_normal_log_cdf(double x);
/// phi(x) / Phi(x).
double inverse_mills_ratio(double x);
double std_normal_quantile(double q);

/// log cosh(w) without overflow.
double log_cosh(double w);
double log_sum_exp(double a, double b);

}  // namespace agemix::special
