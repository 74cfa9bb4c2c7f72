#include "agemix/special.hpp"

#include <boost/math/special_functions/erf.hpp>

#include <algorithm>
#include <cmath>
#include <limits>

namespace agemix::special {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
// Below this, erfc(-x/sqrt2) underflows towards subnormals.
constexpr double kAsymptoticCut = -37.0;

// 1 - 1/x^2 + 3/x^4 - 15/x^6 + ... truncated where terms stop shrinking.
double mills_series(double x)
{
    const double inv2 = 1.0 / (x * x);
    double term = 1.0;
    double sum = 1.0;
    for (int k = 1; k < 8; ++k) {
        term *= -(2.0 * k - 1.0) * inv2;
        sum += term;
    }
    return sum;
}

}  // namespace

double std_normal_log_pdf(double x) { return -0.5 * x * x - kLogSqrt2Pi; }

double std_normal_cdf(double x) { return 0.5 * std::erfc(-x * kInvSqrt2); }

double std_normal_log_cdf(double x)
{
    if (x > 5.0) {
        return std::log1p(-0.5 * std::erfc(x * kInvSqrt2));
    }
    if (x > kAsymptoticCut) {
        return std::log(0.5 * std::erfc(-x * kInvSqrt2));
    }
    return -0.5 * x * x - std::log(-x) - kLogSqrt2Pi + std::log(mills_series(x));
}

double inverse_mills_ratio(double x)
{
    if (x > kAsymptoticCut) {
        return std::exp(std_normal_log_pdf(x) - std_normal_log_cdf(x));
    }
    return -x / mills_series(x);
}

double std_normal_quantile(double q)
{
    if (q <= 0.0) return -std::numeric_limits<double>::infinity();
    if (q >= 1.0) return std::numeric_limits<double>::infinity();
    return -std::sqrt(2.0) * boost::math::erfc_inv(2.0 * q);
}

double log_cosh(double w)
{
    const double a = std::abs(w);
    return a + std::log1p(std::exp(-2.0 * a)) - kLog2;
}

double log_sum_exp(double a, double b)
{
    if (a == -std::numeric_limits<double>::infinity()) return b;
    if (b == -std::numeric_limits<double>::infinity()) return a;
    const double m = std::max(a, b);
    return m + std::log(std::exp(a - m) + std::exp(b - m));
}

}  // namespace agemix::special
