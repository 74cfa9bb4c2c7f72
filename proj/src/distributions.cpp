#include "agemix/distributions.hpp"

#include "agemix/special.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/math/tools/roots.hpp>

#include <algorithm>
#include <cmath>
#include <limits>

namespace agemix {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// sinh/cosh arguments are clamped here so intermediates stay finite.
constexpr double kMaxHyperbolicArg = 700.0;

bool positive(double v) { return std::isfinite(v) && v > 0.0; }

double sas_argument(double z, double epsilon, double delta)
{
    return std::clamp(epsilon + delta * std::asinh(z), -kMaxHyperbolicArg, kMaxHyperbolicArg);
}

double log_pdf_unchecked(const Distribution& d, double x)
{
    const auto& p = d.params;
    switch (d.family) {
    case Family::Normal: {
        const double z = (x - p.mu) / p.sigma;
        return special::std_normal_log_pdf(z) - std::log(p.sigma);
    }
    case Family::SkewNormal: {
        const double z = (x - p.mu) / p.sigma;
        return special::kLog2 - std::log(p.sigma) + special::std_normal_log_pdf(z) +
               special::std_normal_log_cdf(p.epsilon * z);
    }
    case Family::Gamma:
        return (p.k - 1.0) * std::log(x) - x / p.theta - boost::math::lgamma(p.k) -
               p.k * std::log(p.theta);
    case Family::Beta: {
        const double log_beta_fn = boost::math::lgamma(p.alpha) + boost::math::lgamma(p.beta) -
                                   boost::math::lgamma(p.alpha + p.beta);
        return (p.alpha - 1.0) * std::log(x) + (p.beta - 1.0) * std::log1p(-x) - log_beta_fn;
    }
    case Family::SinhArcsinh: {
        const double z = (x - p.mu) / p.sigma;
        const double w = sas_argument(z, p.epsilon, p.delta);
        const double s = std::sinh(w);
        return -std::log(p.sigma) - special::kLogSqrt2Pi + std::log(p.delta) +
               special::log_cosh(w) - std::log(std::hypot(1.0, z)) - 0.5 * s * s;
    }
    }
    return -kInf;
}

// F(z) = int_{-inf}^{z} 2 phi(t) Phi(shape t) dt for z <= 0.
double skew_normal_left_tail(double z, double shape)
{
    if (z < -40.0) return 0.0;
    auto integrand = [shape](double t) {
        return 2.0 * std::exp(special::std_normal_log_pdf(t) + special::std_normal_log_cdf(shape * t));
    };
    double error = 0.0;
    return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(integrand, -kInf, z, 20,
                                                                         1e-13, &error);
}

double skew_normal_standard_cdf(double z, double shape)
{
    if (shape == 0.0) return special::std_normal_cdf(z);
    if (z <= 0.0) return skew_normal_left_tail(z, shape);
    return 1.0 - skew_normal_left_tail(-z, -shape);
}

double skew_normal_standard_quantile(double q, double shape)
{
    if (shape == 0.0) return special::std_normal_quantile(q);
    const double dlt = shape / std::sqrt(1.0 + shape * shape);
    const double mean = dlt * std::sqrt(2.0 / M_PI);
    const double sd = std::sqrt(1.0 - 2.0 * dlt * dlt / M_PI);
    const double guess = mean + sd * special::std_normal_quantile(q);
    auto f = [&](double z) { return skew_normal_standard_cdf(z, shape) - q; };

    double lo = guess - sd;
    double hi = guess + sd;
    double step = sd;
    while (f(lo) > 0.0) {
        step *= 2.0;
        lo -= step;
    }
    step = sd;
    while (f(hi) < 0.0) {
        step *= 2.0;
        hi += step;
    }
    std::uintmax_t max_iter = 200;
    const auto [a, b] =
        boost::math::tools::toms748_solve(f, lo, hi, boost::math::tools::eps_tolerance<double>(52), max_iter);
    return 0.5 * (a + b);
}

}  // namespace

std::string_view to_string(Family family)
{
    switch (family) {
    case Family::Normal: return "normal";
    case Family::SkewNormal: return "skew_normal";
    case Family::Gamma: return "gamma";
    case Family::Beta: return "beta";
    case Family::SinhArcsinh: return "sinh_arcsinh";
    }
    return "unknown";
}

std::string_view display_name(Family family)
{
    switch (family) {
    case Family::Normal: return "Normal";
    case Family::SkewNormal: return "Skew normal";
    case Family::Gamma: return "Gamma";
    case Family::Beta: return "Beta";
    case Family::SinhArcsinh: return "Sinh-arcsinh";
    }
    return "Unknown";
}

Family family_from_string(std::string_view name)
{
    for (Family f : kAllFamilies) {
        if (name == to_string(f)) return f;
    }
    throw std::invalid_argument("unknown distribution family: " + std::string(name));
}

Distribution Distribution::normal(double mu, double sigma)
{
    Distribution d{Family::Normal, {}};
    d.params.mu = mu;
    d.params.sigma = sigma;
    return d;
}

Distribution Distribution::skew_normal(double mu, double sigma, double epsilon)
{
    Distribution d{Family::SkewNormal, {}};
    d.params.mu = mu;
    d.params.sigma = sigma;
    d.params.epsilon = epsilon;
    return d;
}

Distribution Distribution::gamma(double k, double theta)
{
    Distribution d{Family::Gamma, {}};
    d.params.k = k;
    d.params.theta = theta;
    return d;
}

Distribution Distribution::beta(double alpha, double beta)
{
    Distribution d{Family::Beta, {}};
    d.params.alpha = alpha;
    d.params.beta = beta;
    return d;
}

Distribution Distribution::sinh_arcsinh(double mu, double sigma, double epsilon, double delta)
{
    Distribution d{Family::SinhArcsinh, {}};
    d.params.mu = mu;
    d.params.sigma = sigma;
    d.params.epsilon = epsilon;
    d.params.delta = delta;
    return d;
}

void validate(const Distribution& dist)
{
    const auto& p = dist.params;
    auto require = [&](bool ok, const char* what) {
        if (!ok) {
            throw DomainError(std::string(to_string(dist.family)) + ": invalid parameter " + what);
        }
    };
    switch (dist.family) {
    case Family::SinhArcsinh:
        require(positive(p.delta), "delta");
        [[fallthrough]];
    case Family::SkewNormal:
        require(std::isfinite(p.epsilon), "epsilon");
        [[fallthrough]];
    case Family::Normal:
        require(std::isfinite(p.mu), "mu");
        require(positive(p.sigma), "sigma");
        break;
    case Family::Gamma:
        require(positive(p.k), "k");
        require(positive(p.theta), "theta");
        break;
    case Family::Beta:
        require(positive(p.alpha), "alpha");
        require(positive(p.beta), "beta");
        break;
    }
}

bool in_support(Family family, double x)
{
    switch (family) {
    case Family::Gamma: return std::isfinite(x) && x > 0.0;
    case Family::Beta: return x > 0.0 && x < 1.0;
    default: return std::isfinite(x);
    }
}

double log_pdf(const Distribution& dist, double x, OutsideSupport mode)
{
    validate(dist);
    if (!in_support(dist.family, x)) {
        if (mode == OutsideSupport::NegativeInfinity) return -kInf;
        throw DomainError(std::string(to_string(dist.family)) + ": x = " + std::to_string(x) +
                          " outside support");
    }
    return log_pdf_unchecked(dist, x);
}

Eigen::ArrayXd log_pdf(const Distribution& dist, const Eigen::Ref<const Eigen::ArrayXd>& x,
                       OutsideSupport mode)
{
    return x.unaryExpr([&](double v) { return log_pdf(dist, v, mode); });
}

double pdf(const Distribution& dist, double x)
{
    return std::exp(log_pdf(dist, x, OutsideSupport::NegativeInfinity));
}

double cdf(const Distribution& dist, double x)
{
    validate(dist);
    const auto& p = dist.params;
    switch (dist.family) {
    case Family::Normal:
        return special::std_normal_cdf((x - p.mu) / p.sigma);
    case Family::SkewNormal:
        return std::clamp(skew_normal_standard_cdf((x - p.mu) / p.sigma, p.epsilon), 0.0, 1.0);
    case Family::Gamma:
        if (x <= 0.0) return 0.0;
        return boost::math::gamma_p(p.k, x / p.theta);
    case Family::Beta:
        if (x <= 0.0) return 0.0;
        if (x >= 1.0) return 1.0;
        return boost::math::ibeta(p.alpha, p.beta, x);
    case Family::SinhArcsinh: {
        const double z = (x - p.mu) / p.sigma;
        return special::std_normal_cdf(std::sinh(sas_argument(z, p.epsilon, p.delta)));
    }
    }
    return 0.0;
}

double quantile(const Distribution& dist, double q)
{
    validate(dist);
    if (!(q > 0.0 && q < 1.0)) {
        throw DomainError("quantile: probability " + std::to_string(q) + " outside (0, 1)");
    }
    const auto& p = dist.params;
    switch (dist.family) {
    case Family::Normal:
        return p.mu + p.sigma * special::std_normal_quantile(q);
    case Family::SkewNormal:
        return p.mu + p.sigma * skew_normal_standard_quantile(q, p.epsilon);
    case Family::Gamma:
        return p.theta * boost::math::gamma_p_inv(p.k, q);
    case Family::Beta:
        return boost::math::ibeta_inv(p.alpha, p.beta, q);
    case Family::SinhArcsinh: {
        const double u = std::asinh(special::std_normal_quantile(q));
        return p.mu + p.sigma * std::sinh((u - p.epsilon) / p.delta);
    }
    }
    return 0.0;
}

double draw(const Distribution& dist, Rng& rng)
{
    const auto& p = dist.params;
    std::normal_distribution<double> std_normal;
    switch (dist.family) {
    case Family::Normal:
        return p.mu + p.sigma * std_normal(rng);
    case Family::SkewNormal: {
        const double dlt = p.epsilon / std::sqrt(1.0 + p.epsilon * p.epsilon);
        const double u0 = std_normal(rng);
        const double u1 = std_normal(rng);
        return p.mu + p.sigma * (dlt * std::abs(u0) + std::sqrt(1.0 - dlt * dlt) * u1);
    }
    case Family::Gamma: {
        std::gamma_distribution<double> g(p.k, p.theta);
        return g(rng);
    }
    case Family::Beta: {
        std::gamma_distribution<double> ga(p.alpha, 1.0);
        std::gamma_distribution<double> gb(p.beta, 1.0);
        const double a = ga(rng);
        const double b = gb(rng);
        return a / (a + b);
    }
    case Family::SinhArcsinh: {
        // Closed-form quantile applied to a standard normal variate.
        const double u = std::asinh(std_normal(rng));
        return p.mu + p.sigma * std::sinh((u - p.epsilon) / p.delta);
    }
    }
    return 0.0;
}

Eigen::VectorXd sample(const Distribution& dist, std::size_t n, std::uint64_t seed)
{
    validate(dist);
    Rng rng(seed);
    Eigen::VectorXd out(static_cast<Eigen::Index>(n));
    for (auto& v : out) v = draw(dist, rng);
    return out;
}

Moments empirical_moments(std::span<const double> values)
{
    if (values.empty()) throw std::invalid_argument("empirical_moments: empty input");
    Moments m;
    m.n = values.size();
    const double n = static_cast<double>(values.size());
    double sum = 0.0;
    for (double v : values) sum += v;
    m.mean = sum / n;
    double m2 = 0.0, m3 = 0.0, m4 = 0.0;
    for (double v : values) {
        const double d = v - m.mean;
        const double d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    m.sd = (*lo == *hi) ? 0.0 : std::sqrt(m2);
    if (m.sd > 0.0 && values.size() >= 3) {
        m.skewness = m3 / std::pow(m2, 1.5);
        m.kurtosis = m4 / (m2 * m2);
    }
    return m;
}

}  // namespace agemix
