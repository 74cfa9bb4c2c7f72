#pragma once

#include "agemix/data_io.hpp"
#include "agemix/distributions.hpp"

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/sinh_sinh.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

namespace agemix::testing {

inline Distribution random_distribution(Family family, Rng& rng)
{
    auto u = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
    switch (family) {
    case Family::Normal: return Distribution::normal(u(-5, 5), u(0.3, 3));
    case Family::SkewNormal: return Distribution::skew_normal(u(-5, 5), u(0.3, 3), u(-5, 5));
    case Family::Gamma: return Distribution::gamma(u(0.5, 20), u(0.2, 5));
    case Family::Beta: return Distribution::beta(u(0.5, 20), u(0.5, 20));
    case Family::SinhArcsinh: return Distribution::sinh_arcsinh(u(-5, 5), u(0.3, 3), u(-1.5, 1.5), u(0.4, 2.5));
    }
    return Distribution::normal(0, 1);
}

/// Integral of exp(log_pdf) over the full support.
inline double total_mass(const Distribution& d)
{
    using namespace boost::math::quadrature;
    const auto& p = d.params;
    switch (d.family) {
    case Family::Gamma: {
        exp_sinh<double> q;
        return q.integrate([&](double t) { return p.theta * pdf(d, p.theta * t); }, 1e-13);
    }
    case Family::Beta: {
        tanh_sinh<double> q;
        return q.integrate([&](double x) { return x > 0 && x < 1 ? pdf(d, x) : 0.0; }, 0.0, 1.0, 1e-13);
    }
    default: {
        sinh_sinh<double> q;
        return q.integrate([&](double t) { return p.sigma * pdf(d, p.mu + p.sigma * t); }, 1e-13);
    }
    }
}

/// Kolmogorov-Smirnov distance between a sample and the model cdf.
inline double ks_statistic(std::vector<double> xs, const Distribution& d)
{
    std::sort(xs.begin(), xs.end());
    const double n = static_cast<double>(xs.size());
    double worst = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double f = cdf(d, xs[i]);
        worst = std::max({worst, f - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - f});
    }
    return worst;
}

/// A Distributional-2 sinh-arcsinh truth with sex-specific linear curves on the log-ratio scale.
inline GeneratorConfig default_truth(std::size_t n, std::uint64_t seed)
{
    GeneratorConfig c;
    c.n = n;
    c.seed = seed;
    c.family = Family::SinhArcsinh;
    c.transform = TransformKind::LogRatio;
    c.spec.tag = ModelTag::Distributional2;
    c.age_center = 35.0;
    c.coefficients = {std::vector<double>{-0.12, 0.25, -0.004, 0.002}, {-1.9, -0.2, -0.01, 0.005},
                      {0.3, -0.6, 0.005, 0.0}, {-0.1, 0.05, 0.0, 0.0}};
    return c;
}

}  // namespace agemix::testing
