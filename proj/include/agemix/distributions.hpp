#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>

namespace agemix {

using Rng = std::mt19937_64;

/// The five candidate outcome families.
enum class Family { Normal, SkewNormal, Gamma, Beta, SinhArcsinh };

inline constexpr std::array<Family, 5> kAllFamilies{
    Family::Normal, Family::SkewNormal, Family::Gamma, Family::Beta, Family::SinhArcsinh};

std::string_view to_string(Family family);
/// Display name used in report tables ("Sinh-arcsinh", "Skew normal", ...).
std::string_view display_name(Family family);
Family family_from_string(std::string_view name);

/// Thrown for parameters or evaluation points outside a family's support.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Parameter bundle; only the fields relevant to the family are read.
///
/// Normal uses (mu, sigma); SkewNormal adds epsilon as the shape; Gamma uses
/// (k, theta); Beta uses (alpha, beta); SinhArcsinh uses (mu, sigma, epsilon,
/// delta) with S(x) = sinh(epsilon + delta * asinh(x)).
struct ParamVector {
    double mu = 0.0;
    double sigma = 1.0;
    double epsilon = 0.0;
    double delta = 1.0;
    double k = 1.0;
    double theta = 1.0;
    double alpha = 1.0;
    double beta = 1.0;
};

struct Distribution {
    Family family = Family::Normal;
    ParamVector params;

    static Distribution normal(double mu, double sigma);
    static Distribution skew_normal(double mu, double sigma, double epsilon);
    static Distribution gamma(double k, double theta);
    static Distribution beta(double alpha, double beta);
    static Distribution sinh_arcsinh(double mu, double sigma, double epsilon, double delta);
};

/// Throws DomainError unless every populated positive parameter is > 0 and finite.
void validate(const Distribution& dist);

bool in_support(Family family, double x);

enum class OutsideSupport { Throw, NegativeInfinity };

double log_pdf(const Distribution& dist, double x, OutsideSupport mode = OutsideSupport::Throw);
double pdf(const Distribution& dist, double x);
double cdf(const Distribution& dist, double x);
double quantile(const Distribution& dist, double q);

/// One variate from `rng`; callers that need reproducibility own the engine.
double draw(const Distribution& dist, Rng& rng);
Eigen::VectorXd sample(const Distribution& dist, std::size_t n, std::uint64_t seed);

Eigen::ArrayXd log_pdf(const Distribution& dist, const Eigen::Ref<const Eigen::ArrayXd>& x,
                       OutsideSupport mode = OutsideSupport::Throw);

/// Population central-moment summary; skewness and kurtosis are absent when sd == 0.
struct Moments {
    std::size_t n = 0;
    double mean = 0.0;
    double sd = 0.0;
    std::optional<double> skewness;
    std::optional<double> kurtosis;
};

Moments empirical_moments(std::span<const double> values);

}  // namespace agemix
