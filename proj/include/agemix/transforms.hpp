#pragma once

#include "agemix/distributions.hpp"
#include "agemix/record.hpp"

#include <stdexcept>
#include <string_view>
#include <vector>

namespace agemix {

enum class TransformKind { LinearAge, AgeDifference, LogAge, LogRatio, GammaReflected, BetaRescaled };

/// Outcome parametrisation y = g(partner_age; respondent_age, sex).
///
/// GammaReflected maps men's partner ages to `offset - p` (women unchanged);
/// BetaRescaled maps every partner age to `p / upper_bound`.
struct Transform {
    TransformKind kind = TransformKind::LinearAge;
    double upper_bound = 150.0;
    double offset = 150.0;

    static Transform of(TransformKind kind) { return Transform{kind}; }
};

class TransformError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::string_view to_string(TransformKind kind);
std::string_view display_name(TransformKind kind);
TransformKind transform_from_string(std::string_view name);

/// The four outcome parametrisations shared by the real-line families.
inline constexpr std::array<TransformKind, 4> kRealLineTransforms{
    TransformKind::AgeDifference, TransformKind::LinearAge, TransformKind::LogAge, TransformKind::LogRatio};

/// Transforms a family may be fitted with: four for real-line families, one each for gamma and beta.
std::vector<TransformKind> applicable_transforms(Family family);
bool is_applicable(Family family, TransformKind kind);

double forward(const Transform& t, double respondent_age, Sex sex, double partner_age);
double inverse(const Transform& t, double respondent_age, Sex sex, double y);
/// log |dy/dp|: add to a y-scale log density to obtain the partner-age-scale log density.
double log_jacobian(const Transform& t, double respondent_age, Sex sex, double partner_age);

inline double forward(const Transform& t, const PartnershipRecord& r)
{
    return forward(t, r.respondent_age, r.respondent_sex, r.partner_age);
}
inline double log_jacobian(const Transform& t, const PartnershipRecord& r)
{
    return log_jacobian(t, r.respondent_age, r.respondent_sex, r.partner_age);
}

}  // namespace agemix
