#include "agemix/transforms.hpp"

#include <cmath>
#include <string>

namespace agemix {

namespace {

[[noreturn]] void fail(const Transform& t, const std::string& what, double a, Sex s, double value)
{
    throw TransformError(std::string(to_string(t.kind)) + ": " + what + " for record (respondent_age=" +
                         std::to_string(a) + ", sex=" + to_string(s) + ", value=" + std::to_string(value) + ")");
}

}  // namespace

std::string_view to_string(TransformKind kind)
{
    switch (kind) {
    case TransformKind::LinearAge: return "linear_age";
    case TransformKind::AgeDifference: return "age_difference";
    case TransformKind::LogAge: return "log_age";
    case TransformKind::LogRatio: return "log_ratio";
    case TransformKind::GammaReflected: return "gamma_reflected";
    case TransformKind::BetaRescaled: return "beta_rescaled";
    }
    return "unknown";
}

std::string_view display_name(TransformKind kind)
{
    switch (kind) {
    case TransformKind::LinearAge: return "Linear age";
    case TransformKind::AgeDifference: return "Age difference";
    case TransformKind::LogAge: return "Log-age";
    case TransformKind::LogRatio: return "Log-ratio";
    case TransformKind::GammaReflected: return "Reflected age";
    case TransformKind::BetaRescaled: return "Rescaled age";
    }
    return "Unknown";
}

TransformKind transform_from_string(std::string_view name)
{
    for (auto k : {TransformKind::LinearAge, TransformKind::AgeDifference, TransformKind::LogAge,
                   TransformKind::LogRatio, TransformKind::GammaReflected, TransformKind::BetaRescaled}) {
        if (name == to_string(k)) return k;
    }
    throw std::invalid_argument("unknown transform: " + std::string(name));
}

std::vector<TransformKind> applicable_transforms(Family family)
{
    switch (family) {
    case Family::Gamma: return {TransformKind::GammaReflected};
    case Family::Beta: return {TransformKind::BetaRescaled};
    default: return {kRealLineTransforms.begin(), kRealLineTransforms.end()};
    }
}

bool is_applicable(Family family, TransformKind kind)
{
    for (auto k : applicable_transforms(family)) {
        if (k == kind) return true;
    }
    return false;
}

double forward(const Transform& t, double a, Sex s, double p)
{
    switch (t.kind) {
    case TransformKind::LinearAge:
        return p;
    case TransformKind::AgeDifference:
        return p - a;
    case TransformKind::LogAge:
        if (!(p > 0.0)) fail(t, "partner age must be positive", a, s, p);
        return std::log(p);
    case TransformKind::LogRatio:
        if (!(p > 0.0)) fail(t, "partner age must be positive", a, s, p);
        if (!(a > 0.0)) fail(t, "respondent age must be positive", a, s, a);
        return std::log(p / a);
    case TransformKind::GammaReflected:
        if (!(p > 0.0 && p < t.offset)) fail(t, "partner age outside (0, offset)", a, s, p);
        return s == Sex::Male ? t.offset - p : p;
    case TransformKind::BetaRescaled:
        if (!(p > 0.0 && p < t.upper_bound)) fail(t, "partner age outside (0, upper bound)", a, s, p);
        return p / t.upper_bound;
    }
    return p;
}

double inverse(const Transform& t, double a, Sex s, double y)
{
    switch (t.kind) {
    case TransformKind::LinearAge:
        return y;
    case TransformKind::AgeDifference:
        return y + a;
    case TransformKind::LogAge:
        return std::exp(y);
    case TransformKind::LogRatio:
        return a * std::exp(y);
    case TransformKind::GammaReflected:
        return s == Sex::Male ? t.offset - y : y;
    case TransformKind::BetaRescaled:
        if (!(y > 0.0 && y < 1.0)) fail(t, "y outside (0, 1)", a, s, y);
        return y * t.upper_bound;
    }
    return y;
}

double log_jacobian(const Transform& t, double a, Sex s, double p)
{
    switch (t.kind) {
    case TransformKind::LinearAge:
    case TransformKind::AgeDifference:
        return 0.0;
    case TransformKind::LogAge:
    case TransformKind::LogRatio:
        if (!(p > 0.0)) fail(t, "partner age must be positive", a, s, p);
        return -std::log(p);
    case TransformKind::GammaReflected:
        if (!(p > 0.0 && p < t.offset)) fail(t, "partner age outside (0, offset)", a, s, p);
        return 0.0;
    case TransformKind::BetaRescaled:
        if (!(p > 0.0 && p < t.upper_bound)) fail(t, "partner age outside (0, upper bound)", a, s, p);
        return -std::log(t.upper_bound);
    }
    return 0.0;
}

}  // namespace agemix
