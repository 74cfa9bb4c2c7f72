#pragma once

#include "agemix/record.hpp"

#include <Eigen/Core>
#include <nlohmann/json_fwd.hpp>

#include <array>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

namespace agemix {

/// Regression specifications in increasing complexity. `Constant` (intercept
/// only for every parameter) serves the per-subset distribution comparison.
enum class ModelTag { Constant, Conventional, Distributional1, Distributional2, Distributional3, Distributional4 };

inline constexpr std::array<ModelTag, 5> kRegressionModels{
    ModelTag::Conventional, ModelTag::Distributional1, ModelTag::Distributional2, ModelTag::Distributional3,
    ModelTag::Distributional4};

std::string_view to_string(ModelTag tag);
std::string_view display_name(ModelTag tag);
ModelTag model_from_string(std::string_view name);

/// Distributional-parameter slots in coefficient-concatenation order.
enum class Slot : int { Mu = 0, Sigma = 1, Epsilon = 2, Delta = 3 };
inline constexpr int kSlotCount = 4;
inline constexpr std::array<Slot, 4> kSlots{Slot::Mu, Slot::Sigma, Slot::Epsilon, Slot::Delta};
std::string_view to_string(Slot slot);

/// Row recipe: (1), (1, s, a), (1, s, a, s*a), or (1, s, phi_1..phi_K, s*phi_1..s*phi_K).
enum class RowKind { Intercept, AgeSex, Interaction, Spline };
RowKind row_kind(ModelTag tag, Slot slot);

/// Natural cubic spline basis without intercept: K = interior + 1 columns,
/// linear outside [lower, upper], zero curvature at both boundary knots.
///
/// Evaluation works on age rescaled to [0, 1] over the boundary, using the
/// truncated-power construction N_1 = u, N_{k+1} = d_k(u) - d_{M-1}(u).
class NaturalSpline {
public:
    NaturalSpline(std::vector<double> interior_knots, double lower, double upper);

    Eigen::Index size() const { return static_cast<Eigen::Index>(interior_.size()) + 1; }
    Eigen::VectorXd basis(double age) const;
    /// d^order/dage^order of every basis column, order in {1, 2}.
    Eigen::VectorXd derivative(double age, int order) const;

    const std::vector<double>& interior_knots() const { return interior_; }
    double lower() const { return lower_; }
    double upper() const { return upper_; }

private:
    Eigen::VectorXd evaluate(double age, int order) const;

    std::vector<double> interior_;
    double lower_;
    double upper_;
    std::vector<double> unit_knots_;  // boundary + interior on the [0, 1] scale
};

Eigen::VectorXd spline_basis(double age, std::span<const double> interior_knots, std::pair<double, double> boundary);

struct ModelSpec {
    ModelTag tag = ModelTag::Conventional;
    int interior_knots = 5;
    double boundary_low = 15.0;
    double boundary_high = 64.0;
    /// Explicit interior knots; when empty they are spaced evenly over the boundary.
    std::vector<double> knots;

    std::vector<double> resolved_knots() const;
    NaturalSpline spline() const;
    bool uses_splines() const;
};

/// Places interior knots at the quantiles j/(K+1) of the observed ages,
/// falling back to even spacing when those are not strictly increasing.
ModelSpec with_knots_from_ages(ModelSpec spec, std::span<const double> ages);

struct DesignRow {
    std::array<Eigen::VectorXd, 4> x;
    const Eigen::VectorXd& operator[](Slot s) const { return x[static_cast<int>(s)]; }
};

/// Design rows for one specification. Linear-age columns enter as
/// (age - age_center); spline columns are unaffected by the centre.
class Design {
public:
    explicit Design(ModelSpec spec, double age_center = 0.0);

    DesignRow row(double age, Sex sex) const;
    Eigen::VectorXd row(Slot slot, double age, Sex sex) const;
    Eigen::Index row_length(Slot slot) const;
    Eigen::MatrixXd matrix(Slot slot, std::span<const PartnershipRecord> records) const;

    const ModelSpec& spec() const { return spec_; }
    double age_center() const { return age_center_; }

private:
    ModelSpec spec_;
    NaturalSpline spline_;
    double age_center_;
};

DesignRow build_design(const ModelSpec& spec, double age, Sex sex);

void to_json(nlohmann::json& j, const ModelSpec& spec);
void from_json(const nlohmann::json& j, ModelSpec& spec);

}  // namespace agemix
