#include "agemix/design.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace agemix {

namespace {

RowKind row_kind_impl(ModelTag tag, Slot slot)
{
    const bool location = slot == Slot::Mu;
    switch (tag) {
    case ModelTag::Constant: return RowKind::Intercept;
    case ModelTag::Conventional: return location ? RowKind::Interaction : RowKind::Intercept;
    case ModelTag::Distributional1: return location ? RowKind::Interaction : RowKind::AgeSex;
    case ModelTag::Distributional2: return RowKind::Interaction;
    case ModelTag::Distributional3: return location ? RowKind::Spline : RowKind::Interaction;
    case ModelTag::Distributional4: return RowKind::Spline;
    }
    return RowKind::Intercept;
}

}  // namespace

RowKind row_kind(ModelTag tag, Slot slot) { return row_kind_impl(tag, slot); }

namespace {

double cube_plus(double x, int order)
{
    if (x <= 0.0) return 0.0;
    switch (order) {
    case 0: return x * x * x;
    case 1: return 3.0 * x * x;
    default: return 6.0 * x;
    }
}

std::vector<double> evenly_spaced(int count, double lo, double hi)
{
    std::vector<double> out;
    for (int j = 1; j <= count; ++j) out.push_back(lo + (hi - lo) * j / (count + 1));
    return out;
}

}  // namespace

std::string_view to_string(ModelTag tag)
{
    switch (tag) {
    case ModelTag::Constant: return "constant";
    case ModelTag::Conventional: return "conventional";
    case ModelTag::Distributional1: return "distributional1";
    case ModelTag::Distributional2: return "distributional2";
    case ModelTag::Distributional3: return "distributional3";
    case ModelTag::Distributional4: return "distributional4";
    }
    return "unknown";
}

std::string_view display_name(ModelTag tag)
{
    switch (tag) {
    case ModelTag::Constant: return "Constant";
    case ModelTag::Conventional: return "Conventional";
    case ModelTag::Distributional1: return "Distributional 1";
    case ModelTag::Distributional2: return "Distributional 2";
    case ModelTag::Distributional3: return "Distributional 3";
    case ModelTag::Distributional4: return "Distributional 4";
    }
    return "Unknown";
}

ModelTag model_from_string(std::string_view name)
{
    for (auto t : {ModelTag::Constant, ModelTag::Conventional, ModelTag::Distributional1, ModelTag::Distributional2,
                   ModelTag::Distributional3, ModelTag::Distributional4}) {
        if (name == to_string(t)) return t;
    }
    throw std::invalid_argument("unknown model specification: " + std::string(name));
}

std::string_view to_string(Slot slot)
{
    switch (slot) {
    case Slot::Mu: return "mu";
    case Slot::Sigma: return "sigma";
    case Slot::Epsilon: return "epsilon";
    case Slot::Delta: return "delta";
    }
    return "unknown";
}

NaturalSpline::NaturalSpline(std::vector<double> interior_knots, double lower, double upper)
    : interior_(std::move(interior_knots)), lower_(lower), upper_(upper)
{
    if (!(lower_ < upper_)) throw std::invalid_argument("natural spline: boundary must satisfy low < high");
    double previous = lower_;
    for (double k : interior_) {
        if (!(k > previous)) throw std::invalid_argument("natural spline: knots must be strictly increasing");
        previous = k;
    }
    if (!(previous < upper_)) throw std::invalid_argument("natural spline: knots must lie inside the boundary");

    unit_knots_.push_back(0.0);
    for (double k : interior_) unit_knots_.push_back((k - lower_) / (upper_ - lower_));
    unit_knots_.push_back(1.0);
}

Eigen::VectorXd NaturalSpline::evaluate(double age, int order) const
{
    const double width = upper_ - lower_;
    const double u = (age - lower_) / width;
    const auto m = unit_knots_.size();
    const double last = unit_knots_[m - 1];

    auto d = [&](std::size_t k) {
        return (cube_plus(u - unit_knots_[k], order) - cube_plus(u - last, order)) / (last - unit_knots_[k]);
    };

    Eigen::VectorXd out(size());
    out(0) = order == 0 ? u : (order == 1 ? 1.0 : 0.0);
    const double d_last = d(m - 2);
    for (std::size_t k = 0; k + 2 < m; ++k) out(static_cast<Eigen::Index>(k) + 1) = d(k) - d_last;
    return out / std::pow(width, order);
}

Eigen::VectorXd NaturalSpline::basis(double age) const { return evaluate(age, 0); }

Eigen::VectorXd NaturalSpline::derivative(double age, int order) const
{
    if (order != 1 && order != 2) throw std::invalid_argument("natural spline: derivative order must be 1 or 2");
    return evaluate(age, order);
}

Eigen::VectorXd spline_basis(double age, std::span<const double> interior_knots, std::pair<double, double> boundary)
{
    return NaturalSpline({interior_knots.begin(), interior_knots.end()}, boundary.first, boundary.second).basis(age);
}

std::vector<double> ModelSpec::resolved_knots() const
{
    if (!knots.empty()) return knots;
    return evenly_spaced(interior_knots, boundary_low, boundary_high);
}

NaturalSpline ModelSpec::spline() const { return NaturalSpline(resolved_knots(), boundary_low, boundary_high); }

bool ModelSpec::uses_splines() const
{
    return tag == ModelTag::Distributional3 || tag == ModelTag::Distributional4;
}

ModelSpec with_knots_from_ages(ModelSpec spec, std::span<const double> ages)
{
    spec.knots.clear();
    if (ages.empty() || spec.interior_knots <= 0) return spec;
    std::vector<double> sorted(ages.begin(), ages.end());
    std::sort(sorted.begin(), sorted.end());
    std::vector<double> knots;
    for (int j = 1; j <= spec.interior_knots; ++j) {
        const double h = (static_cast<double>(sorted.size()) - 1.0) * j / (spec.interior_knots + 1);
        const auto lo = static_cast<std::size_t>(std::floor(h));
        const auto hi = std::min(lo + 1, sorted.size() - 1);
        knots.push_back(sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]));
    }
    bool ok = knots.front() > spec.boundary_low && knots.back() < spec.boundary_high;
    for (std::size_t i = 1; ok && i < knots.size(); ++i) ok = knots[i] > knots[i - 1];
    if (ok) spec.knots = std::move(knots);
    return spec;
}

Design::Design(ModelSpec spec, double age_center)
    : spec_(std::move(spec)), spline_(spec_.spline()), age_center_(age_center)
{
}

Eigen::Index Design::row_length(Slot slot) const
{
    switch (row_kind(spec_.tag, slot)) {
    case RowKind::Intercept: return 1;
    case RowKind::AgeSex: return 3;
    case RowKind::Interaction: return 4;
    case RowKind::Spline: return 2 + 2 * spline_.size();
    }
    return 1;
}

Eigen::VectorXd Design::row(Slot slot, double age, Sex sex) const
{
    const double s = indicator(sex);
    const double a = age - age_center_;
    Eigen::VectorXd x(row_length(slot));
    switch (row_kind(spec_.tag, slot)) {
    case RowKind::Intercept:
        x << 1.0;
        break;
    case RowKind::AgeSex:
        x << 1.0, s, a;
        break;
    case RowKind::Interaction:
        x << 1.0, s, a, s * a;
        break;
    case RowKind::Spline: {
        const Eigen::VectorXd phi = spline_.basis(age);
        const Eigen::Index k = phi.size();
        x(0) = 1.0;
        x(1) = s;
        x.segment(2, k) = phi;
        x.segment(2 + k, k) = s * phi;
        break;
    }
    }
    return x;
}

DesignRow Design::row(double age, Sex sex) const
{
    DesignRow r;
    for (Slot slot : kSlots) r.x[static_cast<int>(slot)] = row(slot, age, sex);
    return r;
}

Eigen::MatrixXd Design::matrix(Slot slot, std::span<const PartnershipRecord> records) const
{
    Eigen::MatrixXd x(static_cast<Eigen::Index>(records.size()), row_length(slot));
    for (std::size_t i = 0; i < records.size(); ++i) {
        x.row(static_cast<Eigen::Index>(i)) = row(slot, records[i].respondent_age, records[i].respondent_sex).transpose();
    }
    return x;
}

DesignRow build_design(const ModelSpec& spec, double age, Sex sex) { return Design(spec).row(age, sex); }

void to_json(nlohmann::json& j, const ModelSpec& spec)
{
    j = nlohmann::json{{"tag", to_string(spec.tag)},
                       {"interior_knots", spec.interior_knots},
                       {"boundary", {spec.boundary_low, spec.boundary_high}}};
    if (!spec.knots.empty()) j["knots"] = spec.knots;
}

void from_json(const nlohmann::json& j, ModelSpec& spec)
{
    spec = ModelSpec{};
    spec.tag = model_from_string(j.at("tag").get<std::string>());
    if (j.contains("interior_knots")) spec.interior_knots = j.at("interior_knots").get<int>();
    if (j.contains("boundary")) {
        const auto& b = j.at("boundary");
        spec.boundary_low = b.at(0).get<double>();
        spec.boundary_high = b.at(1).get<double>();
    }
    if (j.contains("knots")) spec.knots = j.at("knots").get<std::vector<double>>();
    if (!spec.knots.empty()) spec.interior_knots = static_cast<int>(spec.knots.size());
}

}  // namespace agemix
