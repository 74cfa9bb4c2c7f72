#include "agemix/design.hpp"

#include <Eigen/Dense>
#include <doctest.h>
#include <nlohmann/json.hpp>

#include <cmath>

using namespace agemix;
using doctest::Approx;

namespace {
Eigen::VectorXd vec(std::initializer_list<double> v)
{
    Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) out(i++) = x;
    return out;
}

ModelSpec spec_of(ModelTag tag)
{
    ModelSpec s;
    s.tag = tag;
    return s;
}
}  // namespace

TEST_CASE("conventional rows")
{
    const DesignRow r = build_design(spec_of(ModelTag::Conventional), 30, Sex::Female);
    CHECK(r[Slot::Mu] == vec({1, 1, 30, 30}));
    for (Slot s : {Slot::Sigma, Slot::Epsilon, Slot::Delta}) CHECK(r[s] == vec({1}));
}

TEST_CASE("distributional 1 and 2 rows")
{
    const DesignRow d1 = build_design(spec_of(ModelTag::Distributional1), 42, Sex::Female);
    CHECK(d1[Slot::Mu] == vec({1, 1, 42, 42}));
    for (Slot s : {Slot::Sigma, Slot::Epsilon, Slot::Delta}) CHECK(d1[s] == vec({1, 1, 42}));
    const DesignRow d2 = build_design(spec_of(ModelTag::Distributional2), 20, Sex::Male);
    for (Slot s : kSlots) CHECK(d2[s] == vec({1, 0, 20, 0}));
}

TEST_CASE("spline rows")
{
    const ModelSpec s3 = spec_of(ModelTag::Distributional3);
    const DesignRow male = build_design(s3, 37, Sex::Male);
    const Eigen::Index k = s3.spline().size();
    CHECK(k == 6);
    CHECK(male[Slot::Mu].size() == 2 + 2 * k);
    CHECK(male[Slot::Mu](0) == 1.0);
    CHECK(male[Slot::Mu](1) == 0.0);
    CHECK(male[Slot::Mu].tail(k).isZero());
    CHECK(male[Slot::Sigma] == vec({1, 0, 37, 0}));

    const DesignRow d4f = build_design(spec_of(ModelTag::Distributional4), 37, Sex::Female);
    for (Slot s : kSlots) {
        CHECK(d4f[s].size() == 2 + 2 * k);
        CHECK(d4f[s].segment(2, k) == d4f[s].tail(k));
    }
    const DesignRow d4m = build_design(spec_of(ModelTag::Distributional4), 37, Sex::Male);
    for (Slot s : kSlots) CHECK(d4m[s].tail(k).isZero());
}

TEST_CASE("row lengths are constant")
{
    for (ModelTag tag : kRegressionModels) {
        const Design d(spec_of(tag), 35.0);
        for (Slot s : kSlots) {
            for (double a : {15.0, 22.5, 64.0, 70.0}) {
                for (Sex sex : {Sex::Male, Sex::Female}) CHECK(d.row(s, a, sex).size() == d.row_length(s));
                CHECK(d.row(s, a, Sex::Male)(0) == 1.0);
            }
        }
    }
}

TEST_CASE("age centring shifts the linear columns only")
{
    const Design d(spec_of(ModelTag::Distributional2), 35.0);
    CHECK(d.row(Slot::Mu, 30, Sex::Female) == vec({1, 1, -5, -5}));
    const Design d3(spec_of(ModelTag::Distributional3), 35.0);
    const Design raw(spec_of(ModelTag::Distributional3), 0.0);
    CHECK(d3.row(Slot::Mu, 30, Sex::Female) == raw.row(Slot::Mu, 30, Sex::Female));
}

TEST_CASE("natural spline boundary behaviour")
{
    const NaturalSpline sp({20, 28, 35, 43, 52}, 15, 64);
    for (double b : {15.0, 64.0}) {
        CHECK(sp.derivative(b, 2).cwiseAbs().maxCoeff() < 1e-9);
    }
    const Eigen::VectorXd at_b = sp.basis(64), slope = sp.derivative(64, 1);
    for (double a : {65.0, 70.0, 80.0}) {
        CHECK((sp.basis(a) - (at_b + slope * (a - 64))).cwiseAbs().maxCoeff() < 1e-9);
    }
    const Eigen::VectorXd at_l = sp.basis(15), slope_l = sp.derivative(15, 1);
    CHECK((sp.basis(10) - (at_l + slope_l * (10 - 15))).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("natural spline is C2 at interior knots")
{
    const NaturalSpline sp({20, 28, 35, 43, 52}, 15, 64);
    for (double k : {20.0, 28.0, 35.0, 43.0, 52.0}) {
        const double h = 1e-7;
        CHECK((sp.basis(k - h) - sp.basis(k + h)).cwiseAbs().maxCoeff() < 1e-6);
        CHECK((sp.derivative(k - h, 2) - sp.derivative(k + h, 2)).cwiseAbs().maxCoeff() < 1e-4);
    }
}

TEST_CASE("natural spline least-squares approximation")
{
    const std::vector<double> knots{23.1666666666666667, 31.3333333333333333, 39.5, 47.6666666666666667,
                                    55.8333333333333333};
    const int n = 200;
    Eigen::MatrixXd x(n, 7);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) {
        const double a = 15.0 + 49.0 * i / (n - 1);
        x(i, 0) = 1.0;
        x.row(i).tail(6) = spline_basis(a, knots, {15.0, 64.0}).transpose();
        y(i) = std::sin(a / 10.0);
    }
    const Eigen::VectorXd beta = x.colPivHouseholderQr().solve(y);
    const double max_err = (x * beta - y).cwiseAbs().maxCoeff();
    CHECK(max_err < 0.05);
    // Same function space as a natural interpolating-spline construction.
    CHECK(max_err == Approx(0.032814).epsilon(1e-4));
}

TEST_CASE("invalid knots")
{
    CHECK_THROWS(NaturalSpline({30, 25}, 15, 64));
    CHECK_THROWS(NaturalSpline({15, 30}, 15, 64));
    CHECK_THROWS(NaturalSpline({30}, 64, 15));
}

TEST_CASE("knots from ages")
{
    std::vector<double> ages;
    for (int a = 15; a <= 64; ++a) ages.push_back(a);
    const ModelSpec s = with_knots_from_ages(spec_of(ModelTag::Distributional4), ages);
    REQUIRE(s.knots.size() == 5);
    for (std::size_t j = 1; j < s.knots.size(); ++j) CHECK(s.knots[j] > s.knots[j - 1]);
    CHECK(s.knots.front() > 15.0);
    CHECK(s.knots.back() < 64.0);
    const std::vector<double> same(100, 30.0);
    const ModelSpec even = with_knots_from_ages(spec_of(ModelTag::Distributional4), same);
    CHECK(even.resolved_knots() == spec_of(ModelTag::Distributional4).resolved_knots());
}

TEST_CASE("model spec json round trip")
{
    ModelSpec s = spec_of(ModelTag::Distributional3);
    s.knots = {22, 30, 41};
    s.interior_knots = 3;
    const nlohmann::json j = s;
    const ModelSpec back = j.get<ModelSpec>();
    CHECK(back.tag == s.tag);
    CHECK(back.knots == s.knots);
    CHECK(back.interior_knots == 3);
    CHECK(back.boundary_low == 15.0);
    for (ModelTag t : kRegressionModels) CHECK(model_from_string(to_string(t)) == t);
}
