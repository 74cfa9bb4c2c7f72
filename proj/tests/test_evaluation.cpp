#include "agemix/evaluation.hpp"
#include "support.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

#include <cmath>
#include <numeric>

using namespace agemix;
using doctest::Approx;

namespace {

FitProblem problem_of(Family f, TransformKind t, ModelTag tag, std::vector<PartnershipRecord> records)
{
    FitProblem p;
    p.family = f;
    p.transform = Transform::of(t);
    p.spec.tag = tag;
    p.records = std::move(records);
    return p;
}

Eigen::VectorXd v(std::initializer_list<double> xs)
{
    Eigen::VectorXd out(static_cast<Eigen::Index>(xs.size()));
    Eigen::Index i = 0;
    for (double x : xs) out(i++) = x;
    return out;
}

std::vector<double> seq(double from, double to)
{
    std::vector<double> out;
    for (double x = from; x <= to; x += 1.0) out.push_back(x);
    return out;
}

}  // namespace

TEST_CASE("pointwise log-likelihood shapes and jacobians")
{
    const auto records = simulate(testing::default_truth(300, 3));
    const std::vector<PartnershipRecord> four(records.begin(), records.begin() + 4);
    const FitResult lin = fit_map(problem_of(Family::Normal, TransformKind::LinearAge, ModelTag::Conventional, records));
    REQUIRE(lin.converged);
    const PosteriorDraws d = laplace_draws(lin, 3, 1);
    const LogLikMatrix ll = pointwise_loglik(lin, d, four);
    CHECK(ll.values.rows() == 3);
    CHECK(ll.values.cols() == 4);
    for (Eigen::Index r = 0; r < 3; ++r) {
        for (Eigen::Index i = 0; i < 4; ++i) {
            const auto& rec = four[static_cast<std::size_t>(i)];
            const Distribution dist =
                lin.distribution(d.draws.row(r).transpose(), rec.respondent_age, rec.respondent_sex);
            CHECK(ll.values(r, i) == log_pdf(dist, rec.partner_age));
        }
    }
}

TEST_CASE("normal on log age equals a lognormal on partner age")
{
    const auto records = simulate(testing::default_truth(300, 4));
    const FitResult fit = fit_map(problem_of(Family::Normal, TransformKind::LogAge, ModelTag::Distributional1, records));
    REQUIRE(fit.converged);
    const PosteriorDraws d = laplace_draws(fit, 50, 2);
    const LogLikMatrix ll = pointwise_loglik(fit, d, records);
    double worst = 0.0;
    for (Eigen::Index r = 0; r < ll.values.rows(); ++r) {
        for (Eigen::Index i = 0; i < ll.values.cols(); ++i) {
            const auto& rec = records[static_cast<std::size_t>(i)];
            const auto p = fit.distribution(d.draws.row(r).transpose(), rec.respondent_age, rec.respondent_sex).params;
            const double z = (std::log(rec.partner_age) - p.mu) / p.sigma;
            const double lognormal = -std::log(rec.partner_age) - std::log(p.sigma) - 0.9189385332046727 - 0.5 * z * z;
            worst = std::max(worst, std::abs(ll.values(r, i) - lognormal));
        }
    }
    CHECK(worst < 1e-12);
}

TEST_CASE("non-finite log-likelihood names the record and draw")
{
    const std::vector<PartnershipRecord> records{{30, Sex::Male, 35}, {40, Sex::Female, 45}};
    const FitResult fit = fit_map(problem_of(Family::Normal, TransformKind::LinearAge, ModelTag::Constant, records));
    PosteriorDraws d;
    d.draws = Eigen::MatrixXd(1, 2);
    d.draws << 0.0, -700.0;
    try {
        pointwise_loglik(fit, d, records);
        FAIL("expected an error");
    } catch (const std::exception& e) {
        const std::string what = e.what();
        CHECK(what.find("record") != std::string::npos);
        CHECK(what.find("draw") != std::string::npos);
    }
}

TEST_CASE("constant densities give zero standard error")
{
    LogLikMatrix ll;
    ll.values = Eigen::MatrixXd::Constant(200, 25, std::log(0.3));
    const ElpdEstimate e = elpd_psis(ll);
    CHECK(e.elpd == Approx(25 * std::log(0.3)).epsilon(1e-12));
    CHECK(e.se == Approx(0.0).epsilon(1e-12));
    CHECK(e.pareto_k.cwiseAbs().maxCoeff() == 0.0);
    CHECK(e.reliable());
}

TEST_CASE("psis never exceeds the in-sample log predictive density")
{
    const auto records = simulate(testing::default_truth(400, 5));
    for (ModelTag tag : {ModelTag::Conventional, ModelTag::Distributional2}) {
        const FitResult fit = fit_map(problem_of(Family::SinhArcsinh, TransformKind::LogRatio, tag, records));
        REQUIRE(fit.converged);
        const PosteriorDraws d = laplace_draws(fit, 1000, 6);
        const LogLikMatrix ll = pointwise_loglik(fit, d, records);
        const ElpdEstimate e = elpd_psis(ll);
        CHECK(e.elpd <= in_sample_lpd(ll).sum());
        if (tag == ModelTag::Conventional) CHECK(e.pareto_k.maxCoeff() < kParetoKThreshold);

        const ElpdEstimate streamed = elpd_psis(fit, d, records, 64);
        CHECK((streamed.pointwise - e.pointwise).cwiseAbs().maxCoeff() < 1e-12);
        CHECK(streamed.elpd == Approx(e.elpd).epsilon(1e-12));
    }
}

TEST_CASE("generalised Pareto shape estimate")
{
    Rng rng(9);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double k = 0.3, sigma = 2.0;
    std::vector<double> x(4000);
    for (double& xi : x) xi = sigma * (std::pow(1.0 - u(rng), -k) - 1.0) / k;
    std::sort(x.begin(), x.end());
    const GpdFit fit = gpd_fit(x);
    CHECK(std::abs(fit.k - k) < 0.08);
    CHECK(std::abs(fit.sigma - sigma) < 0.3);
}

TEST_CASE("psis weights are normalised and truncated")
{
    Rng rng(10);
    std::student_t_distribution<double> t(2.0);
    Eigen::VectorXd lr(1000);
    for (Eigen::Index i = 0; i < lr.size(); ++i) lr(i) = t(rng);
    const PsisWeights w = psis_smooth(lr);
    CHECK(w.log_weights.array().exp().sum() == Approx(1.0).epsilon(1e-12));
    CHECK(std::isfinite(w.pareto_k));
    // Smoothing keeps the ordering of the raw ratios and never exceeds the largest raw weight.
    std::vector<Eigen::Index> order(1000);
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return lr(a) < lr(b); });
    for (std::size_t j = 1; j < order.size(); ++j) CHECK(w.log_weights(order[j]) >= w.log_weights(order[j - 1]) - 1e-12);
    const Eigen::VectorXd raw = lr.array() - lr.maxCoeff();
    CHECK(w.log_weights.maxCoeff() <= raw.maxCoeff() - std::log(raw.array().exp().sum()) + std::log(1000.0));
}

TEST_CASE("elpd_diff")
{
    const auto d = elpd_diff(v({1, 2, 3}), v({0, 0, 0}));
    CHECK(d.diff == Approx(6.0));
    CHECK(d.se == Approx(1.7320508076));
    const auto same = elpd_diff(v({1, 5, -2}), v({1, 5, -2}));
    CHECK(same.diff == 0.0);
    CHECK(same.se == 0.0);
    const auto shift = elpd_diff(v({1.5, 2.5, 3.5, 4.5}), v({1, 2, 3, 4}));
    CHECK(shift.diff == Approx(2.0));
    CHECK(shift.se == Approx(0.0).epsilon(1e-12));
    const Eigen::VectorXd a = v({0.3, -1.2, 4.0, 2.2}), b = v({1.0, 0.1, -3.0, 2.0});
    CHECK(elpd_diff(a, b).diff == -elpd_diff(b, a).diff);
    CHECK(elpd_diff(a, b).se == elpd_diff(b, a).se);
    CHECK_THROWS(elpd_diff(v({1, 2}), v({1, 2, 3})));
}

TEST_CASE("type 7 quantiles")
{
    const std::vector<double> x{1, 2, 3, 4};
    CHECK(empirical_quantile(x, 0.0) == 1.0);
    CHECK(empirical_quantile(x, 1.0) == 4.0);
    CHECK(empirical_quantile(x, 0.5) == Approx(2.5));
    CHECK(empirical_quantile(x, 0.1) == Approx(1.3));
}

TEST_CASE("qq rmse")
{
    const std::vector<double> obs{3.2, 1.0, 7.5, 4.4, 9.1, 2.2, 6.0, 5.5};
    std::vector<double> shifted = obs;
    for (double& x : shifted) x += 0.5;
    const std::vector<QQGroup> self{{"a", obs, obs}};
    CHECK(qq_rmse(self) == Approx(0.0).epsilon(1e-9));
    const std::vector<QQGroup> moved{{"a", obs, shifted}};
    CHECK(std::abs(qq_rmse(moved) - 0.5) < 1e-9);

    const std::vector<double> b{3, 7, 8, 20, 21, 22};
    const std::vector<QQGroup> hand{{"a", seq(1, 10), seq(2, 11)}, {"b", b, b}};
    CHECK(qq_rmse(hand) == Approx(0.707106781187).epsilon(1e-11));

    const std::vector<QQGroup> empty{{"male 20-24", {}, obs}};
    try {
        qq_rmse(empty);
        FAIL("expected an error");
    } catch (const std::exception& e) {
        CHECK(std::string(e.what()).find("male 20-24") != std::string::npos);
    }
}

TEST_CASE("k-fold agrees with psis on a small problem")
{
    auto records = simulate(testing::default_truth(120, 12));
    const FitProblem p = problem_of(Family::Normal, TransformKind::AgeDifference, ModelTag::Constant, records);
    KFoldOptions opts;
    opts.folds = 10;
    opts.n_draws = 500;
    const ElpdEstimate kf = elpd_kfold(p, opts);
    CHECK(kf.method == ElpdMethod::KFold);
    CHECK(kf.pointwise.size() == 120);
    const FitResult fit = fit_map(p);
    const ElpdEstimate ps = elpd_psis(fit, laplace_draws(fit, 2000, 3), records);
    CHECK(std::abs(kf.elpd - ps.elpd) < 2.0);
}

TEST_CASE("ranking and report layout")
{
    std::vector<ModelScore> scores(3);
    scores[0] = {"low", summarise_pointwise(v({-3, -3, -3}), ElpdMethod::Psis), 1.0};
    scores[1] = {"high", summarise_pointwise(v({-1, -1, -2}), ElpdMethod::Psis), 0.5};
    scores[2] = {"mid", summarise_pointwise(v({-2, -2, -2}), ElpdMethod::Psis), 0.7};
    const ComparisonReport r = rank_models(scores);
    REQUIRE(r.rows.size() == 3);
    CHECK(r.rows[0].model == "high");
    CHECK(r.rows[0].elpd_diff == 0.0);
    CHECK(r.rows[0].se_of_diff == 0.0);
    CHECK(r.rows[1].model == "mid");
    CHECK(r.rows[1].elpd_diff == Approx(-2.0));
    CHECK(r.rows[2].rank == 3);
    const std::string csv = to_csv(r);
    CHECK(csv.rfind("rank,model,elpd,elpd_diff,se_of_diff,qq_rmse,elpd_se\n", 0) == 0);
    const nlohmann::json j = r;
    CHECK(j.size() == 3);
    CHECK(elpd_method_from_string("kfold") == ElpdMethod::KFold);
}
