#include "agemix/inference.hpp"

#include "agemix/special.hpp"

#include <Eigen/Cholesky>
#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace agemix {

namespace {

constexpr double kMaxExpArg = 700.0;
constexpr double kInf = std::numeric_limits<double>::infinity();

double clamp_log(double v, int* clamps)
{
    if (v > kMaxExpArg || v < -kMaxExpArg) {
        if (clamps) ++*clamps;
        return std::clamp(v, -kMaxExpArg, kMaxExpArg);
    }
    return v;
}

std::vector<double> respondent_ages(std::span<const PartnershipRecord> records)
{
    std::vector<double> ages;
    ages.reserve(records.size());
    for (const auto& r : records) ages.push_back(r.respondent_age);
    return ages;
}

}  // namespace

int active_slots(Family family)
{
    switch (family) {
    case Family::Normal: return 2;
    case Family::SkewNormal: return 3;
    case Family::Gamma: return 2;
    case Family::Beta: return 2;
    case Family::SinhArcsinh: return 4;
    }
    return 0;
}

ParamVector linpred_to_params(Family family, const LinearPredictors& eta, int* clamp_count)
{
    ParamVector p;
    switch (family) {
    case Family::Normal:
    case Family::SkewNormal:
        p.mu = eta[0];
        p.sigma = std::exp(clamp_log(eta[1], clamp_count));
        if (family == Family::SkewNormal) p.epsilon = eta[2];
        break;
    case Family::SinhArcsinh: {
        const double log_delta = clamp_log(eta[3], clamp_count);
        p.mu = eta[0];
        p.epsilon = eta[2];
        p.delta = std::exp(log_delta);
        p.sigma = std::exp(clamp_log(clamp_log(eta[1], clamp_count) + log_delta, clamp_count));
        break;
    }
    case Family::Gamma:
        p.k = std::exp(clamp_log(eta[0], clamp_count));
        p.theta = std::exp(clamp_log(eta[1], clamp_count));
        break;
    case Family::Beta:
        p.alpha = std::exp(clamp_log(eta[0], clamp_count));
        p.beta = std::exp(clamp_log(eta[1], clamp_count));
        break;
    }
    return p;
}

Distribution linpred_to_distribution(Family family, const LinearPredictors& eta, int* clamp_count)
{
    return Distribution{family, linpred_to_params(family, eta, clamp_count)};
}

double log_density_with_score(Family family, const LinearPredictors& eta, double y, LinearPredictors* score,
                              int* clamps)
{
    switch (family) {
    case Family::Normal: {
        const double log_sigma = clamp_log(eta[1], clamps);
        const double sigma = std::exp(log_sigma);
        const double z = (y - eta[0]) / sigma;
        if (score) *score = {z / sigma, z * z - 1.0, 0.0, 0.0};
        return special::std_normal_log_pdf(z) - log_sigma;
    }
    case Family::SkewNormal: {
        const double log_sigma = clamp_log(eta[1], clamps);
        const double sigma = std::exp(log_sigma);
        const double shape = eta[2];
        const double z = (y - eta[0]) / sigma;
        const double t = shape * z;
        if (score) {
            const double m = special::inverse_mills_ratio(t);
            const double gz = -z + shape * m;
            *score = {-gz / sigma, -1.0 - z * gz, z * m, 0.0};
        }
        return special::kLog2 - log_sigma + special::std_normal_log_pdf(z) + special::std_normal_log_cdf(t);
    }
    case Family::SinhArcsinh: {
        const double log_delta = clamp_log(eta[3], clamps);
        const double log_sigma = clamp_log(clamp_log(eta[1], clamps) + log_delta, clamps);
        const double delta = std::exp(log_delta);
        const double sigma = std::exp(log_sigma);
        const double z = (y - eta[0]) / sigma;
        const double as = std::asinh(z);
        const double w = std::clamp(eta[2] + delta * as, -kMaxExpArg, kMaxExpArg);
        const double s = std::sinh(w);
        const double hyp = std::hypot(1.0, z);
        if (score) {
            const double t = std::tanh(w) - s * std::cosh(w);
            const double gz = t * delta / hyp - z / (hyp * hyp);
            const double d_log_sigma = -1.0 - z * gz;
            const double d_log_delta = 1.0 + delta * as * t;
            *score = {-gz / sigma, d_log_sigma, t, d_log_delta + d_log_sigma};
        }
        return -log_sigma - special::kLogSqrt2Pi + log_delta + special::log_cosh(w) - std::log(hyp) - 0.5 * s * s;
    }
    case Family::Gamma: {
        const double log_k = clamp_log(eta[0], clamps);
        const double log_theta = clamp_log(eta[1], clamps);
        const double k = std::exp(log_k);
        const double theta = std::exp(log_theta);
        const double log_y = std::log(y);
        if (score) *score = {k * (log_y - boost::math::digamma(k) - log_theta), y / theta - k, 0.0, 0.0};
        return (k - 1.0) * log_y - y / theta - boost::math::lgamma(k) - k * log_theta;
    }
    case Family::Beta: {
        const double a = std::exp(clamp_log(eta[0], clamps));
        const double b = std::exp(clamp_log(eta[1], clamps));
        const double log_y = std::log(y);
        const double log_1my = std::log1p(-y);
        if (score) {
            const double dab = boost::math::digamma(a + b);
            *score = {a * (log_y - boost::math::digamma(a) + dab), b * (log_1my - boost::math::digamma(b) + dab),
                      0.0, 0.0};
        }
        const double log_beta_fn = boost::math::lgamma(a) + boost::math::lgamma(b) - boost::math::lgamma(a + b);
        return (a - 1.0) * log_y + (b - 1.0) * log_1my - log_beta_fn;
    }
    }
    return -kInf;
}

// --- Posterior -------------------------------------------------------------

Posterior::Posterior(FitProblem problem)
    : problem_(std::move(problem)),
      design_((problem_.spec.uses_splines() && problem_.spec.knots.empty())
                  ? with_knots_from_ages(problem_.spec, respondent_ages(problem_.records))
                  : problem_.spec,
              problem_.age_center)
{
    problem_.spec = design_.spec();
    if (!is_applicable(problem_.family, problem_.transform.kind)) {
        throw std::invalid_argument(std::string("transform ") + std::string(to_string(problem_.transform.kind)) +
                                    " is not applicable to the " + std::string(to_string(problem_.family)) +
                                    " family");
    }
    if (!(problem_.prior_sd > 0.0)) throw std::invalid_argument("prior_sd must be positive");

    const auto n = static_cast<Eigen::Index>(problem_.records.size());
    y_.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& r = problem_.records[static_cast<std::size_t>(i)];
        y_(i) = forward(problem_.transform, r);
        if (!in_support(problem_.family, y_(i))) {
            throw TransformError("outcome outside the " + std::string(to_string(problem_.family)) +
                                 " support for record " + describe(r));
        }
    }
    const int slots = active_slots(problem_.family);
    for (int s = 0; s < slots; ++s) {
        x_[s] = design_.matrix(static_cast<Slot>(s), problem_.records);
        block_sizes_[s] = x_[s].cols();
        offsets_[s] = dimension_;
        dimension_ += block_sizes_[s];
    }
}

std::array<Eigen::VectorXd, 4> Posterior::linear_predictors(const Eigen::VectorXd& beta) const
{
    if (beta.size() != dimension_) {
        throw std::invalid_argument("coefficient vector has length " + std::to_string(beta.size()) + ", expected " +
                                    std::to_string(dimension_));
    }
    std::array<Eigen::VectorXd, 4> eta;
    for (int s = 0; s < kSlotCount; ++s) {
        eta[s] = block_sizes_[s] > 0 ? Eigen::VectorXd(x_[s] * beta.segment(offsets_[s], block_sizes_[s]))
                                     : Eigen::VectorXd::Zero(y_.size());
    }
    return eta;
}

double Posterior::prior_term(const Eigen::VectorXd& beta, Eigen::VectorXd* grad) const
{
    if (!std::isfinite(problem_.prior_sd)) {
        if (grad) grad->setZero();
        return 0.0;
    }
    const double var = problem_.prior_sd * problem_.prior_sd;
    if (grad) *grad = beta / var;
    return beta.squaredNorm() / (2.0 * var) +
           static_cast<double>(beta.size()) * 0.5 * std::log(2.0 * M_PI * var);
}

Eigen::VectorXd Posterior::log_likelihood(const Eigen::VectorXd& beta) const
{
    const auto eta = linear_predictors(beta);
    Eigen::VectorXd ll(y_.size());
    for (Eigen::Index i = 0; i < y_.size(); ++i) {
        const LinearPredictors e{eta[0](i), eta[1](i), eta[2](i), eta[3](i)};
        ll(i) = log_density_with_score(problem_.family, e, y_(i), nullptr, &clamps_);
    }
    return ll;
}

double Posterior::value(const Eigen::VectorXd& beta) const
{
    const double total = log_likelihood(beta).sum();
    const double v = -total + prior_term(beta, nullptr);
    return std::isfinite(v) ? v : kInf;
}

double Posterior::value_and_gradient(const Eigen::VectorXd& beta, Eigen::VectorXd& grad) const
{
    const auto eta = linear_predictors(beta);
    const Eigen::Index n = y_.size();
    const int slots = active_slots(problem_.family);
    Eigen::MatrixXd scores(n, slots);
    double total = 0.0;
    LinearPredictors sc{};
    for (Eigen::Index i = 0; i < n; ++i) {
        const LinearPredictors e{eta[0](i), eta[1](i), eta[2](i), eta[3](i)};
        total += log_density_with_score(problem_.family, e, y_(i), &sc, &clamps_);
        for (int s = 0; s < slots; ++s) scores(i, s) = sc[s];
    }
    const double v = -total + prior_term(beta, &grad);
    for (int s = 0; s < slots; ++s) {
        grad.segment(offsets_[s], block_sizes_[s]).noalias() -= x_[s].transpose() * scores.col(s);
    }
    if (!std::isfinite(v) || !grad.allFinite()) return kInf;
    return v;
}

optim::Objective Posterior::objective() const
{
    return [this](const Eigen::VectorXd& beta, Eigen::VectorXd* grad) {
        if (grad) {
            grad->resize(beta.size());
            return value_and_gradient(beta, *grad);
        }
        return value(beta);
    };
}

Eigen::VectorXd Posterior::initial_point() const
{
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(dimension_);
    if (y_.size() == 0) return beta;
    const double mean = y_.mean();
    double sd = std::sqrt((y_.array() - mean).square().mean());
    if (!(sd > 0.0)) sd = 1.0;
    double first = mean;
    double second = std::log(sd);
    switch (problem_.family) {
    case Family::Gamma:
        first = std::log(mean * mean / (sd * sd));
        second = std::log(sd * sd / mean);
        break;
    case Family::Beta: {
        double common = mean * (1.0 - mean) / (sd * sd) - 1.0;
        if (!(common > 0.0)) common = 1.0;
        first = std::log(mean * common);
        second = std::log((1.0 - mean) * common);
        break;
    }
    default:
        break;
    }
    beta(offsets_[0]) = first;
    beta(offsets_[1]) = second;
    return beta;
}

double neg_log_posterior(const FitProblem& problem, const Eigen::VectorXd& beta)
{
    return Posterior(problem).value(beta);
}

Eigen::VectorXd neg_log_posterior_gradient(const FitProblem& problem, const Eigen::VectorXd& beta)
{
    Eigen::VectorXd g(beta.size());
    Posterior(problem).value_and_gradient(beta, g);
    return g;
}

// --- FitResult ---------------------------------------------------------------

Eigen::VectorXd FitResult::block(const Eigen::VectorXd& beta, Slot slot) const
{
    Eigen::Index offset = 0;
    for (int s = 0; s < static_cast<int>(slot); ++s) offset += block_sizes[s];
    return beta.segment(offset, block_sizes[static_cast<int>(slot)]);
}

LinearPredictors FitResult::linear_predictors(const Eigen::VectorXd& beta, const DesignRow& row) const
{
    LinearPredictors eta{0.0, 0.0, 0.0, 0.0};
    Eigen::Index offset = 0;
    for (int s = 0; s < kSlotCount; ++s) {
        if (block_sizes[s] == 0) continue;
        eta[s] = row.x[s].dot(beta.segment(offset, block_sizes[s]));
        offset += block_sizes[s];
    }
    return eta;
}

Distribution FitResult::distribution(const Eigen::VectorXd& beta, double age, Sex sex) const
{
    return linpred_to_distribution(family, linear_predictors(beta, design().row(age, sex)));
}

Eigen::VectorXd FitResult::uncentered_coefficients() const
{
    Eigen::VectorXd out = coefficients;
    Eigen::Index offset = 0;
    for (int s = 0; s < kSlotCount; ++s) {
        if (block_sizes[s] == 0) continue;
        const RowKind kind = row_kind(spec.tag, static_cast<Slot>(s));
        auto b = out.segment(offset, block_sizes[s]);
        if (kind == RowKind::AgeSex || kind == RowKind::Interaction) b(0) -= age_center * b(2);
        if (kind == RowKind::Interaction) b(1) -= age_center * b(3);
        offset += block_sizes[s];
    }
    return out;
}

FitResult fit_map(const FitProblem& problem, std::optional<Eigen::VectorXd> init, const FitOptions& opts)
{
    if (problem.records.empty()) throw std::invalid_argument("fit_map: problem has no records");
    const Posterior post(problem);
    const auto objective = post.objective();
    const Eigen::VectorXd x0 = init.value_or(post.initial_point());
    if (x0.size() != post.dimension()) throw std::invalid_argument("fit_map: initial point has the wrong length");

    const optim::Options oo{opts.max_iter, opts.grad_tol};
    optim::Result best = optim::minimize(objective, x0, oo);
    int iterations = best.iterations;
    if (!best.converged) {
        Rng rng(opts.restart_seed);
        std::normal_distribution<double> jitter(0.0, 0.1);
        for (int r = 0; r < opts.restarts; ++r) {
            Eigen::VectorXd start = x0;
            for (auto& v : start) v += jitter(rng);
            optim::Result run = optim::minimize(objective, start, oo);
            iterations += run.iterations;
            const bool better = (run.converged && !best.converged) ||
                                (run.converged == best.converged && run.value < best.value);
            if (better) best = std::move(run);
            if (best.converged) break;
        }
    }

    FitResult fit;
    fit.family = problem.family;
    fit.transform = problem.transform;
    fit.spec = post.problem().spec;
    fit.age_center = problem.age_center;
    fit.prior_sd = problem.prior_sd;
    fit.block_sizes = post.block_sizes();
    fit.n_records = problem.records.size();
    fit.coefficients = best.x;
    fit.nlp = best.value;
    fit.converged = best.converged;
    fit.iterations = iterations;
    fit.gradient_norm = best.gradient_norm;
    fit.curvature = optim::finite_difference_hessian(objective, best.x);
    fit.curvature_pd = std::isfinite(best.value) && fit.curvature.allFinite() &&
                       Eigen::LLT<Eigen::MatrixXd>(fit.curvature).info() == Eigen::Success;
    fit.clamp_warnings = post.clamp_count();
    return fit;
}

// --- Laplace draws & predictive ---------------------------------------------

PosteriorDraws laplace_draws(const Eigen::VectorXd& mode, const Eigen::MatrixXd& curvature, int n_draws,
                             std::uint64_t seed)
{
    if (n_draws < 1) throw std::invalid_argument("laplace_draws: n_draws must be >= 1");
    const Eigen::LLT<Eigen::MatrixXd> llt(curvature);
    if (llt.info() != Eigen::Success || !curvature.allFinite()) {
        throw CurvatureError("laplace_draws: curvature is not positive definite");
    }
    // curvature = L L^T, so L^{-T} z has covariance curvature^{-1}.
    const auto upper = llt.matrixU();
    Rng rng(seed);
    std::normal_distribution<double> std_normal;
    PosteriorDraws out{Eigen::MatrixXd(n_draws, mode.size()), seed};
    Eigen::VectorXd z(mode.size());
    for (int d = 0; d < n_draws; ++d) {
        for (auto& v : z) v = std_normal(rng);
        out.draws.row(d) = (mode + upper.solve(z)).transpose();
    }
    return out;
}

PosteriorDraws laplace_draws(const FitResult& fit, int n_draws, std::uint64_t seed)
{
    return laplace_draws(fit.coefficients, fit.curvature, n_draws, seed);
}

Eigen::VectorXd posterior_predictive(const FitResult& fit, const PosteriorDraws& draws, double respondent_age,
                                     Sex sex, int n_per_draw, std::uint64_t seed)
{
    const Design design = fit.design();
    const DesignRow row = design.row(respondent_age, sex);
    Rng rng(seed);
    const Eigen::Index n_draws = draws.draws.rows();
    Eigen::VectorXd out(n_draws * n_per_draw);
    Eigen::Index k = 0;
    for (Eigen::Index d = 0; d < n_draws; ++d) {
        const Eigen::VectorXd beta = draws.draws.row(d).transpose();
        const Distribution dist = linpred_to_distribution(fit.family, fit.linear_predictors(beta, row));
        for (int j = 0; j < n_per_draw; ++j) {
            out(k++) = inverse(fit.transform, respondent_age, sex, agemix::draw(dist, rng));
        }
    }
    return out;
}

Eigen::VectorXd posterior_predictive(const FitResult& fit, const PosteriorDraws& draws,
                                     std::span<const PartnershipRecord> respondents, std::size_t n_samples,
                                     std::uint64_t seed)
{
    if (respondents.empty()) throw std::invalid_argument("posterior_predictive: no respondents");
    const Design design = fit.design();
    std::vector<DesignRow> rows;
    rows.reserve(respondents.size());
    for (const auto& r : respondents) rows.push_back(design.row(r.respondent_age, r.respondent_sex));

    Rng rng(seed);
    const auto n_draws = static_cast<std::size_t>(draws.draws.rows());
    Eigen::VectorXd out(static_cast<Eigen::Index>(n_samples));
    for (std::size_t j = 0; j < n_samples; ++j) {
        const std::size_t i = j % respondents.size();
        const Eigen::VectorXd beta = draws.draws.row(static_cast<Eigen::Index>(j % n_draws)).transpose();
        const Distribution dist = linpred_to_distribution(fit.family, fit.linear_predictors(beta, rows[i]));
        out(static_cast<Eigen::Index>(j)) = inverse(fit.transform, respondents[i].respondent_age,
                                                    respondents[i].respondent_sex, agemix::draw(dist, rng));
    }
    return out;
}

void to_json(nlohmann::json& j, const FitResult& fit)
{
    auto blocks = [&](const Eigen::VectorXd& beta) {
        nlohmann::json b = nlohmann::json::object();
        for (Slot s : kSlots) {
            if (fit.block_sizes[static_cast<int>(s)] == 0) continue;
            const Eigen::VectorXd v = fit.block(beta, s);
            b[std::string(to_string(s))] = std::vector<double>(v.data(), v.data() + v.size());
        }
        return b;
    };
    j = nlohmann::json{
        {"family", to_string(fit.family)},
        {"transform", to_string(fit.transform.kind)},
        {"spec", fit.spec},
        {"age_center", fit.age_center},
        {"prior_sd", std::isfinite(fit.prior_sd) ? nlohmann::json(fit.prior_sd) : nlohmann::json("inf")},
        {"n_records", fit.n_records},
        {"coefficients", blocks(fit.uncentered_coefficients())},
        {"coefficients_centered", blocks(fit.coefficients)},
        {"nlp", fit.nlp},
        {"convergence",
         {{"converged", fit.converged},
          {"curvature_positive_definite", fit.curvature_pd},
          {"iterations", fit.iterations},
          {"gradient_norm", fit.gradient_norm},
          {"clamp_warnings", fit.clamp_warnings}}}};
}

}  // namespace agemix
