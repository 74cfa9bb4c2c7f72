#pragma once

#include "agemix/design.hpp"
#include "agemix/distributions.hpp"
#include "agemix/optim.hpp"
#include "agemix/record.hpp"
#include "agemix/transforms.hpp"

#include <Eigen/Core>
#include <nlohmann/json_fwd.hpp>

#include <array>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

namespace agemix {

/// Link-scale linear predictors, one per slot (unused slots ignored).
using LinearPredictors = std::array<double, 4>;

/// Number of slots a family reads: normal 2, skew normal 3, gamma 2, beta 2, sinh-arcsinh 4.
int active_slots(Family family);

/// Map linear predictors to family parameters.
///
/// Normal / skew normal / sinh-arcsinh: mu = eta0, sigma* = exp(eta1),
/// epsilon = eta2, delta = exp(eta3); sinh-arcsinh uses sigma = sigma* delta.
/// Gamma: k = exp(eta0), theta = exp(eta1). Beta: alpha = exp(eta0),
/// beta = exp(eta1). Exponent arguments are clamped to +-700; each clamp
/// increments `clamp_count` when given.
ParamVector linpred_to_params(Family family, const LinearPredictors& eta, int* clamp_count = nullptr);
Distribution linpred_to_distribution(Family family, const LinearPredictors& eta, int* clamp_count = nullptr);

/// log f(y | eta) and, optionally, d log f / d eta for every active slot.
double log_density_with_score(Family family, const LinearPredictors& eta, double y, LinearPredictors* score,
                              int* clamp_count = nullptr);

struct FitProblem {
    Family family = Family::SinhArcsinh;
    Transform transform = Transform::of(TransformKind::LogRatio);
    ModelSpec spec;
    std::vector<PartnershipRecord> records;
    /// Normal prior sd on every coefficient; infinity gives a flat prior.
    double prior_sd = 5.0;
    /// Linear-age columns enter as (age - age_center).
    double age_center = 35.0;
};

/// A FitProblem with its design matrices and outcomes materialised.
class Posterior {
public:
    explicit Posterior(FitProblem problem);

    Eigen::Index dimension() const { return dimension_; }
    const std::array<Eigen::Index, 4>& block_sizes() const { return block_sizes_; }
    const FitProblem& problem() const { return problem_; }
    const Design& design() const { return design_; }
    const Eigen::VectorXd& outcomes() const { return y_; }

    /// Negative log posterior including the prior normalising constant; +inf when non-finite.
    double value(const Eigen::VectorXd& beta) const;
    double value_and_gradient(const Eigen::VectorXd& beta, Eigen::VectorXd& grad) const;
    optim::Objective objective() const;

    /// Per-record log density on the outcome scale.
    Eigen::VectorXd log_likelihood(const Eigen::VectorXd& beta) const;
    Eigen::VectorXd initial_point() const;
    int clamp_count() const { return clamps_; }

private:
    std::array<Eigen::VectorXd, 4> linear_predictors(const Eigen::VectorXd& beta) const;
    double prior_term(const Eigen::VectorXd& beta, Eigen::VectorXd* grad) const;

    FitProblem problem_;
    Design design_;
    Eigen::VectorXd y_;
    std::array<Eigen::MatrixXd, 4> x_;
    std::array<Eigen::Index, 4> block_sizes_{};
    std::array<Eigen::Index, 4> offsets_{};
    Eigen::Index dimension_ = 0;
    mutable int clamps_ = 0;
};

double neg_log_posterior(const FitProblem& problem, const Eigen::VectorXd& beta);
Eigen::VectorXd neg_log_posterior_gradient(const FitProblem& problem, const Eigen::VectorXd& beta);

struct FitOptions {
    int max_iter = 500;
    double grad_tol = 1e-6;
    /// Jittered restarts attempted when the first run does not converge.
    int restarts = 3;
    std::uint64_t restart_seed = 0x5eed;
};

struct FitResult {
    Family family = Family::SinhArcsinh;
    Transform transform;
    ModelSpec spec;  // knots resolved
    double age_center = 35.0;
    double prior_sd = 5.0;
    std::array<Eigen::Index, 4> block_sizes{};
    std::size_t n_records = 0;

    Eigen::VectorXd coefficients;  // mu, sigma, epsilon, delta blocks
    double nlp = std::numeric_limits<double>::infinity();
    Eigen::MatrixXd curvature;
    bool converged = false;
    bool curvature_pd = false;
    int iterations = 0;
    double gradient_norm = std::numeric_limits<double>::infinity();
    int clamp_warnings = 0;

    Eigen::VectorXd block(Slot slot) const { return block(coefficients, slot); }
    Eigen::VectorXd block(const Eigen::VectorXd& beta, Slot slot) const;
    Design design() const { return Design(spec, age_center); }
    LinearPredictors linear_predictors(const Eigen::VectorXd& beta, const DesignRow& row) const;
    Distribution distribution(const Eigen::VectorXd& beta, double age, Sex sex) const;
    /// Coefficients with the age centring translated back to raw ages.
    Eigen::VectorXd uncentered_coefficients() const;
};

FitResult fit_map(const FitProblem& problem, std::optional<Eigen::VectorXd> init = std::nullopt,
                  const FitOptions& opts = {});

/// Gaussian approximation draws; rows are draws, columns follow FitResult::coefficients.
struct PosteriorDraws {
    Eigen::MatrixXd draws;
    std::uint64_t seed = 0;
};

/// Thrown when the curvature is not positive definite.
class CurvatureError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

PosteriorDraws laplace_draws(const Eigen::VectorXd& mode, const Eigen::MatrixXd& curvature, int n_draws,
                             std::uint64_t seed);
PosteriorDraws laplace_draws(const FitResult& fit, int n_draws, std::uint64_t seed);

/// n_per_draw predictive partner ages for every draw, pooled.
Eigen::VectorXd posterior_predictive(const FitResult& fit, const PosteriorDraws& draws, double respondent_age,
                                     Sex sex, int n_per_draw, std::uint64_t seed);

/// n_samples predictive partner ages; sample j uses respondent j mod |respondents| and draw j mod n_draws.
Eigen::VectorXd posterior_predictive(const FitResult& fit, const PosteriorDraws& draws,
                                     std::span<const PartnershipRecord> respondents, std::size_t n_samples,
                                     std::uint64_t seed);

void to_json(nlohmann::json& j, const FitResult& fit);

}  // namespace agemix
