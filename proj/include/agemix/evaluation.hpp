#pragma once

#include "agemix/inference.hpp"

#include <Eigen/Core>
#include <nlohmann/json_fwd.hpp>

#include <array>
#include <span>
#include <string>
#include <vector>

namespace agemix {

/// Draw-by-record log densities on the partner-age scale (Jacobian included).
struct LogLikMatrix {
    Eigen::MatrixXd values;  // n_draws x n_records
    std::vector<std::size_t> record_index;
};

/// Entry (d, i) = log f(y_i | draw d) + log|dy/dp| at record i. Throws on non-finite entries.
LogLikMatrix pointwise_loglik(const FitResult& fit, const PosteriorDraws& draws,
                              std::span<const PartnershipRecord> records);

/// Generalised Pareto fit (Zhang & Stephens with the weakly informative shape prior used by PSIS).
struct GpdFit {
    double k = 0.0;
    double sigma = 0.0;
};
GpdFit gpd_fit(std::span<const double> sorted_exceedances);

/// Pareto-smoothed, truncated and normalised log importance weights for one record.
struct PsisWeights {
    Eigen::VectorXd log_weights;
    double pareto_k = 0.0;
};
PsisWeights psis_smooth(const Eigen::VectorXd& log_ratios);

enum class ElpdMethod { Psis, KFold };
std::string_view to_string(ElpdMethod m);
ElpdMethod elpd_method_from_string(std::string_view name);

inline constexpr double kParetoKThreshold = 0.7;

struct ElpdEstimate {
    ElpdMethod method = ElpdMethod::Psis;
    double elpd = 0.0;
    double se = 0.0;
    Eigen::VectorXd pointwise;
    Eigen::VectorXd pareto_k;           // psis only
    std::vector<std::size_t> flagged;   // records with k-hat above the threshold

    bool reliable() const { return flagged.empty(); }
};

/// Sum and sqrt(n * sample variance) of per-record values.
ElpdEstimate summarise_pointwise(Eigen::VectorXd pointwise, ElpdMethod method);

ElpdEstimate elpd_psis(const LogLikMatrix& ll);
/// Same estimate computed in record chunks so the full matrix never materialises.
ElpdEstimate elpd_psis(const FitResult& fit, const PosteriorDraws& draws, std::span<const PartnershipRecord> records,
                       std::size_t chunk = 512);

/// log mean_d exp(ll(d, i)): the in-sample log predictive density per record.
Eigen::VectorXd in_sample_lpd(const LogLikMatrix& ll);

struct KFoldOptions {
    int folds = 10;
    int n_draws = 1000;
    std::uint64_t seed = 1;
    FitOptions fit;
};

/// Refit K times, scoring each held-out record by its log predictive density
/// averaged over Laplace draws. folds = n gives exact leave-one-out.
ElpdEstimate elpd_kfold(const FitProblem& problem, const KFoldOptions& opts);

struct ElpdDifference {
    double diff = 0.0;
    double se = 0.0;
};

/// Paired difference sum(a_i - b_i) with se sqrt(n * var(a_i - b_i)).
ElpdDifference elpd_diff(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

inline constexpr std::array<double, 9> kDeciles{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};

/// Linear interpolation of the order statistics (h = (n - 1) q), input sorted ascending.
double empirical_quantile(std::span<const double> sorted, double q);

struct QQGroup {
    std::string label;
    std::vector<double> observed;
    std::vector<double> predictive;
};

/// Root mean squared difference of observed vs predictive quantiles over all group x probability cells.
double qq_rmse(std::span<const QQGroup> groups, std::span<const double> probs = kDeciles);

struct ModelScore {
    std::string name;
    ElpdEstimate elpd;
    double qq_rmse = 0.0;
};

struct ComparisonRow {
    int rank = 0;
    std::string model;
    double elpd = 0.0;
    double elpd_se = 0.0;
    double elpd_diff = 0.0;
    double se_of_diff = 0.0;
    double qq_rmse = 0.0;
};

struct ComparisonReport {
    std::vector<ComparisonRow> rows;
};

/// Rank by ELPD (highest first); differences are taken against the top model.
ComparisonReport rank_models(std::span<const ModelScore> scores);

/// CSV with columns rank,model,elpd,elpd_diff,se_of_diff,qq_rmse (+elpd_se).
std::string to_csv(const ComparisonReport& report);
void to_json(nlohmann::json& j, const ComparisonReport& report);

}  // namespace agemix
