#pragma once

#include "agemix/data_io.hpp"
#include "agemix/evaluation.hpp"
#include "agemix/inference.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace agemix {

/// Deterministic child seed for an independent stream identified by (a, b).
std::uint64_t mix_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0);

/// Runs fn(0..n-1) on up to `jobs` threads. The first exception is rethrown.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn);

int default_jobs();

struct ExperimentOptions {
    std::uint64_t seed = 1;
    int jobs = 1;
    ElpdMethod elpd = ElpdMethod::Psis;
    int n_draws = 4000;
    int kfold_folds = 10;
    std::size_t qq_samples = 10000;
    int interior_knots = 5;
    FitOptions fit;
};

struct CombinationResult {
    Family family = Family::Normal;
    TransformKind transform = TransformKind::LinearAge;
    bool ok = false;
    std::string error;
    FitResult fit;
    ElpdEstimate elpd;
    double qq_rmse = 0.0;
};

struct FamilyRanking {
    int rank = 0;
    Family family = Family::Normal;
    TransformKind transform = TransformKind::LinearAge;
    double elpd = 0.0;
    double elpd_se = 0.0;
    double elpd_diff = 0.0;
    double se_of_diff = 0.0;
    double qq_rmse = 0.0;
};

struct SubsetComparison {
    SubsetKey key;
    std::size_t n = 0;
    std::vector<CombinationResult> combinations;  // 14, fixed order
    std::vector<FamilyRanking> ranking;           // families with a successful fit, best first
    bool ok() const;
};

/// All family x transform combinations for one subset of records.
std::vector<std::pair<Family, TransformKind>> distribution_combinations();

/// Intercept-only fits of every combination; each family keeps its best transform by ELPD.
SubsetComparison compare_distributions_subset(const SubsetKey& key, std::span<const PartnershipRecord> records,
                                              const ExperimentOptions& opts);

struct DistributionComparison {
    std::vector<SubsetComparison> subsets;  // sorted by key
    bool ok() const;
};

DistributionComparison compare_distributions(std::span<const PartnershipRecord> records,
                                             const ExperimentOptions& opts);

/// Long-format ranking tables: one block of rows per subset.
std::string rankings_csv(const DistributionComparison& result);
/// Every combination's ELPD, including failures.
std::string combinations_csv(const DistributionComparison& result);
/// Share of subsets in which each transform gave the best ELPD for the real-line families.
std::string transform_share_csv(const DistributionComparison& result);

struct ModelFit {
    ModelTag tag = ModelTag::Conventional;
    bool ok = false;
    std::string error;
    FitResult fit;
    PosteriorDraws draws;
    ElpdEstimate elpd;
    double qq_rmse = 0.0;
};

struct ModelComparison {
    std::vector<ModelFit> models;  // Conventional, Distributional 1..4
    ComparisonReport report;
    bool ok() const;
};

ModelComparison compare_models(std::span<const PartnershipRecord> records, const ExperimentOptions& opts,
                               Family family = Family::SinhArcsinh,
                               TransformKind transform = TransformKind::LogRatio);

inline constexpr int kCurveAgeLow = 15;
inline constexpr int kCurveAgeHigh = 64;

/// model,parameter,sex,age,estimate,lower,upper with 95% bands from the Laplace draws.
std::string parameter_curves_csv(const ModelComparison& result, std::size_t max_draws = 1000);

inline constexpr std::array<int, 3> kHistogramAges{20, 35, 50};

/// One-year bins of observed and posterior predictive partner ages at selected respondent ages.
std::string predictive_histogram_csv(const ModelComparison& result, std::span<const PartnershipRecord> records,
                                     const ExperimentOptions& opts);

/// subset,sex,age_bin,n,mean,sd,skewness,kurtosis with NA for unavailable moments.
std::string moments_csv(std::span<const PartnershipRecord> records);

}  // namespace agemix
