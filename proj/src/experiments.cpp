#include "agemix/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <thread>

namespace agemix {

namespace {

std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::string num(double v)
{
    if (!std::isfinite(v)) return "NA";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

std::string sex_label(Sex s) { return to_string(s); }

struct Scored {
    bool ok = false;
    std::string error;
    FitResult fit;
    PosteriorDraws draws;
    ElpdEstimate elpd;
};

Scored fit_and_score(const FitProblem& problem, const ExperimentOptions& opts, std::uint64_t seed)
{
    Scored s;
    try {
        s.fit = fit_map(problem, std::nullopt, opts.fit);
        if (!s.fit.converged) {
            s.error = "optimizer did not converge";
            return s;
        }
        if (!s.fit.curvature_pd) {
            s.error = "curvature not positive definite";
            return s;
        }
        s.draws = laplace_draws(s.fit, opts.n_draws, mix_seed(seed, 1));
        if (opts.elpd == ElpdMethod::Psis) {
            s.elpd = elpd_psis(s.fit, s.draws, problem.records);
        } else {
            KFoldOptions k;
            k.folds = std::min<int>(opts.kfold_folds, static_cast<int>(problem.records.size()));
            k.n_draws = opts.n_draws;
            k.seed = mix_seed(seed, 2);
            k.fit = opts.fit;
            s.elpd = elpd_kfold(problem, k);
        }
        s.ok = true;
    } catch (const std::exception& e) {
        s.error = e.what();
        s.ok = false;
    }
    return s;
}

std::vector<double> partner_ages(std::span<const PartnershipRecord> records)
{
    std::vector<double> out;
    out.reserve(records.size());
    for (const auto& r : records) out.push_back(r.partner_age);
    return out;
}

std::vector<double> to_vector(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

std::uint64_t mix_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b)
{
    return splitmix64(splitmix64(splitmix64(base) ^ a) ^ (b * 0xd1b54a32d192ed03ULL));
}

int default_jobs()
{
    const unsigned n = std::thread::hardware_concurrency();
    return n == 0 ? 1 : static_cast<int>(n);
}

void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn)
{
    const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(jobs, 1)));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

std::vector<std::pair<Family, TransformKind>> distribution_combinations()
{
    std::vector<std::pair<Family, TransformKind>> out;
    for (Family f : {Family::Normal, Family::SkewNormal, Family::SinhArcsinh}) {
        for (TransformKind t : kRealLineTransforms) out.emplace_back(f, t);
    }
    out.emplace_back(Family::Gamma, TransformKind::GammaReflected);
    out.emplace_back(Family::Beta, TransformKind::BetaRescaled);
    return out;
}

bool SubsetComparison::ok() const
{
    return std::all_of(combinations.begin(), combinations.end(), [](const auto& c) { return c.ok; });
}

bool DistributionComparison::ok() const
{
    return std::all_of(subsets.begin(), subsets.end(), [](const auto& s) { return s.ok(); });
}

bool ModelComparison::ok() const
{
    return std::all_of(models.begin(), models.end(), [](const auto& m) { return m.ok; });
}

SubsetComparison compare_distributions_subset(const SubsetKey& key, std::span<const PartnershipRecord> records,
                                              const ExperimentOptions& opts)
{
    SubsetComparison out;
    out.key = key;
    out.n = records.size();
    const auto combos = distribution_combinations();
    out.combinations.resize(combos.size());
    const std::uint64_t subset_seed = mix_seed(opts.seed, static_cast<std::uint64_t>(key.sex) + 1,
                                               static_cast<std::uint64_t>(key.bin_lower));
    const std::vector<double> observed = partner_ages(records);

    for (std::size_t c = 0; c < combos.size(); ++c) {
        auto& res = out.combinations[c];
        res.family = combos[c].first;
        res.transform = combos[c].second;
        FitProblem problem;
        problem.family = res.family;
        problem.transform = Transform::of(res.transform);
        problem.spec.tag = ModelTag::Constant;
        problem.records.assign(records.begin(), records.end());
        const std::uint64_t seed = mix_seed(subset_seed, c + 1);
        Scored s = fit_and_score(problem, opts, seed);
        res.ok = s.ok;
        res.error = s.error;
        res.fit = std::move(s.fit);
        res.elpd = std::move(s.elpd);
        if (res.ok) {
            try {
                const Eigen::VectorXd pred = posterior_predictive(res.fit, s.draws, records, opts.qq_samples,
                                                                  mix_seed(seed, 3));
                const QQGroup group{key.label(), observed, to_vector(pred)};
                res.qq_rmse = qq_rmse(std::span(&group, 1));
            } catch (const std::exception& e) {
                res.ok = false;
                res.error = e.what();
            }
        }
    }

    std::vector<ModelScore> scores;
    std::vector<const CombinationResult*> best_of;
    for (Family f : kAllFamilies) {
        const CombinationResult* best = nullptr;
        for (const auto& c : out.combinations) {
            if (c.family == f && c.ok && (!best || c.elpd.elpd > best->elpd.elpd)) best = &c;
        }
        if (!best) continue;
        scores.push_back({std::string(to_string(f)), best->elpd, best->qq_rmse});
        best_of.push_back(best);
    }
    const ComparisonReport report = rank_models(scores);
    for (const auto& row : report.rows) {
        const auto it = std::find_if(best_of.begin(), best_of.end(),
                                     [&](const CombinationResult* c) { return to_string(c->family) == row.model; });
        out.ranking.push_back({row.rank, (*it)->family, (*it)->transform, row.elpd, row.elpd_se, row.elpd_diff,
                               row.se_of_diff, row.qq_rmse});
    }
    return out;
}

DistributionComparison compare_distributions(std::span<const PartnershipRecord> records,
                                             const ExperimentOptions& opts)
{
    const auto subsets = stratify(records);
    std::vector<std::pair<SubsetKey, const std::vector<PartnershipRecord>*>> work;
    for (const auto& [key, rows] : subsets) work.emplace_back(key, &rows);
    DistributionComparison out;
    out.subsets.resize(work.size());
    parallel_for(work.size(), opts.jobs, [&](std::size_t i) {
        out.subsets[i] = compare_distributions_subset(work[i].first, *work[i].second, opts);
    });
    return out;
}

std::string rankings_csv(const DistributionComparison& result)
{
    std::string out = "subset,sex,age_bin,rank,distribution,transform,elpd,elpd_diff,se_of_diff,qq_rmse,elpd_se\n";
    for (const auto& s : result.subsets) {
        for (const auto& r : s.ranking) {
            out += s.key.label() + "," + sex_label(s.key.sex) + "," + s.key.bin_label() + "," +
                   std::to_string(r.rank) + "," + std::string(display_name(r.family)) + "," +
                   std::string(display_name(r.transform)) + "," + num(r.elpd) + "," + num(r.elpd_diff) + "," +
                   num(r.se_of_diff) + "," + num(r.qq_rmse) + "," + num(r.elpd_se) + "\n";
        }
    }
    return out;
}

std::string combinations_csv(const DistributionComparison& result)
{
    std::string out = "subset,n,distribution,transform,status,elpd,elpd_se,qq_rmse,max_pareto_k,error\n";
    for (const auto& s : result.subsets) {
        for (const auto& c : s.combinations) {
            const double max_k = c.ok && c.elpd.pareto_k.size() > 0 ? c.elpd.pareto_k.maxCoeff()
                                                                     : std::numeric_limits<double>::quiet_NaN();
            std::string error = c.error;
            std::replace(error.begin(), error.end(), ',', ';');
            std::replace(error.begin(), error.end(), '\n', ' ');
            out += s.key.label() + "," + std::to_string(s.n) + "," + std::string(display_name(c.family)) + "," +
                   std::string(display_name(c.transform)) + "," + (c.ok ? "ok" : "FAILED") + "," +
                   (c.ok ? num(c.elpd.elpd) : "NA") + "," + (c.ok ? num(c.elpd.se) : "NA") + "," +
                   (c.ok ? num(c.qq_rmse) : "NA") + "," + num(max_k) + "," + error + "\n";
        }
    }
    return out;
}

std::string transform_share_csv(const DistributionComparison& result)
{
    std::string out = "distribution";
    for (TransformKind t : kRealLineTransforms) out += "," + std::string(display_name(t));
    out += ",subsets\n";
    for (Family f : {Family::Normal, Family::SkewNormal, Family::SinhArcsinh}) {
        std::map<TransformKind, int> wins;
        int total = 0;
        for (const auto& s : result.subsets) {
            const CombinationResult* best = nullptr;
            for (const auto& c : s.combinations) {
                if (c.family == f && c.ok && (!best || c.elpd.elpd > best->elpd.elpd)) best = &c;
            }
            if (!best) continue;
            ++wins[best->transform];
            ++total;
        }
        out += std::string(display_name(f));
        for (TransformKind t : kRealLineTransforms) {
            out += "," + num(total > 0 ? static_cast<double>(wins[t]) / total : std::nan(""));
        }
        out += "," + std::to_string(total) + "\n";
    }
    return out;
}

ModelComparison compare_models(std::span<const PartnershipRecord> records, const ExperimentOptions& opts,
                               Family family, TransformKind transform)
{
    ModelComparison out;
    out.models.resize(kRegressionModels.size());
    const auto groups = stratify(records);

    parallel_for(kRegressionModels.size(), opts.jobs, [&](std::size_t m) {
        auto& res = out.models[m];
        res.tag = kRegressionModels[m];
        FitProblem problem;
        problem.family = family;
        problem.transform = Transform::of(transform);
        problem.spec.tag = res.tag;
        problem.spec.interior_knots = opts.interior_knots;
        problem.records.assign(records.begin(), records.end());
        const std::uint64_t seed = mix_seed(opts.seed, 100 + m);
        Scored s = fit_and_score(problem, opts, seed);
        res.ok = s.ok;
        res.error = s.error;
        res.fit = std::move(s.fit);
        res.draws = std::move(s.draws);
        res.elpd = std::move(s.elpd);
        if (!res.ok) return;
        try {
            std::vector<QQGroup> qq;
            std::uint64_t g = 0;
            for (const auto& [key, rows] : groups) {
                const Eigen::VectorXd pred =
                    posterior_predictive(res.fit, res.draws, rows, opts.qq_samples, mix_seed(seed, 4, ++g));
                qq.push_back({key.label(), partner_ages(rows), to_vector(pred)});
            }
            res.qq_rmse = qq.empty() ? std::nan("") : qq_rmse(qq);
        } catch (const std::exception& e) {
            res.ok = false;
            res.error = e.what();
        }
    });

    std::vector<ModelScore> scores;
    for (const auto& m : out.models) {
        if (m.ok) scores.push_back({std::string(display_name(m.tag)), m.elpd, m.qq_rmse});
    }
    out.report = rank_models(scores);
    return out;
}

std::string parameter_curves_csv(const ModelComparison& result, std::size_t max_draws)
{
    static constexpr std::array<const char*, 4> kNames{"mu", "sigma", "epsilon", "delta"};
    std::string out = "model,parameter,sex,age,estimate,lower,upper\n";
    for (const auto& m : result.models) {
        if (!m.ok) continue;
        const auto n_draws = std::min<std::size_t>(max_draws, static_cast<std::size_t>(m.draws.draws.rows()));
        const Design design = m.fit.design();
        std::vector<std::array<double, 4>> per_draw(n_draws);
        for (int slot = 0; slot < kSlotCount; ++slot) {
            for (Sex sex : {Sex::Male, Sex::Female}) {
                for (int age = kCurveAgeLow; age <= kCurveAgeHigh; ++age) {
                    const auto params = [&](const Eigen::VectorXd& beta) {
                        const ParamVector p = linpred_to_params(
                            m.fit.family, m.fit.linear_predictors(beta, design.row(age, sex)));
                        const std::array<double, 4> v{p.mu, p.sigma, p.epsilon, p.delta};
                        return v[slot];
                    };
                    std::vector<double> values(n_draws);
                    for (std::size_t d = 0; d < n_draws; ++d) {
                        values[d] = params(m.draws.draws.row(static_cast<Eigen::Index>(d)).transpose());
                    }
                    std::sort(values.begin(), values.end());
                    const double lo = values.empty() ? std::nan("") : empirical_quantile(values, 0.025);
                    const double hi = values.empty() ? std::nan("") : empirical_quantile(values, 0.975);
                    out += std::string(display_name(m.tag)) + "," + kNames[slot] + "," + sex_label(sex) + "," +
                           std::to_string(age) + "," + num(params(m.fit.coefficients)) + "," + num(lo) + "," +
                           num(hi) + "\n";
                }
            }
        }
    }
    return out;
}

std::string predictive_histogram_csv(const ModelComparison& result, std::span<const PartnershipRecord> records,
                                     const ExperimentOptions& opts)
{
    std::string out = "model,sex,respondent_age,source,bin_lower,bin_upper,density\n";
    const auto emit = [&](const std::string& model, Sex sex, int age, const char* source,
                          std::span<const double> values) {
        if (values.empty()) return;
        std::map<long, std::size_t> bins;
        for (double v : values) ++bins[static_cast<long>(std::floor(v))];
        for (const auto& [lower, count] : bins) {
            out += model + "," + sex_label(sex) + "," + std::to_string(age) + "," + source + "," +
                   std::to_string(lower) + "," + std::to_string(lower + 1) + "," +
                   num(static_cast<double>(count) / static_cast<double>(values.size())) + "\n";
        }
    };
    for (Sex sex : {Sex::Male, Sex::Female}) {
        for (int age : kHistogramAges) {
            std::vector<double> observed;
            for (const auto& r : records) {
                if (r.respondent_sex == sex && static_cast<int>(std::floor(r.respondent_age)) == age) {
                    observed.push_back(r.partner_age);
                }
            }
            emit("observed", sex, age, "observed", observed);
        }
    }
    std::uint64_t m_index = 0;
    for (const auto& m : result.models) {
        ++m_index;
        if (!m.ok || m.draws.draws.rows() == 0) continue;
        const int per_draw = std::max<int>(
            1, static_cast<int>(opts.qq_samples / static_cast<std::size_t>(m.draws.draws.rows())));
        for (Sex sex : {Sex::Male, Sex::Female}) {
            for (int age : kHistogramAges) {
                const Eigen::VectorXd pred =
                    posterior_predictive(m.fit, m.draws, age, sex, per_draw,
                                         mix_seed(opts.seed, 200 + m_index, static_cast<std::uint64_t>(age) * 2 +
                                                                               static_cast<std::uint64_t>(sex)));
                emit(std::string(display_name(m.tag)), sex, age, "predictive", to_vector(pred));
            }
        }
    }
    return out;
}

std::string moments_csv(std::span<const PartnershipRecord> records)
{
    std::string out = "subset,sex,age_bin,n,mean,sd,skewness,kurtosis\n";
    for (const auto& [key, rows] : stratify(records)) {
        const Moments m = empirical_moments(partner_ages(rows));
        out += key.label() + "," + sex_label(key.sex) + "," + key.bin_label() + "," + std::to_string(m.n) + "," +
               num(m.mean) + "," + num(m.sd) + "," + (m.skewness ? num(*m.skewness) : "NA") + "," +
               (m.kurtosis ? num(*m.kurtosis) : "NA") + "\n";
    }
    return out;
}

}  // namespace agemix
