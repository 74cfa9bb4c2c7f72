#include "agemix/evaluation.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace agemix {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double log_sum_exp(const Eigen::Ref<const Eigen::VectorXd>& v)
{
    const double m = v.maxCoeff();
    if (!std::isfinite(m)) return m;
    return m + std::log((v.array() - m).exp().sum());
}

double sample_variance(const Eigen::VectorXd& v)
{
    if (v.size() < 2) return 0.0;
    const double mean = v.mean();
    return (v.array() - mean).square().sum() / static_cast<double>(v.size() - 1);
}

// Generalised Pareto quantile.
double gpd_quantile(double p, double k, double sigma)
{
    if (k == 0.0) return -sigma * std::log1p(-p);
    return sigma * std::expm1(-k * std::log1p(-p)) / k;
}

std::string format(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

}  // namespace

std::string_view to_string(ElpdMethod m) { return m == ElpdMethod::Psis ? "psis" : "kfold"; }

ElpdMethod elpd_method_from_string(std::string_view name)
{
    if (name == "psis") return ElpdMethod::Psis;
    if (name == "kfold") return ElpdMethod::KFold;
    throw std::invalid_argument("unknown ELPD method: " + std::string(name));
}

LogLikMatrix pointwise_loglik(const FitResult& fit, const PosteriorDraws& draws,
                              std::span<const PartnershipRecord> records)
{
    const auto n = static_cast<Eigen::Index>(records.size());
    const Eigen::Index n_draws = draws.draws.rows();
    if (draws.draws.cols() != fit.coefficients.size()) {
        throw std::invalid_argument("pointwise_loglik: draws do not match the fit's coefficient layout");
    }
    const Design design = fit.design();
    std::array<Eigen::MatrixXd, 4> x;
    std::array<Eigen::Index, 4> offsets{};
    Eigen::Index offset = 0;
    for (int s = 0; s < kSlotCount; ++s) {
        offsets[s] = offset;
        if (fit.block_sizes[s] == 0) continue;
        x[s] = design.matrix(static_cast<Slot>(s), records);
        offset += fit.block_sizes[s];
    }
    Eigen::VectorXd y(n), jac(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& r = records[static_cast<std::size_t>(i)];
        y(i) = forward(fit.transform, r);
        jac(i) = log_jacobian(fit.transform, r);
    }

    LogLikMatrix ll{Eigen::MatrixXd(n_draws, n), {}};
    ll.record_index.resize(records.size());
    std::iota(ll.record_index.begin(), ll.record_index.end(), std::size_t{0});
    std::array<Eigen::VectorXd, 4> eta;
    for (Eigen::Index d = 0; d < n_draws; ++d) {
        for (int s = 0; s < kSlotCount; ++s) {
            eta[s] = fit.block_sizes[s] > 0
                         ? Eigen::VectorXd(x[s] * draws.draws.row(d).segment(offsets[s], fit.block_sizes[s]).transpose())
                         : Eigen::VectorXd::Zero(n);
        }
        for (Eigen::Index i = 0; i < n; ++i) {
            const LinearPredictors e{eta[0](i), eta[1](i), eta[2](i), eta[3](i)};
            const double v = in_support(fit.family, y(i))
                                 ? log_density_with_score(fit.family, e, y(i), nullptr) + jac(i)
                                 : -kInf;
            if (!std::isfinite(v)) {
                throw std::runtime_error("pointwise_loglik: non-finite log density for record " + std::to_string(i) +
                                         " " + describe(records[static_cast<std::size_t>(i)]) + " at draw " +
                                         std::to_string(d));
            }
            ll.values(d, i) = v;
        }
    }
    return ll;
}

GpdFit gpd_fit(std::span<const double> x)
{
    const auto n = x.size();
    constexpr double prior = 3.0;
    const auto m = 30 + static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(n))));
    const double xstar = x[static_cast<std::size_t>(std::floor(static_cast<double>(n) / 4.0 + 0.5)) - 1];
    const double xmax = x[n - 1];

    auto profile = [&](double theta) {
        const double a = -theta;
        double k = 0.0;
        for (double v : x) k += std::log1p(a * v);
        k /= static_cast<double>(n);
        return std::log(a / k) - k - 1.0;
    };

    std::vector<double> theta(m), l_theta(m);
    for (std::size_t j = 0; j < m; ++j) {
        theta[j] = 1.0 / xmax + (1.0 - std::sqrt(static_cast<double>(m) / (static_cast<double>(j + 1) - 0.5))) /
                                    prior / xstar;
        const double l = static_cast<double>(n) * profile(theta[j]);
        l_theta[j] = std::isfinite(l) ? l : -kInf;
    }
    const double l_max = *std::max_element(l_theta.begin(), l_theta.end());
    double wsum = 0.0;
    for (double l : l_theta) wsum += std::exp(l - l_max);
    double theta_hat = 0.0;
    for (std::size_t j = 0; j < m; ++j) theta_hat += theta[j] * std::exp(l_theta[j] - l_max) / wsum;

    double k = 0.0;
    for (double v : x) k += std::log1p(-theta_hat * v);
    k /= static_cast<double>(n);
    const double sigma = -k / theta_hat;
    // Shrink towards 0.5, as the PSIS reference implementation does.
    constexpr double a = 10.0;
    k = k * static_cast<double>(n) / (static_cast<double>(n) + a) + a * 0.5 / (static_cast<double>(n) + a);
    if (std::isnan(sigma)) return {kInf, sigma};
    return {k, sigma};
}

PsisWeights psis_smooth(const Eigen::VectorXd& log_ratios)
{
    const auto s = static_cast<std::size_t>(log_ratios.size());
    PsisWeights out{log_ratios.array() - log_ratios.maxCoeff(), 0.0};
    Eigen::VectorXd& lw = out.log_weights;

    const auto tail_len = static_cast<std::size_t>(
        std::ceil(std::min(0.2 * static_cast<double>(s), 3.0 * std::sqrt(static_cast<double>(s)))));
    if (tail_len >= 5 && tail_len < s) {
        std::vector<std::size_t> order(s);
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return lw(a) < lw(b); });
        const std::size_t first_tail = s - tail_len;
        const double cutoff = lw(order[first_tail - 1]);
        const double tail_min = lw(order[first_tail]);
        const double tail_max = lw(order[s - 1]);
        if (std::abs(tail_max - tail_min) >= std::numeric_limits<double>::epsilon() / 100.0) {
            const double exp_cutoff = std::exp(cutoff);
            std::vector<double> exceed(tail_len);
            for (std::size_t j = 0; j < tail_len; ++j) exceed[j] = std::exp(lw(order[first_tail + j])) - exp_cutoff;
            const GpdFit g = gpd_fit(exceed);
            out.pareto_k = g.k;
            if (std::isfinite(g.k)) {
                for (std::size_t j = 0; j < tail_len; ++j) {
                    const double p = (static_cast<double>(j) + 0.5) / static_cast<double>(tail_len);
                    lw(order[first_tail + j]) = std::log(gpd_quantile(p, g.k, g.sigma) + exp_cutoff);
                }
            }
        }
    }
    lw = lw.cwiseMin(0.0);
    lw.array() -= log_sum_exp(lw);
    return out;
}

ElpdEstimate summarise_pointwise(Eigen::VectorXd pointwise, ElpdMethod method)
{
    ElpdEstimate e;
    e.method = method;
    e.elpd = pointwise.sum();
    e.se = std::sqrt(static_cast<double>(pointwise.size()) * sample_variance(pointwise));
    e.pointwise = std::move(pointwise);
    return e;
}

namespace {

void psis_columns(const Eigen::MatrixXd& ll, Eigen::Index base, Eigen::VectorXd& pointwise, Eigen::VectorXd& khat)
{
    for (Eigen::Index i = 0; i < ll.cols(); ++i) {
        const Eigen::VectorXd col = ll.col(i);
        const PsisWeights w = psis_smooth(-col);
        pointwise(base + i) = log_sum_exp(w.log_weights + col);
        khat(base + i) = w.pareto_k;
    }
}

ElpdEstimate finish_psis(Eigen::VectorXd pointwise, Eigen::VectorXd khat)
{
    ElpdEstimate e = summarise_pointwise(std::move(pointwise), ElpdMethod::Psis);
    for (Eigen::Index i = 0; i < khat.size(); ++i) {
        if (!(khat(i) <= kParetoKThreshold)) e.flagged.push_back(static_cast<std::size_t>(i));
    }
    e.pareto_k = std::move(khat);
    return e;
}

}  // namespace

ElpdEstimate elpd_psis(const LogLikMatrix& ll)
{
    if (ll.values.rows() < 2) throw std::invalid_argument("elpd_psis: need at least two draws");
    Eigen::VectorXd pointwise(ll.values.cols()), khat(ll.values.cols());
    psis_columns(ll.values, 0, pointwise, khat);
    return finish_psis(std::move(pointwise), std::move(khat));
}

ElpdEstimate elpd_psis(const FitResult& fit, const PosteriorDraws& draws, std::span<const PartnershipRecord> records,
                       std::size_t chunk)
{
    if (draws.draws.rows() < 2) throw std::invalid_argument("elpd_psis: need at least two draws");
    const auto n = static_cast<Eigen::Index>(records.size());
    Eigen::VectorXd pointwise(n), khat(n);
    for (std::size_t start = 0; start < records.size(); start += chunk) {
        const auto len = std::min(chunk, records.size() - start);
        const LogLikMatrix ll = pointwise_loglik(fit, draws, records.subspan(start, len));
        psis_columns(ll.values, static_cast<Eigen::Index>(start), pointwise, khat);
    }
    return finish_psis(std::move(pointwise), std::move(khat));
}

Eigen::VectorXd in_sample_lpd(const LogLikMatrix& ll)
{
    const double log_n = std::log(static_cast<double>(ll.values.rows()));
    Eigen::VectorXd out(ll.values.cols());
    for (Eigen::Index i = 0; i < ll.values.cols(); ++i) out(i) = log_sum_exp(ll.values.col(i)) - log_n;
    return out;
}

ElpdEstimate elpd_kfold(const FitProblem& problem, const KFoldOptions& opts)
{
    const std::size_t n = problem.records.size();
    if (opts.folds < 2 || static_cast<std::size_t>(opts.folds) > n) {
        throw std::invalid_argument("elpd_kfold: folds must lie in [2, n]");
    }
    // Knots are fixed from the full data so every fold shares one design.
    FitProblem base = problem;
    base.spec = Posterior(problem).problem().spec;

    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    if (static_cast<std::size_t>(opts.folds) < n) {
        Rng rng(opts.seed);
        std::shuffle(perm.begin(), perm.end(), rng);
    }
    std::vector<int> fold_of(n);
    for (std::size_t j = 0; j < n; ++j) fold_of[perm[j]] = static_cast<int>(j % static_cast<std::size_t>(opts.folds));

    Eigen::VectorXd pointwise(static_cast<Eigen::Index>(n));
    for (int f = 0; f < opts.folds; ++f) {
        FitProblem train = base;
        train.records.clear();
        std::vector<PartnershipRecord> held;
        std::vector<std::size_t> held_index;
        for (std::size_t i = 0; i < n; ++i) {
            if (fold_of[i] == f) {
                held.push_back(problem.records[i]);
                held_index.push_back(i);
            } else {
                train.records.push_back(problem.records[i]);
            }
        }
        const FitResult fit = fit_map(train, std::nullopt, opts.fit);
        const PosteriorDraws draws = laplace_draws(fit, opts.n_draws, opts.seed + 7919 * static_cast<std::uint64_t>(f + 1));
        const LogLikMatrix ll = pointwise_loglik(fit, draws, held);
        const Eigen::VectorXd lpd = in_sample_lpd(ll);
        for (std::size_t j = 0; j < held_index.size(); ++j) {
            pointwise(static_cast<Eigen::Index>(held_index[j])) = lpd(static_cast<Eigen::Index>(j));
        }
    }
    return summarise_pointwise(std::move(pointwise), ElpdMethod::KFold);
}

ElpdDifference elpd_diff(const Eigen::VectorXd& a, const Eigen::VectorXd& b)
{
    if (a.size() != b.size()) {
        throw std::invalid_argument("elpd_diff: length mismatch (" + std::to_string(a.size()) + " vs " +
                                    std::to_string(b.size()) + ")");
    }
    const Eigen::VectorXd d = a - b;
    return {d.sum(), std::sqrt(static_cast<double>(d.size()) * sample_variance(d))};
}

double empirical_quantile(std::span<const double> sorted, double q)
{
    if (sorted.empty()) throw std::invalid_argument("empirical_quantile: empty input");
    const double h = (static_cast<double>(sorted.size()) - 1.0) * q;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

double qq_rmse(std::span<const QQGroup> groups, std::span<const double> probs)
{
    if (groups.empty()) throw std::invalid_argument("qq_rmse: no groups");
    double sum = 0.0;
    std::size_t cells = 0;
    for (const auto& g : groups) {
        if (g.observed.empty() || g.predictive.empty()) {
            throw std::invalid_argument("qq_rmse: empty group '" + g.label + "'");
        }
        std::vector<double> obs = g.observed;
        std::vector<double> pred = g.predictive;
        std::sort(obs.begin(), obs.end());
        std::sort(pred.begin(), pred.end());
        for (double q : probs) {
            const double d = empirical_quantile(obs, q) - empirical_quantile(pred, q);
            sum += d * d;
            ++cells;
        }
    }
    return std::sqrt(sum / static_cast<double>(cells));
}

ComparisonReport rank_models(std::span<const ModelScore> scores)
{
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](auto a, auto b) { return scores[a].elpd.elpd > scores[b].elpd.elpd; });
    ComparisonReport report;
    for (std::size_t r = 0; r < order.size(); ++r) {
        const auto& s = scores[order[r]];
        const auto diff = elpd_diff(s.elpd.pointwise, scores[order.front()].elpd.pointwise);
        report.rows.push_back({static_cast<int>(r + 1), s.name, s.elpd.elpd, s.elpd.se, diff.diff, diff.se, s.qq_rmse});
    }
    return report;
}

std::string to_csv(const ComparisonReport& report)
{
    std::string out = "rank,model,elpd,elpd_diff,se_of_diff,qq_rmse,elpd_se\n";
    for (const auto& r : report.rows) {
        out += std::to_string(r.rank) + "," + r.model + "," + format(r.elpd) + "," + format(r.elpd_diff) + "," +
               format(r.se_of_diff) + "," + format(r.qq_rmse) + "," + format(r.elpd_se) + "\n";
    }
    return out;
}

void to_json(nlohmann::json& j, const ComparisonReport& report)
{
    j = nlohmann::json::array();
    for (const auto& r : report.rows) {
        j.push_back({{"rank", r.rank},
                     {"model", r.model},
                     {"elpd", r.elpd},
                     {"elpd_se", r.elpd_se},
                     {"elpd_diff", r.elpd_diff},
                     {"se_of_diff", r.se_of_diff},
                     {"qq_rmse", r.qq_rmse}});
    }
}

}  // namespace agemix
