#include "agemix/deheap.hpp"

#include "agemix/distributions.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace agemix {

namespace {

std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t group_seed(std::uint64_t seed, Sex sex, long age)
{
    return splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(age) * 2 + static_cast<std::uint64_t>(sex)));
}

}  // namespace

CountGrid CountGrid::from_records(std::span<const PartnershipRecord> records)
{
    CountGrid g;
    for (const auto& r : records) {
        ++g.counts[{r.respondent_sex, std::lround(r.respondent_age), std::lround(r.partner_age)}];
    }
    return g;
}

long CountGrid::total() const
{
    long t = 0;
    for (const auto& [key, n] : counts) t += n;
    return t;
}

std::map<long, double> CountGrid::group(Sex sex, long respondent_age) const
{
    std::map<long, double> out;
    for (auto it = counts.lower_bound({sex, respondent_age, std::numeric_limits<long>::min()});
         it != counts.end() && std::get<0>(it->first) == sex && std::get<1>(it->first) == respondent_age; ++it) {
        out[std::get<2>(it->first)] = static_cast<double>(it->second);
    }
    return out;
}

std::optional<std::map<long, double>> nw_expected(const std::map<long, double>& counts, long respondent_age,
                                                  double bandwidth)
{
    if (!(bandwidth > 0.0)) throw std::invalid_argument("nw_expected: bandwidth must be positive");
    std::vector<std::pair<long, double>> train;
    for (const auto& [p, n] : counts) {
        if (!is_heaped_age(p, respondent_age)) train.emplace_back(p, n);
    }
    if (train.size() < 2) return std::nullopt;

    std::map<long, double> out;
    for (const auto& [p, n] : counts) {
        if (!is_heaped_age(p, respondent_age)) continue;
        double num = 0.0, den = 0.0;
        for (const auto& [tp, tn] : train) {
            const double u = static_cast<double>(tp - p) / bandwidth;
            const double w = std::exp(-0.5 * u * u);
            num += w * tn;
            den += w;
        }
        out[p] = den > 0.0 ? num / den : 0.0;
    }
    return out;
}

double heaping_index(std::span<const PartnershipRecord> records)
{
    if (records.empty()) throw std::invalid_argument("heaping_index: no records");
    std::size_t heaped = 0;
    for (const auto& r : records) {
        if (is_heaped_age(std::lround(r.partner_age), std::lround(r.respondent_age))) ++heaped;
    }
    const double frac = static_cast<double>(heaped) / static_cast<double>(records.size());
    return std::max(frac - 0.2, 0.0) / 0.8;
}

DeheapResult deheap(std::span<const PartnershipRecord> records, double bandwidth, std::uint64_t seed)
{
    DeheapResult result{{records.begin(), records.end()}, {}};
    HeapReport& report = result.report;
    report.bandwidth = bandwidth;
    report.seed = seed;
    if (records.empty()) return result;
    report.index_before = heaping_index(records);

    // Record indices per (sex, respondent age) and partner age.
    std::map<std::pair<Sex, long>, std::map<long, std::vector<std::size_t>>> groups;
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        groups[{r.respondent_sex, std::lround(r.respondent_age)}][std::lround(r.partner_age)].push_back(i);
    }

    for (auto& [key, by_partner] : groups) {
        const auto [sex, age] = key;
        GroupReport g;
        g.sex = sex;
        g.respondent_age = age;
        for (const auto& [p, idx] : by_partner) g.n += idx.size();

        if (g.n < 2) {
            g.skipped = true;
            g.reason = "fewer than two records";
            report.groups.push_back(std::move(g));
            continue;
        }
        // Dense count grid over the observed partner-age range, zeros included.
        std::map<long, double> counts;
        for (long p = by_partner.begin()->first; p <= by_partner.rbegin()->first; ++p) {
            const auto it = by_partner.find(p);
            counts[p] = it == by_partner.end() ? 0.0 : static_cast<double>(it->second.size());
        }
        const auto expected = nw_expected(counts, age, bandwidth);
        if (!expected) {
            g.skipped = true;
            g.reason = "fewer than two non-heaped partner ages";
            report.groups.push_back(std::move(g));
            continue;
        }

        Rng rng(group_seed(seed, sex, age));
        for (const auto& [pstar, nhat] : *expected) {
            HeapedAge h;
            h.partner_age = pstar;
            h.observed = static_cast<long>(counts.at(pstar));
            h.expected = nhat;
            h.excess = std::max(static_cast<double>(h.observed) - nhat, 0.0);
            if (h.excess <= 0.0) {
                g.heaped.push_back(h);
                continue;
            }
            std::array<double, 5> n_local{};
            double denom = 0.0;
            for (int i = -2; i <= 2; ++i) {
                const long q = pstar + i;
                double v = 0.0;
                if (i == 0) {
                    v = nhat;
                } else if (q > 0 && q < 150) {
                    const auto it = counts.find(q);
                    v = it == counts.end() ? 0.0 : it->second;
                }
                n_local[i + 2] = v;
                denom += v;
            }
            if (denom > 0.0) {
                for (int i = 0; i < 5; ++i) {
                    h.shares[i] = n_local[i] / denom;
                    if (i != 2) h.moved[i] = static_cast<long>(std::floor(n_local[i] * h.excess / denom + 1e-9));
                }
            }
            // Each heaped age is the unique sender for its four neighbours.
            auto& pool = by_partner[pstar];
            std::shuffle(pool.begin(), pool.end(), rng);
            std::size_t next = 0;
            for (int i = 0; i < 5; ++i) {
                for (long m = 0; m < h.moved[i] && next < pool.size(); ++m) {
                    result.records[pool[next++]].partner_age = static_cast<double>(pstar + i - 2);
                    ++report.total_moved;
                }
            }
            g.heaped.push_back(h);
        }
        report.groups.push_back(std::move(g));
    }
    report.index_after = heaping_index(result.records);
    return result;
}

void to_json(nlohmann::json& j, const HeapReport& report)
{
    nlohmann::json groups = nlohmann::json::array();
    for (const auto& g : report.groups) {
        nlohmann::json heaped = nlohmann::json::array();
        for (const auto& h : g.heaped) {
            heaped.push_back({{"partner_age", h.partner_age},
                              {"observed", h.observed},
                              {"expected", h.expected},
                              {"excess", h.excess},
                              {"shares", h.shares},
                              {"moved", h.moved}});
        }
        nlohmann::json entry{{"sex", to_string(g.sex)}, {"respondent_age", g.respondent_age}, {"n", g.n},
                             {"skipped", g.skipped}, {"heaped", heaped}};
        if (g.skipped) entry["reason"] = g.reason;
        groups.push_back(std::move(entry));
    }
    j = nlohmann::json{{"bandwidth", report.bandwidth},
                       {"seed", report.seed},
                       {"heaping_index_before", report.index_before},
                       {"heaping_index_after", report.index_after},
                       {"total_moved", report.total_moved},
                       {"groups", groups}};
}

}  // namespace agemix
