#pragma once

#include "agemix/record.hpp"

#include <nlohmann/json_fwd.hpp>

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <vector>

namespace agemix {

/// True when partner age p lies a multiple of five years from respondent age a.
inline bool is_heaped_age(long partner_age, long respondent_age)
{
    return ((partner_age - respondent_age) % 5 + 5) % 5 == 0;
}

/// Partnership counts n_{s,a,p} on the integer age grid.
struct CountGrid {
    std::map<std::tuple<Sex, long, long>, long> counts;

    static CountGrid from_records(std::span<const PartnershipRecord> records);
    long total() const;
    /// Counts for one (sex, respondent age) group, keyed by partner age.
    std::map<long, double> group(Sex sex, long respondent_age) const;
};

/// Gaussian-kernel Nadaraya-Watson estimate of the count at every heaped
/// partner age of `counts`, trained only on the non-heaped ages. Returns
/// nothing when fewer than two non-heaped support points exist.
std::optional<std::map<long, double>> nw_expected(const std::map<long, double>& counts, long respondent_age,
                                                  double bandwidth);

struct HeapedAge {
    long partner_age = 0;
    long observed = 0;
    double expected = 0.0;
    double excess = 0.0;
    std::array<double, 5> shares{};  // partner ages p*-2 .. p*+2
    std::array<long, 5> moved{};     // moved[2] (p* itself) is always 0
};

struct GroupReport {
    Sex sex = Sex::Male;
    long respondent_age = 0;
    std::size_t n = 0;
    bool skipped = false;
    std::string reason;
    std::vector<HeapedAge> heaped;
};

struct HeapReport {
    double bandwidth = 2.0;
    std::uint64_t seed = 0;
    double index_before = 0.0;
    double index_after = 0.0;
    std::size_t total_moved = 0;
    std::vector<GroupReport> groups;
};

struct DeheapResult {
    std::vector<PartnershipRecord> records;  // input order preserved
    HeapReport report;
};

/// Redistribute excess mass at heaped partner ages to the four neighbouring
/// ages. Excess and shares for a group are computed before any record moves;
/// floor(d) uniformly chosen records move to each neighbour.
DeheapResult deheap(std::span<const PartnershipRecord> records, double bandwidth = 2.0, std::uint64_t seed = 1);

/// Excess share of records at heaped ages over the uniform 1/5, scaled to [0, 1].
double heaping_index(std::span<const PartnershipRecord> records);

void to_json(nlohmann::json& j, const HeapReport& report);

}  // namespace agemix
