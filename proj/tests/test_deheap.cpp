#include "agemix/deheap.hpp"
#include "support.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

#include <cmath>
#include <map>

using namespace agemix;
using doctest::Approx;

namespace {

/// One (male, age 30) group with `count(p)` records at each partner age in [lo, hi].
template <class F>
std::vector<PartnershipRecord> group_of(long lo, long hi, F count)
{
    std::vector<PartnershipRecord> out;
    for (long p = lo; p <= hi; ++p) {
        for (long i = 0; i < count(p); ++i) out.push_back({30.0, Sex::Male, static_cast<double>(p)});
    }
    return out;
}

std::map<long, long> partner_counts(std::span<const PartnershipRecord> records)
{
    std::map<long, long> out;
    for (const auto& r : records) ++out[std::lround(r.partner_age)];
    return out;
}

}  // namespace

TEST_CASE("heaped age predicate")
{
    CHECK(is_heaped_age(35, 30));
    CHECK(is_heaped_age(25, 30));
    CHECK_FALSE(is_heaped_age(33, 30));
    CHECK(is_heaped_age(20, 40));
}

TEST_CASE("nadaraya-watson expected counts")
{
    std::map<long, double> flat;
    for (long p = 20; p <= 45; ++p) flat[p] = 10.0;
    const auto e = nw_expected(flat, 30, 2.0);
    REQUIRE(e.has_value());
    for (const auto& [p, v] : *e) {
        CHECK(is_heaped_age(p, 30));
        CHECK(v == Approx(10.0));
    }

    std::map<long, double> tri;
    for (long p = 21; p <= 39; ++p) tri[p] = 20.0 - 2.0 * std::abs(static_cast<double>(p - 30));
    const auto t = nw_expected(tri, 30, 2.0);
    REQUIRE(t.has_value());
    CHECK(t->at(30) == Approx(16.233870358085).epsilon(1e-11));
    CHECK(t->at(25) == Approx(10.026438177186).epsilon(1e-11));
    CHECK(t->at(35) == Approx(10.026438177186).epsilon(1e-11));

    std::map<long, double> ramp;
    for (long p = 20; p <= 45; ++p) ramp[p] = static_cast<double>(p);
    const auto r = nw_expected(ramp, 30, 0.3);
    REQUIRE(r.has_value());
    for (long h : {25L, 30L, 35L, 40L}) {
        CHECK(r->at(h) >= h - 1.0);
        CHECK(r->at(h) <= h + 1.0);
    }

    const std::map<long, double> thin{{30, 5.0}, {31, 2.0}};
    CHECK_FALSE(nw_expected(thin, 30, 2.0).has_value());
}

TEST_CASE("spike redistribution")
{
    const auto records = group_of(11, 49, [](long p) { return p == 30 ? 50L : 10L; });
    const DeheapResult res = deheap(records, 2.0, 7);
    const auto c = partner_counts(res.records);
    for (long p = 28; p <= 32; ++p) CHECK(c.at(p) == 18);
    CHECK(c.at(27) == 10);
    CHECK(c.at(33) == 10);
    CHECK(res.records.size() == records.size());
    CHECK(res.report.total_moved == 32);
    REQUIRE(res.report.groups.size() == 1);
    const auto& g = res.report.groups.front();
    const auto it = std::find_if(g.heaped.begin(), g.heaped.end(), [](const auto& h) { return h.partner_age == 30; });
    REQUIRE(it != g.heaped.end());
    CHECK(it->expected == Approx(10.0));
    CHECK(it->excess == Approx(40.0));
    for (int i : {0, 1, 3, 4}) {
        CHECK(it->shares[i] == Approx(0.2));
        CHECK(it->moved[i] == 8);
    }
    CHECK(it->moved[2] == 0);
}

TEST_CASE("fractional moves are floored")
{
    const auto nine = partner_counts(deheap(group_of(11, 49, [](long p) { return p == 30 ? 19L : 10L; })).records);
    CHECK(nine.at(28) == 11);
    CHECK(nine.at(32) == 11);
    CHECK(nine.at(30) == 15);
    const auto ten = partner_counts(deheap(group_of(11, 49, [](long p) { return p == 30 ? 20L : 10L; })).records);
    for (long p = 28; p <= 32; ++p) CHECK(ten.at(p) == 12);
}

TEST_CASE("unheaped input is unchanged")
{
    const auto records = group_of(11, 49, [](long) { return 10L; });
    const DeheapResult res = deheap(records);
    CHECK(res.records == records);
    CHECK(res.report.total_moved == 0);
}

TEST_CASE("heaping index")
{
    CHECK(heaping_index(group_of(31, 40, [](long) { return 3L; })) == Approx(0.0));
    CHECK(heaping_index(group_of(30, 30, [](long) { return 7L; })) == Approx(1.0));
    // 2 of 5 records heaped.
    const std::vector<PartnershipRecord> forty{
        {30, Sex::Male, 30}, {30, Sex::Male, 35}, {30, Sex::Male, 31}, {30, Sex::Male, 32}, {30, Sex::Male, 33}};
    CHECK(heaping_index(forty) == Approx(0.25));
}

TEST_CASE("deheaping heaped synthetic data")
{
    GeneratorConfig cfg = testing::default_truth(20000, 17);
    cfg.heaping_intensity = 0.3;
    const auto records = simulate(cfg);
    const DeheapResult once = deheap(records, 2.0, 3);

    CHECK(once.report.index_before == Approx(heaping_index(records)));
    CHECK(once.report.index_after == Approx(heaping_index(once.records)));
    CHECK(once.report.index_after < once.report.index_before);
    CHECK(once.records.size() == records.size());

    // Same respondents in the same order; counts per (sex, age) conserved.
    const auto before = CountGrid::from_records(records);
    const auto after = CountGrid::from_records(once.records);
    CHECK(before.total() == after.total());
    for (std::size_t i = 0; i < records.size(); ++i) {
        CHECK(once.records[i].respondent_age == records[i].respondent_age);
        CHECK(once.records[i].respondent_sex == records[i].respondent_sex);
        if (once.records[i].partner_age != records[i].partner_age) {
            const long a = std::lround(records[i].respondent_age);
            const long from = std::lround(records[i].partner_age);
            const long to = std::lround(once.records[i].partner_age);
            CHECK(is_heaped_age(from, a));
            CHECK_FALSE(is_heaped_age(to, a));
            CHECK(std::abs(to - from) <= 2);
        }
    }

    const DeheapResult twice = deheap(once.records, 2.0, 3);
    CHECK(twice.report.index_after <= once.report.index_after + 1e-12);

    const DeheapResult again = deheap(records, 2.0, 3);
    CHECK(again.records == once.records);

    const nlohmann::json j = once.report;
    CHECK(j.at("heaping_index_before") == Approx(once.report.index_before));
    CHECK(j.at("groups").size() == once.report.groups.size());
}
