#include "agemix/data_io.hpp"
#include "agemix/deheap.hpp"
#include "support.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

#include <cmath>
#include <filesystem>
#include <sstream>

using namespace agemix;

namespace {
constexpr const char* kHeader = "respondent_age,respondent_sex,partner_age\n";

LoadResult parse(const std::string& text, LoadMode mode = LoadMode::Strict)
{
    std::istringstream in(text);
    return parse_csv(in, mode);
}
}  // namespace

TEST_CASE("parsing rows")
{
    const auto r = parse(std::string(kHeader) + "30,1,41\n");
    REQUIRE(r.records.size() == 1);
    CHECK(r.records[0] == PartnershipRecord{30, Sex::Female, 41});

    const auto three = parse(std::string("# comment\n") + kHeader + "20,0,19\n\n45.5,1,50\n30,0,28.25\n");
    REQUIRE(three.records.size() == 3);
    CHECK(three.records[0].respondent_age == 20);
    CHECK(three.records[1].respondent_age == 45.5);
    CHECK(three.records[2].partner_age == 28.25);
}

TEST_CASE("invalid rows")
{
    CHECK_THROWS_AS(parse(std::string(kHeader) + "70,0,41\n"), RecordError);
    CHECK_THROWS_AS(parse(std::string(kHeader) + "30,2,41\n"), RecordError);
    CHECK_THROWS_AS(parse(std::string(kHeader) + "30,1\n"), RecordError);
    CHECK_THROWS_AS(parse(std::string(kHeader) + "30,1,abc\n"), RecordError);
    CHECK_THROWS_AS(parse(std::string(kHeader) + "30,1,150\n"), RecordError);
    CHECK_THROWS_AS(parse("age,sex,partner\n30,1,41\n"), RecordError);
    CHECK_THROWS_AS(parse(""), RecordError);
    try {
        parse(std::string(kHeader) + "30,1,41\n70,0,41\n");
        FAIL("expected an error");
    } catch (const RecordError& e) {
        CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }
}

TEST_CASE("lenient mode collects errors")
{
    const auto r = parse(std::string(kHeader) + "30,1,41\n70,0,41\n25,0,x\n40,0,38\n", LoadMode::Lenient);
    CHECK(r.records.size() == 2);
    REQUIRE(r.errors.size() == 2);
    CHECK(r.errors[0].line == 3);
    CHECK(r.errors[1].line == 4);
}

TEST_CASE("save then load is the identity")
{
    const auto records = simulate([] {
        auto c = testing::default_truth(500, 3);
        c.integer_ages = false;
        return c;
    }());
    const auto path = std::filesystem::temp_directory_path() / "agemix_roundtrip.csv";
    const std::vector<std::string> preamble{"seed=3"};
    save_csv(path, records, preamble);
    const auto loaded = load_csv(path);
    CHECK(loaded.records == records);
    std::filesystem::remove(path);
    CHECK_THROWS_AS(load_csv(path), RecordError);
}

TEST_CASE("stratification")
{
    const std::vector<PartnershipRecord> r{
        {20, Sex::Male, 20}, {24.9, Sex::Male, 20}, {25, Sex::Male, 20}, {19, Sex::Female, 20}, {50, Sex::Female, 20}};
    CHECK(subset_of(r[0])->bin_label() == "20-24");
    CHECK(subset_of(r[1])->bin_label() == "20-24");
    CHECK(subset_of(r[2])->bin_label() == "25-29");
    CHECK_FALSE(subset_of(r[3]).has_value());
    CHECK_FALSE(subset_of(r[4]).has_value());
    const auto s = stratify(r);
    CHECK(s.size() == 2);
    CHECK(s.at(SubsetKey{Sex::Male, 20}).size() == 2);
    CHECK(SubsetKey{Sex::Female, 45}.label() == "female 45-49");

    const auto full = simulate(testing::default_truth(3000, 4));
    const auto groups = stratify(full);
    CHECK(groups.size() == 12);
    std::size_t in_range = 0, total = 0;
    for (const auto& rec : full) in_range += rec.respondent_age >= 20 && rec.respondent_age < 50;
    for (const auto& [key, rows] : groups) {
        total += rows.size();
        for (const auto& rec : rows) CHECK(subset_of(rec) == key);
    }
    CHECK(total == in_range);
}

TEST_CASE("simulation")
{
    const auto a = simulate(testing::default_truth(1000, 9));
    const auto b = simulate(testing::default_truth(1000, 9));
    CHECK(a.size() == 1000);
    CHECK(a == b);
    CHECK(a != simulate(testing::default_truth(1000, 10)));
    for (const auto& r : a) {
        CHECK_NOTHROW(validate(r));
        CHECK(r.partner_age == std::round(r.partner_age));
    }

    GeneratorConfig heaped = testing::default_truth(2000, 9);
    heaped.heaping_intensity = 1.0;
    for (const auto& r : simulate(heaped)) {
        CHECK(is_heaped_age(std::lround(r.partner_age), std::lround(r.respondent_age)));
    }
    GeneratorConfig clean = testing::default_truth(100000, 9);
    CHECK(heaping_index(simulate(clean)) < 0.02);

    GeneratorConfig bad = testing::default_truth(10, 1);
    bad.coefficients[0].pop_back();
    CHECK_THROWS_AS(simulate(bad), std::invalid_argument);
}

TEST_CASE("conventional normal truth mean")
{
    GeneratorConfig c;
    c.n = 100000;
    c.seed = 5;
    c.family = Family::Normal;
    c.transform = TransformKind::LinearAge;
    c.spec.tag = ModelTag::Conventional;
    c.age_min = c.age_max = 30;
    c.female_fraction = 1.0;
    c.integer_ages = false;
    c.coefficients = {std::vector<double>{2, 0, 1.05, -0.1}, {std::log(3.0)}, {}, {}};
    const auto rows = simulate(c);
    double sum = 0.0;
    for (const auto& r : rows) sum += r.partner_age;
    CHECK(std::abs(sum / static_cast<double>(rows.size()) - 30.5) < 0.1);
}

TEST_CASE("generator config json")
{
    const GeneratorConfig c = testing::default_truth(123, 77);
    const nlohmann::json j = c;
    const GeneratorConfig back = j.get<GeneratorConfig>();
    CHECK(back.n == 123);
    CHECK(back.seed == 77);
    CHECK(back.spec.tag == ModelTag::Distributional2);
    CHECK(back.coefficients == c.coefficients);
    CHECK(simulate(back) == simulate(c));

    const auto shipped = load_generator_config(std::filesystem::path(AGEMIX_SOURCE_DIR) / "config/default_generator.json");
    CHECK(shipped.family == Family::SinhArcsinh);
    CHECK(shipped.spec.tag == ModelTag::Distributional2);
    CHECK_NOTHROW(simulate([&] {
        auto s = shipped;
        s.n = 100;
        return s;
    }()));
}
