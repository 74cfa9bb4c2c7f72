#include "agemix/data_io.hpp"

#include "agemix/inference.hpp"

#include <nlohmann/json.hpp>

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string_view>

namespace agemix {

namespace {

std::string_view trim(std::string_view s)
{
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split(std::string_view line)
{
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        out.push_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

double parse_number(std::string_view field, const char* column)
{
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (ec != std::errc{} || ptr != field.data() + field.size() || field.empty()) {
        throw RecordError(std::string("cannot parse ") + column + " '" + std::string(field) + "'");
    }
    return v;
}

PartnershipRecord parse_row(std::string_view line)
{
    const auto fields = split(line);
    if (fields.size() != 3) {
        throw RecordError("expected 3 columns, found " + std::to_string(fields.size()));
    }
    PartnershipRecord r;
    r.respondent_age = parse_number(fields[0], "respondent_age");
    const double sex = parse_number(fields[1], "respondent_sex");
    if (sex != 0.0 && sex != 1.0) throw RecordError("respondent_sex must be 0 or 1");
    r.respondent_sex = sex == 1.0 ? Sex::Female : Sex::Male;
    r.partner_age = parse_number(fields[2], "partner_age");
    validate(r);
    return r;
}

std::string format_number(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

void validate(const PartnershipRecord& r)
{
    if (!(r.respondent_age >= kMinRespondentAge && r.respondent_age <= kMaxRespondentAge)) {
        throw RecordError("respondent_age " + format_number(r.respondent_age) + " outside [15, 64]");
    }
    if (!(r.partner_age > 0.0 && r.partner_age < kMaxPartnerAge)) {
        throw RecordError("partner_age " + format_number(r.partner_age) + " outside (0, 150)");
    }
}

LoadResult parse_csv(std::istream& in, LoadMode mode)
{
    LoadResult out;
    std::string line;
    std::size_t line_no = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++line_no;
        const auto t = trim(line);
        if (t.empty() || t.front() == '#') continue;
        if (!header_seen) {
            const auto cols = split(t);
            if (cols.size() != 3 || cols[0] != "respondent_age" || cols[1] != "respondent_sex" ||
                cols[2] != "partner_age") {
                throw RecordError("line " + std::to_string(line_no) +
                                  ": header must be respondent_age,respondent_sex,partner_age");
            }
            header_seen = true;
            continue;
        }
        try {
            out.records.push_back(parse_row(t));
        } catch (const RecordError& e) {
            if (mode == LoadMode::Strict) throw RecordError("line " + std::to_string(line_no) + ": " + e.what());
            out.errors.push_back({line_no, e.what()});
        }
    }
    if (!header_seen) throw RecordError("missing header row");
    return out;
}

LoadResult load_csv(const std::filesystem::path& path, LoadMode mode)
{
    std::ifstream in(path);
    if (!in) throw RecordError("cannot open " + path.string());
    return parse_csv(in, mode);
}

std::string to_csv(std::span<const PartnershipRecord> records, std::span<const std::string> preamble)
{
    std::string out;
    for (const auto& p : preamble) out += "# " + p + "\n";
    out += "respondent_age,respondent_sex,partner_age\n";
    for (const auto& r : records) {
        out += format_number(r.respondent_age) + "," + (r.respondent_sex == Sex::Female ? "1" : "0") + "," +
               format_number(r.partner_age) + "\n";
    }
    return out;
}

void save_csv(const std::filesystem::path& path, std::span<const PartnershipRecord> records,
              std::span<const std::string> preamble)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw RecordError("cannot write " + path.string());
    out << to_csv(records, preamble);
}

std::string SubsetKey::bin_label() const { return std::to_string(bin_lower) + "-" + std::to_string(bin_lower + 4); }

std::string SubsetKey::label() const { return std::string(to_string(sex)) + " " + bin_label(); }

std::optional<SubsetKey> subset_of(const PartnershipRecord& r)
{
    const double a = std::floor(r.respondent_age);
    if (a < 20.0 || a >= 50.0) return std::nullopt;
    const int lower = 20 + 5 * static_cast<int>((a - 20.0) / 5.0);
    return SubsetKey{r.respondent_sex, lower};
}

std::map<SubsetKey, std::vector<PartnershipRecord>> stratify(std::span<const PartnershipRecord> records)
{
    std::map<SubsetKey, std::vector<PartnershipRecord>> out;
    for (const auto& r : records) {
        if (auto key = subset_of(r)) out[*key].push_back(r);
    }
    return out;
}

void to_json(nlohmann::json& j, const GeneratorConfig& c)
{
    nlohmann::json coef = nlohmann::json::object();
    for (Slot s : kSlots) {
        const auto& v = c.coefficients[static_cast<int>(s)];
        if (!v.empty()) coef[std::string(to_string(s))] = v;
    }
    j = nlohmann::json{{"n", c.n},
                       {"seed", c.seed},
                       {"family", to_string(c.family)},
                       {"transform", to_string(c.transform)},
                       {"model", c.spec},
                       {"age_center", c.age_center},
                       {"coefficients", coef},
                       {"age_min", c.age_min},
                       {"age_max", c.age_max},
                       {"female_fraction", c.female_fraction},
                       {"heaping_intensity", c.heaping_intensity},
                       {"integer_ages", c.integer_ages}};
}

void from_json(const nlohmann::json& j, GeneratorConfig& c)
{
    c = GeneratorConfig{};
    c.n = j.at("n").get<std::size_t>();
    c.seed = j.value("seed", c.seed);
    c.family = family_from_string(j.at("family").get<std::string>());
    c.transform = transform_from_string(j.at("transform").get<std::string>());
    c.spec = j.at("model").get<ModelSpec>();
    c.age_center = j.value("age_center", c.age_center);
    const auto& coef = j.at("coefficients");
    for (Slot s : kSlots) {
        const std::string key(to_string(s));
        if (coef.contains(key)) c.coefficients[static_cast<int>(s)] = coef.at(key).get<std::vector<double>>();
    }
    c.age_min = j.value("age_min", c.age_min);
    c.age_max = j.value("age_max", c.age_max);
    c.female_fraction = j.value("female_fraction", c.female_fraction);
    c.heaping_intensity = j.value("heaping_intensity", c.heaping_intensity);
    c.integer_ages = j.value("integer_ages", c.integer_ages);
}

GeneratorConfig load_generator_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open generator config " + path.string());
    return nlohmann::json::parse(in).get<GeneratorConfig>();
}

std::vector<PartnershipRecord> simulate(const GeneratorConfig& c)
{
    if (c.age_min < kMinRespondentAge || c.age_max > kMaxRespondentAge || c.age_min > c.age_max) {
        throw std::invalid_argument("simulate: respondent age range must lie within [15, 64]");
    }
    if (!(c.heaping_intensity >= 0.0 && c.heaping_intensity <= 1.0)) {
        throw std::invalid_argument("simulate: heaping intensity must lie in [0, 1]");
    }
    const Design design(c.spec, c.age_center);
    const int slots = active_slots(c.family);
    std::array<Eigen::VectorXd, 4> beta;
    for (int s = 0; s < kSlotCount; ++s) {
        const auto& v = c.coefficients[s];
        if (s < slots) {
            const auto expected = design.row_length(static_cast<Slot>(s));
            if (static_cast<Eigen::Index>(v.size()) != expected) {
                throw std::invalid_argument("simulate: " + std::string(to_string(static_cast<Slot>(s))) +
                                            " coefficients have length " + std::to_string(v.size()) + ", the " +
                                            std::string(to_string(c.spec.tag)) + " design needs " +
                                            std::to_string(expected));
            }
            beta[s] = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
        } else if (!v.empty()) {
            throw std::invalid_argument("simulate: the family does not use the " +
                                        std::string(to_string(static_cast<Slot>(s))) + " slot");
        }
    }
    const Transform transform = Transform::of(c.transform);

    Rng rng(c.seed);
    std::uniform_int_distribution<int> int_age(c.age_min, c.age_max);
    std::uniform_real_distribution<double> real_age(c.age_min, c.age_max);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    std::vector<PartnershipRecord> out;
    out.reserve(c.n);
    for (std::size_t i = 0; i < c.n; ++i) {
        PartnershipRecord r;
        r.respondent_age = c.integer_ages ? static_cast<double>(int_age(rng)) : real_age(rng);
        r.respondent_sex = unit(rng) < c.female_fraction ? Sex::Female : Sex::Male;
        const DesignRow row = design.row(r.respondent_age, r.respondent_sex);
        LinearPredictors eta{0.0, 0.0, 0.0, 0.0};
        for (int s = 0; s < slots; ++s) eta[s] = row.x[s].dot(beta[s]);
        const Distribution dist = linpred_to_distribution(c.family, eta);

        bool ok = false;
        for (int attempt = 0; attempt < 1000 && !ok; ++attempt) {
            const double y = draw(dist, rng);
            if (c.transform == TransformKind::BetaRescaled && !(y > 0.0 && y < 1.0)) continue;
            double p = inverse(transform, r.respondent_age, r.respondent_sex, y);
            if (c.integer_ages) p = std::round(p);
            ok = p > 0.0 && p < kMaxPartnerAge;
            r.partner_age = p;
        }
        if (!ok) throw std::runtime_error("simulate: truth model rarely produces partner ages in (0, 150)");

        if (c.heaping_intensity > 0.0 && unit(rng) < c.heaping_intensity) {
            const double heaped = r.respondent_age + 5.0 * std::round((r.partner_age - r.respondent_age) / 5.0);
            if (heaped > 0.0 && heaped < kMaxPartnerAge) r.partner_age = heaped;
        }
        out.push_back(r);
    }
    return out;
}

}  // namespace agemix
