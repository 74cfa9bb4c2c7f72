#pragma once

#include "agemix/design.hpp"
#include "agemix/distributions.hpp"
#include "agemix/record.hpp"
#include "agemix/transforms.hpp"

#include <nlohmann/json_fwd.hpp>

#include <array>
#include <compare>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace agemix {

class RecordError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr double kMinRespondentAge = 15.0;
inline constexpr double kMaxRespondentAge = 64.0;
inline constexpr double kMaxPartnerAge = 150.0;

/// Throws RecordError unless respondent age is in [15, 64] and partner age in (0, 150).
void validate(const PartnershipRecord& record);

struct RowError {
    std::size_t line = 0;
    std::string message;
};

enum class LoadMode { Strict, Lenient };

struct LoadResult {
    std::vector<PartnershipRecord> records;
    std::vector<RowError> errors;
};

/// Header `respondent_age,respondent_sex,partner_age` is mandatory; lines
/// starting with '#' are ignored. Strict mode throws on the first bad row.
LoadResult parse_csv(std::istream& in, LoadMode mode = LoadMode::Strict);
LoadResult load_csv(const std::filesystem::path& path, LoadMode mode = LoadMode::Strict);

/// `preamble` lines are written first, each prefixed with "# ".
std::string to_csv(std::span<const PartnershipRecord> records, std::span<const std::string> preamble = {});
void save_csv(const std::filesystem::path& path, std::span<const PartnershipRecord> records,
              std::span<const std::string> preamble = {});

inline constexpr std::array<int, 6> kAgeBins{20, 25, 30, 35, 40, 45};

/// Sex x five-year respondent-age bin ([lower, lower + 5) by floor of age).
struct SubsetKey {
    Sex sex = Sex::Male;
    int bin_lower = 20;

    std::string bin_label() const;
    std::string label() const;
    auto operator<=>(const SubsetKey&) const = default;
};

std::optional<SubsetKey> subset_of(const PartnershipRecord& record);
/// Nonempty subsets only; records outside [20, 50) belong to none.
std::map<SubsetKey, std::vector<PartnershipRecord>> stratify(std::span<const PartnershipRecord> records);

/// Synthetic data description: the truth model plus respondent marginals.
struct GeneratorConfig {
    std::size_t n = 1000;
    std::uint64_t seed = 1;
    Family family = Family::SinhArcsinh;
    TransformKind transform = TransformKind::LogRatio;
    ModelSpec spec;
    double age_center = 0.0;
    std::array<std::vector<double>, 4> coefficients;  // mu, sigma, epsilon, delta blocks
    int age_min = 15;
    int age_max = 64;
    double female_fraction = 0.5;
    double heaping_intensity = 0.0;
    bool integer_ages = true;
};

void to_json(nlohmann::json& j, const GeneratorConfig& config);
void from_json(const nlohmann::json& j, GeneratorConfig& config);
GeneratorConfig load_generator_config(const std::filesystem::path& path);

/// Draws respondents, samples outcomes from the truth model, maps them back
/// to partner ages and optionally heaps (p - a) to the nearest multiple of five.
std::vector<PartnershipRecord> simulate(const GeneratorConfig& config);

}  // namespace agemix
