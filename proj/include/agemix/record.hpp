#pragma once

#include <string>

namespace agemix {

/// Respondent sex; the numeric coding (1 = female) is the one used in design rows.
enum class Sex : int { Male = 0, Female = 1 };

inline double indicator(Sex s) { return s == Sex::Female ? 1.0 : 0.0; }
inline const char* to_string(Sex s) { return s == Sex::Female ? "female" : "male"; }

/// One reported partnership.
struct PartnershipRecord {
    double respondent_age = 0.0;
    Sex respondent_sex = Sex::Male;
    double partner_age = 0.0;

    friend bool operator==(const PartnershipRecord&, const PartnershipRecord&) = default;
};

inline std::string describe(const PartnershipRecord& r)
{
    return "(respondent_age=" + std::to_string(r.respondent_age) + ", sex=" + to_string(r.respondent_sex) +
           ", partner_age=" + std::to_string(r.partner_age) + ")";
}

}  // namespace agemix
