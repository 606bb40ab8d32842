#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cctml/dataset.hpp"

namespace cctml {

// name, column kind
#define CCTML_COVARIATES(X)                      \
    X(parInc, continuous)                        \
    X(parIncSq, continuous)                      \
    X(parIncPerChild, continuous)                \
    X(dist2sch, continuous)                      \
    X(dist2city, continuous)                     \
    X(dist2citySq, continuous)                   \
    X(fAge, continuous)                          \
    X(fAgeSq, continuous)                        \
    X(fAgeCube, continuous)                      \
    X(mAge, continuous)                          \
    X(mAgeSq, continuous)                        \
    X(mAgeCube, continuous)                      \
    X(fAgeWed, continuous)                       \
    X(mAgeWed, continuous)                       \
    X(fAgeTimesDist2city, continuous)            \
    X(fAgeTimesDist2sch, continuous)             \
    X(hgcParGe9, binary)                         \
    X(yrAfterWed, continuous)                    \
    X(childNum, continuous)                      \
    X(girlNum, continuous)                       \
    X(childNumLe3, continuous)                   \
    X(childNumLe3Sq, continuous)                 \
    X(childNum35, continuous)                    \
    X(childNum611, continuous)                   \
    X(childNumLe15, continuous)                  \
    X(avgBehindYrs, continuous)                  \
    X(avgBehindGirl, continuous)                 \
    X(avgBehindBoy, continuous)                  \
    X(avgSch615, continuous)                     \
    X(avgSch615Girl, continuous)                 \
    X(avgSch615Boy, continuous)                  \
    X(avgSch615TimesChildNum, continuous)        \
    X(girlNumHgcGeq10, continuous)               \
    X(childNumSecSch, continuous)                \
    X(childNumSecSchTimesDist2sch, continuous)   \
    X(childNum1215NotBehind, continuous)         \
    X(preg, binary)                              \
    X(prePreg, binary)                           \
    X(pregOrPrePreg, binary)                     \
    X(mAgeFirstBirth, continuous)                \
    X(pregFirstYr, binary)                       \
    X(preg2024, binary)                          \
    X(preg2529, binary)                          \
    X(preg3034, binary)                          \
    X(preg3539, binary)                          \
    X(preg4043, binary)                          \
    X(minChildAge, continuous)                   \
    X(girlGt11SecSchRatio, continuous)           \
    X(boyGt11SecSchRatio, continuous)            \
    X(subsidy, continuous)                       \
    X(childAge, continuous)                      \
    X(childAgeSq, continuous)                    \
    X(gender, binary)                            \
    X(age1215, binary)                           \
    X(hgc, continuous)                           \
    X(hgcSq, continuous)                         \
    X(hgcGeq6, binary)                           \
    X(behindYrs, continuous)                     \
    X(everSec, binary)                           \
    X(age815Times0Sch, binary)                   \
    X(ageGe7, binary)                            \
    X(ageGe7TimesGender, binary)

enum class Covariate : std::uint8_t {
#define CCTML_ENUM(name, kind) name,
    CCTML_COVARIATES(CCTML_ENUM)
#undef CCTML_ENUM
};

inline constexpr std::size_t kCovariateCount = 0
#define CCTML_COUNT(name, kind) +1
    CCTML_COVARIATES(CCTML_COUNT)
#undef CCTML_COUNT
    ;

using CovariateVector = std::array<double, kCovariateCount>;

std::string_view to_string(Covariate c);
ColumnKind kind_of(Covariate c);
/// True for covariates that describe one child rather than the household.
bool is_child_level(Covariate c);
/// Throws BindingError naming the first unknown covariate.
std::vector<Covariate> resolve(std::span<const std::string> names);
std::vector<std::string> names_of(std::span<const Covariate> covariates);

/// Feature lists of the four submodels.
const std::vector<Covariate>& attendance_covariates();
const std::vector<Covariate>& income_covariates();
const std::vector<Covariate>& pregnancy_covariates();
const std::vector<Covariate>& failure_covariates();

// ---------------------------------------------------------------------------
// State

struct ChildState {
    std::uint32_t id = 0;  // birth order within the household
    int age = 0;
    Gender gender = Gender::girl;
    int hgc = 0;
    int behind = 0;
    bool ever_sec = false;  // attended a secondary grade at least once
};

struct HouseholdState {
    double id = 0.0;
    bool treated = false;
    int wedding_year = 0;
    int t = 0;  // years since the wedding
    double f_age_wed = 0.0;
    double m_age_wed = 0.0;
    bool hgc_par_ge9 = false;
    double dist2sch = 0.0;
    double dist2city = 0.0;
    double income = 0.0;  // this period, before transfers
    bool pregnant = false;  // this period
    bool pre_preg = false;  // last period
    bool preg_first_yr = false;
    double m_age_first_birth = 0.0;  // 0 until the first pregnancy
    std::uint32_t next_child_id = 0;
    std::vector<ChildState> children;

    int year() const noexcept { return wedding_year + t; }
    double f_age() const noexcept { return f_age_wed + t; }
    double m_age() const noexcept { return m_age_wed + t; }
};

/// Transfer a treated household would receive this year if every child aged
/// 6-15 enrolled in its next grade.
double potential_subsidy(const HouseholdState& state, const SubsidySchedule& schedule);

/// Household covariates from the state. When `subsidy_active`, subsidy is
/// potential_subsidy and parInc includes it; otherwise subsidy is 0. Child
/// slots hold NaN.
CovariateVector household_covariates(const HouseholdState& state, const SubsidySchedule& schedule,
                                     bool subsidy_active);
/// Fills the child slots (and the child-dependent products) for one child.
void fill_child(CovariateVector& v, const ChildState& child);

/// Recomputes every derived covariate (squares, cubes, products, band
/// indicators) from its inputs in place. NaN inputs give NaN.
void apply_derived(CovariateVector& v);

/// Gathers `which` from `v` in order.
std::vector<double> gather(const CovariateVector& v, std::span<const Covariate> which);

/// Adds any derived covariate column that is absent from `data` but whose
/// inputs are present. Returns the names added.
std::vector<std::string> augment(Dataset& data);

}  // namespace cctml
