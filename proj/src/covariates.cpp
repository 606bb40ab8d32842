#include "cctml/covariates.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cctml/error.hpp"

namespace cctml {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

constexpr std::array<std::string_view, kCovariateCount> kNames = {
#define CCTML_NAME(name, kind) #name,
    CCTML_COVARIATES(CCTML_NAME)
#undef CCTML_NAME
};

constexpr std::array<ColumnKind, kCovariateCount> kKinds = {
#define CCTML_KIND(name, kind) ColumnKind::kind,
    CCTML_COVARIATES(CCTML_KIND)
#undef CCTML_KIND
};

using C = Covariate;

double& at(CovariateVector& v, Covariate c) { return v[static_cast<std::size_t>(c)]; }
double at(const CovariateVector& v, Covariate c) { return v[static_cast<std::size_t>(c)]; }

double flag(bool b) { return b ? 1.0 : 0.0; }

// NaN-propagating indicator
double indicator(double x, bool b) { return std::isnan(x) ? kNaN : flag(b); }

struct Derived {
    Covariate out;
    std::vector<Covariate> inputs;
    double (*formula)(const CovariateVector&);
};

double band(const CovariateVector& v, double lo, double hi) {
    const double p = at(v, C::preg), m = at(v, C::mAge);
    if (std::isnan(p) || std::isnan(m)) return kNaN;
    return flag(p > 0.5 && m >= lo && m <= hi);
}

const std::vector<Derived>& derived_table() {
    static const std::vector<Derived> table = {
        {C::parIncSq, {C::parInc}, [](const CovariateVector& v) { return at(v, C::parInc) * at(v, C::parInc); }},
        {C::parIncPerChild, {C::parInc, C::childNumLe15},
         [](const CovariateVector& v) { return at(v, C::parInc) / std::max(1.0, at(v, C::childNumLe15)); }},
        {C::dist2citySq, {C::dist2city},
         [](const CovariateVector& v) { return at(v, C::dist2city) * at(v, C::dist2city); }},
        {C::fAgeSq, {C::fAge}, [](const CovariateVector& v) { return std::pow(at(v, C::fAge), 2); }},
        {C::fAgeCube, {C::fAge}, [](const CovariateVector& v) { return std::pow(at(v, C::fAge), 3); }},
        {C::mAgeSq, {C::mAge}, [](const CovariateVector& v) { return std::pow(at(v, C::mAge), 2); }},
        {C::mAgeCube, {C::mAge}, [](const CovariateVector& v) { return std::pow(at(v, C::mAge), 3); }},
        {C::fAgeTimesDist2city, {C::fAge, C::dist2city},
         [](const CovariateVector& v) { return at(v, C::fAge) * at(v, C::dist2city); }},
        {C::fAgeTimesDist2sch, {C::fAge, C::dist2sch},
         [](const CovariateVector& v) { return at(v, C::fAge) * at(v, C::dist2sch); }},
        {C::childNumLe3Sq, {C::childNumLe3},
         [](const CovariateVector& v) { return at(v, C::childNumLe3) * at(v, C::childNumLe3); }},
        {C::avgSch615TimesChildNum, {C::avgSch615, C::childNum},
         [](const CovariateVector& v) { return at(v, C::avgSch615) * at(v, C::childNum); }},
        {C::childNumSecSchTimesDist2sch, {C::childNumSecSch, C::dist2sch},
         [](const CovariateVector& v) { return at(v, C::childNumSecSch) * at(v, C::dist2sch); }},
        {C::pregOrPrePreg, {C::preg, C::prePreg},
         [](const CovariateVector& v) {
             const double a = at(v, C::preg), b = at(v, C::prePreg);
             return std::isnan(a) || std::isnan(b) ? kNaN : flag(a > 0.5 || b > 0.5);
         }},
        {C::preg2024, {C::preg, C::mAge}, [](const CovariateVector& v) { return band(v, 20, 24); }},
        {C::preg2529, {C::preg, C::mAge}, [](const CovariateVector& v) { return band(v, 25, 29); }},
        {C::preg3034, {C::preg, C::mAge}, [](const CovariateVector& v) { return band(v, 30, 34); }},
        {C::preg3539, {C::preg, C::mAge}, [](const CovariateVector& v) { return band(v, 35, 39); }},
        {C::preg4043, {C::preg, C::mAge}, [](const CovariateVector& v) { return band(v, 40, 43); }},
        {C::childAgeSq, {C::childAge}, [](const CovariateVector& v) { return std::pow(at(v, C::childAge), 2); }},
        {C::age1215, {C::childAge},
         [](const CovariateVector& v) {
             const double a = at(v, C::childAge);
             return indicator(a, a >= 12 && a <= 15);
         }},
        {C::hgcSq, {C::hgc}, [](const CovariateVector& v) { return std::pow(at(v, C::hgc), 2); }},
        {C::hgcGeq6, {C::hgc}, [](const CovariateVector& v) { return indicator(at(v, C::hgc), at(v, C::hgc) >= 6); }},
        {C::age815Times0Sch, {C::childAge, C::hgc},
         [](const CovariateVector& v) {
             const double a = at(v, C::childAge), h = at(v, C::hgc);
             return std::isnan(h) ? kNaN : indicator(a, a >= 8 && a <= 15 && h == 0);
         }},
        {C::ageGe7, {C::childAge}, [](const CovariateVector& v) { return indicator(at(v, C::childAge), at(v, C::childAge) >= 7); }},
        {C::ageGe7TimesGender, {C::childAge, C::gender},
         [](const CovariateVector& v) {
             const double a = at(v, C::childAge), g = at(v, C::gender);
             return std::isnan(g) ? kNaN : indicator(a, a >= 7 && g > 0.5);
         }},
    };
    return table;
}

}  // namespace

std::string_view to_string(Covariate c) { return kNames[static_cast<std::size_t>(c)]; }

ColumnKind kind_of(Covariate c) { return kKinds[static_cast<std::size_t>(c)]; }

bool is_child_level(Covariate c) { return c >= C::childAge; }

std::vector<Covariate> resolve(std::span<const std::string> names) {
    std::vector<Covariate> out;
    for (const auto& n : names) {
        const auto it = std::find(kNames.begin(), kNames.end(), n);
        if (it == kNames.end()) throw BindingError("unknown covariate '" + n + "'");
        out.push_back(static_cast<Covariate>(it - kNames.begin()));
    }
    return out;
}

std::vector<std::string> names_of(std::span<const Covariate> covariates) {
    std::vector<std::string> out;
    for (auto c : covariates) out.emplace_back(to_string(c));
    return out;
}

const std::vector<Covariate>& attendance_covariates() {
    static const std::vector<Covariate> list = {
        C::parInc, C::parIncPerChild, C::dist2sch, C::dist2city, C::fAge, C::mAge, C::fAgeWed, C::mAgeWed,
        C::childNum, C::girlNum, C::childNumLe3, C::childNumLe3Sq, C::childNum35, C::childNum611,
        C::childNumLe15, C::avgBehindYrs, C::avgBehindGirl, C::avgBehindBoy, C::avgSch615, C::avgSch615Girl,
        C::avgSch615Boy, C::avgSch615TimesChildNum, C::girlNumHgcGeq10, C::childNumSecSch,
        C::childNumSecSchTimesDist2sch, C::childNum1215NotBehind, C::preg, C::pregOrPrePreg, C::mAgeFirstBirth,
        C::pregFirstYr, C::preg2024, C::preg2529, C::preg3034, C::preg3539, C::preg4043, C::minChildAge,
        C::girlGt11SecSchRatio, C::boyGt11SecSchRatio, C::childAge, C::gender, C::age1215, C::hgcGeq6,
        C::behindYrs};
    return list;
}

const std::vector<Covariate>& income_covariates() {
    static const std::vector<Covariate> list = {C::fAge,      C::fAgeSq,  C::dist2sch,           C::dist2city,
                                                C::dist2citySq, C::fAgeWed, C::mAgeWed,          C::fAgeTimesDist2city,
                                                C::hgcParGe9, C::fAgeTimesDist2sch};
    return list;
}

const std::vector<Covariate>& pregnancy_covariates() {
    static const std::vector<Covariate> list = {
        C::parInc,   C::parIncSq,    C::mAge,     C::mAgeSq,    C::mAgeCube,    C::fAge,     C::fAgeSq,
        C::fAgeCube, C::fAgeWed,     C::mAgeWed,  C::prePreg,   C::minChildAge, C::dist2sch, C::dist2city,
        C::childNum, C::childNumLe3, C::childNum35, C::childNum611, C::parIncPerChild, C::yrAfterWed};
    return list;
}

const std::vector<Covariate>& failure_covariates() {
    static const std::vector<Covariate> list = {C::hgc,      C::hgcSq,     C::childAge,  C::childAgeSq, C::gender,
                                                C::parInc,   C::parIncSq,  C::dist2city, C::dist2sch,   C::hgcParGe9,
                                                C::age815Times0Sch, C::ageGe7, C::ageGe7TimesGender};
    return list;
}

double potential_subsidy(const HouseholdState& state, const SubsidySchedule& schedule) {
    double total = 0.0;
    for (const auto& c : state.children) {
        if (c.age < 6 || c.age > 15) continue;
        const auto pay = schedule.lookup_overall(c.hgc + 1, c.gender);
        if (pay.in_domain) total += pay.pesos;
    }
    return total;
}

CovariateVector household_covariates(const HouseholdState& s, const SubsidySchedule& schedule, bool subsidy_active) {
    CovariateVector v;
    v.fill(kNaN);
    at(v, C::subsidy) = subsidy_active ? potential_subsidy(s, schedule) : 0.0;
    at(v, C::parInc) = s.income + at(v, C::subsidy);
    at(v, C::dist2sch) = s.dist2sch;
    at(v, C::dist2city) = s.dist2city;
    at(v, C::fAge) = s.f_age();
    at(v, C::mAge) = s.m_age();
    at(v, C::fAgeWed) = s.f_age_wed;
    at(v, C::mAgeWed) = s.m_age_wed;
    at(v, C::hgcParGe9) = flag(s.hgc_par_ge9);
    at(v, C::yrAfterWed) = s.t;

    double n = 0, girls = 0, le3 = 0, n35 = 0, n611 = 0, le15 = 0;
    double behind_all = 0, behind_girl = 0, behind_boy = 0, n6 = 0, n6g = 0, n6b = 0;
    double sch = 0, sch_girl = 0, sch_boy = 0, m615 = 0, m615g = 0, m615b = 0;
    double girl_hgc10 = 0, sec = 0, not_behind = 0, min_age = 0;
    double g11 = 0, g11sec = 0, b11 = 0, b11sec = 0;
    for (const auto& c : s.children) {
        const bool girl = c.gender == Gender::girl;
        ++n;
        girls += girl;
        le3 += c.age < 3;
        n35 += c.age >= 3 && c.age <= 5;
        n611 += c.age >= 6 && c.age <= 11;
        le15 += c.age <= 15;
        if (c.age >= 6) {
            behind_all += c.behind;
            ++n6;
            if (girl) {
                behind_girl += c.behind;
                ++n6g;
            } else {
                behind_boy += c.behind;
                ++n6b;
            }
        }
        if (c.age >= 6 && c.age <= 15) {
            sch += c.hgc;
            ++m615;
            if (girl) {
                sch_girl += c.hgc;
                ++m615g;
            } else {
                sch_boy += c.hgc;
                ++m615b;
            }
        }
        girl_hgc10 += girl && c.hgc >= 10;
        sec += c.hgc >= 7;
        not_behind += c.age >= 12 && c.age <= 15 && c.behind == 0;
        if (n == 1 || c.age < min_age) min_age = c.age;
        if (c.age > 11) {
            (girl ? g11 : b11) += 1;
            (girl ? g11sec : b11sec) += c.ever_sec;
        }
    }
    const auto mean = [](double sum, double count) { return count > 0 ? sum / count : 0.0; };
    at(v, C::childNum) = n;
    at(v, C::girlNum) = girls;
    at(v, C::childNumLe3) = le3;
    at(v, C::childNum35) = n35;
    at(v, C::childNum611) = n611;
    at(v, C::childNumLe15) = le15;
    at(v, C::avgBehindYrs) = mean(behind_all, n6);
    at(v, C::avgBehindGirl) = mean(behind_girl, n6g);
    at(v, C::avgBehindBoy) = mean(behind_boy, n6b);
    at(v, C::avgSch615) = mean(sch, m615);
    at(v, C::avgSch615Girl) = mean(sch_girl, m615g);
    at(v, C::avgSch615Boy) = mean(sch_boy, m615b);
    at(v, C::girlNumHgcGeq10) = girl_hgc10;
    at(v, C::childNumSecSch) = sec;
    at(v, C::childNum1215NotBehind) = not_behind;
    at(v, C::minChildAge) = min_age;
    at(v, C::girlGt11SecSchRatio) = mean(g11sec, g11);
    at(v, C::boyGt11SecSchRatio) = mean(b11sec, b11);

    at(v, C::preg) = flag(s.pregnant);
    at(v, C::prePreg) = flag(s.pre_preg);
    at(v, C::mAgeFirstBirth) = s.m_age_first_birth;
    at(v, C::pregFirstYr) = flag(s.preg_first_yr);
    apply_derived(v);
    return v;
}

void fill_child(CovariateVector& v, const ChildState& c) {
    at(v, C::childAge) = c.age;
    at(v, C::gender) = flag(c.gender == Gender::boy);
    at(v, C::hgc) = c.hgc;
    at(v, C::behindYrs) = c.behind;
    at(v, C::everSec) = flag(c.ever_sec);
    apply_derived(v);
}

void apply_derived(CovariateVector& v) {
    for (const auto& d : derived_table()) at(v, d.out) = d.formula(v);
}

std::vector<double> gather(const CovariateVector& v, std::span<const Covariate> which) {
    std::vector<double> out;
    out.reserve(which.size());
    for (auto c : which) out.push_back(at(v, c));
    return out;
}

std::vector<std::string> augment(Dataset& data) {
    std::vector<std::string> added;
    for (const auto& d : derived_table()) {
        const auto name = std::string(to_string(d.out));
        if (data.schema().contains(name)) continue;
        const bool ready = std::all_of(d.inputs.begin(), d.inputs.end(),
                                       [&](Covariate c) { return data.schema().contains(to_string(c)); });
        if (!ready) continue;
        std::vector<double> values(data.rows());
        CovariateVector v;
        for (std::size_t r = 0; r < data.rows(); ++r) {
            v.fill(kNaN);
            for (auto c : d.inputs) at(v, c) = data.at(r, to_string(c));
            values[r] = d.formula(v);
        }
        data.add_column({name, kind_of(d.out), ColumnRole::feature, {}}, std::move(values));
        added.push_back(name);
    }
    return added;
}

}  // namespace cctml
