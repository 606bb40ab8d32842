#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "cctml/error.hpp"
#include "cctml/simulate.hpp"
#include "doctest.h"
#include "sim_fixtures.hpp"

using namespace cctml;
using namespace simfix;

namespace {

std::string id_text(double id) { return std::to_string(static_cast<long long>(id)); }

double cov(const CovariateVector& v, Covariate c) { return v[static_cast<std::size_t>(c)]; }

}  // namespace

TEST_CASE("covariates of a hand-built household") {
    HouseholdState s = couple(1, 1980);
    s.t = 12;
    s.income = 5000;
    s.pregnant = true;
    s.m_age_first_birth = 21;
    s.children = {{0, 11, Gender::girl, 4, 1, false},
                  {1, 13, Gender::boy, 6, 1, true},
                  {2, 2, Gender::boy, 0, 0, false},
                  {3, 4, Gender::girl, 0, 0, false}};
    const auto schedule = SubsidySchedule::progresa();
    // girl: next grade 5 -> 945; boy: next grade 7 (secondary 1) -> 1800
    CHECK(potential_subsidy(s, schedule) == 945 + 1800);

    const auto off = household_covariates(s, schedule, false);
    CHECK(cov(off, Covariate::parInc) == 5000);
    const auto v = household_covariates(s, schedule, true);
    CHECK(cov(v, Covariate::parInc) == 5000 + 2745);
    CHECK(cov(v, Covariate::parIncPerChild) == doctest::Approx(7745.0 / 4));
    CHECK(cov(v, Covariate::fAge) == 36);
    CHECK(cov(v, Covariate::mAgeSq) == 32 * 32);
    CHECK(cov(v, Covariate::childNum) == 4);
    CHECK(cov(v, Covariate::girlNum) == 2);
    CHECK(cov(v, Covariate::childNumLe3) == 1);
    CHECK(cov(v, Covariate::childNum35) == 1);
    CHECK(cov(v, Covariate::childNum611) == 1);
    CHECK(cov(v, Covariate::avgBehindYrs) == 1);
    CHECK(cov(v, Covariate::avgSch615) == 5);
    CHECK(cov(v, Covariate::avgSch615Boy) == 6);
    CHECK(cov(v, Covariate::avgSch615TimesChildNum) == 20);
    CHECK(cov(v, Covariate::minChildAge) == 2);
    CHECK(cov(v, Covariate::boyGt11SecSchRatio) == 1);
    CHECK(cov(v, Covariate::girlGt11SecSchRatio) == 0);
    CHECK(cov(v, Covariate::childNum1215NotBehind) == 0);
    CHECK(cov(v, Covariate::preg3034) == 1);
    CHECK(cov(v, Covariate::preg2529) == 0);
    CHECK(cov(v, Covariate::pregOrPrePreg) == 1);
    CHECK(std::isnan(cov(v, Covariate::childAge)));

    auto child = v;
    fill_child(child, s.children[1]);
    CHECK(cov(child, Covariate::age1215) == 1);
    CHECK(cov(child, Covariate::hgcGeq6) == 1);
    CHECK(cov(child, Covariate::ageGe7TimesGender) == 1);
    CHECK(cov(child, Covariate::age815Times0Sch) == 0);
    CHECK(cov(child, Covariate::hgcSq) == 36);

    const HouseholdState empty = couple(2, 1990);
    const auto e = household_covariates(empty, schedule, true);
    CHECK(cov(e, Covariate::minChildAge) == 0);
    CHECK(cov(e, Covariate::mAgeFirstBirth) == 0);
    CHECK(cov(e, Covariate::parIncPerChild) == 0);
}

TEST_CASE("covariate names resolve and derived columns can be added to a dataset") {
    const std::vector<std::string> names = {"parInc", "behindYrs"};
    CHECK(resolve(names) == std::vector<Covariate>{Covariate::parInc, Covariate::behindYrs});
    const std::vector<std::string> bad = {"parInc", "shoeSize"};
    CHECK_THROWS_WITH_AS(resolve(bad), doctest::Contains("shoeSize"), BindingError);
    for (auto c : attendance_covariates()) CHECK(resolve(std::vector<std::string>{std::string(to_string(c))})[0] == c);
    CHECK(attendance_covariates().size() == 43);

    std::istringstream schema("fAge continuous feature\nchildAge continuous feature\nhgc continuous feature\n");
    Dataset d(parse_schema(schema));
    d.append_row(std::vector<double>{40, 9, 0});
    d.append_row(std::vector<double>{33, NAN, 2});
    const auto added = augment(d);
    CHECK(std::find(added.begin(), added.end(), "fAgeSq") != added.end());
    CHECK(std::find(added.begin(), added.end(), "parIncSq") == added.end());
    CHECK(d.at(0, "fAgeCube") == 64000);
    CHECK(d.at(0, "age815Times0Sch") == 1);
    CHECK(std::isnan(d.at(1, "ageGe7")));
    CHECK(d.at(1, "hgcSq") == 4);
    CHECK(augment(d).empty());
}

TEST_CASE("childless household without pregnancies only draws income") {
    auto c = stub_config(constant_submodel("pregnancy", 0.0), 1.0, 0.0);
    std::size_t periods = 0;
    const auto end = simulate_household(couple(3, 1990), c, 1999, [&](const PeriodRecord& r) {
        ++periods;
        CHECK(r.state.income == 1000.0);
        CHECK(r.children.empty());
        CHECK_FALSE(r.state.pregnant);
    });
    CHECK(periods == 10);
    CHECK(end.children.empty());
    CHECK(end.t == 10);
}

TEST_CASE("hand-traced ten-year trajectory with deterministic stubs") {
    const std::string& expected = kHandTraced;
    for (auto mode : {Realization::expected, Realization::stochastic}) {
        auto c = stub_config(first_year_pregnancy(), 1.0, 0.0);
        c.mode = mode;
        CHECK(trajectory(couple(7, 1980), c, 1989) == expected);
        const auto end = simulate_household(couple(7, 1980), c, 1989);
        REQUIRE(end.children.size() == 1);
        CHECK(end.children[0].gender == Gender::boy);
        CHECK(end.children[0].age == 8);
        CHECK(end.children[0].hgc == 2);
        CHECK(end.children[0].behind == 0);
        CHECK(end.m_age_first_birth == 21);
        CHECK_FALSE(end.preg_first_yr);
    }
}

TEST_CASE("never attending leaves every year behind") {
    auto c = stub_config(first_year_pregnancy(), 0.0, 0.0);
    const auto end = simulate_household(couple(8, 1980), c, 1995);
    REQUIRE(end.children.size() == 1);
    CHECK(end.children[0].age == 14);
    CHECK(end.children[0].hgc == 0);
    CHECK(end.children[0].behind == 8);
}

TEST_CASE("boy ratio one gives only boys") {
    auto c = stub_config(constant_submodel("pregnancy", 0.6), 1.0, 0.0);
    for (double id = 0; id < 20; ++id) {
        const auto end = simulate_household(couple(id, 1985), c, 1998);
        for (const auto& child : end.children) CHECK(child.gender == Gender::boy);
    }
    c.boy_ratio = 0.0;
    const auto end = simulate_household(couple(1, 1985), c, 1998);
    CHECK_FALSE(end.children.empty());
    for (const auto& child : end.children) CHECK(child.gender == Gender::girl);
}

TEST_CASE("each child-year increments exactly one of hgc and behindYrs") {
    auto c = stub_config(constant_submodel("pregnancy", 0.3), 0.8, 0.2);
    c.boy_ratio = 0.5;
    std::size_t checked = 0;
    for (double id = 0; id < 60; ++id) {
        std::map<std::uint32_t, ChildState> last;
        simulate_household(couple(id, 1970), c, 1998, [&](const PeriodRecord& r) {
            for (const auto& o : r.children) {
                const auto& ch = o.child;
                CHECK(ch.behind >= 0);
                if (ch.age >= 6) {
                    CHECK(ch.hgc + ch.behind + 6 == ch.age);
                    CHECK(ch.hgc <= ch.age - 5);
                }
                if (auto it = last.find(ch.id); it != last.end() && it->second.age >= 6) {
                    const int dh = ch.hgc - it->second.hgc, db = ch.behind - it->second.behind;
                    CHECK(dh + db == 1);
                    CHECK(dh * db == 0);
                    ++checked;
                }
                last[ch.id] = ch;
            }
        });
    }
    CHECK(checked > 1000);
}

TEST_CASE("untreated trajectories ignore the subsidy schedule") {
    Submodel attend;
    attend.name = "attendance";
    attend.inputs = {Covariate::parInc};
    attend.score = [](std::span<const double> x) { return x[0] > 1000.0 ? 0.95 : 0.5; };
    attend.label = [](std::span<const double> x) { return x[0] > 1000.0 ? 1.0 : 0.0; };
    auto c = stub_config(constant_submodel("pregnancy", 0.3), 0.0, 0.1);
    c.bindings.attendance = attend;
    c.boy_ratio = 0.5;
    auto rich = c;
    rich.schedule = SubsidySchedule({{{SchoolLevel::primary, 1}, {5000, 5000}},
                                     {{SchoolLevel::primary, 2}, {5000, 5000}},
                                     {{SchoolLevel::primary, 3}, {5000, 5000}}});
    for (double id = 0; id < 10; ++id) {
        CHECK(trajectory(couple(id, 1975), c, 2005) == trajectory(couple(id, 1975), rich, 2005));
    }
    bool differs = false;
    for (double id = 0; id < 10; ++id)
        differs |= trajectory(couple(id, 1975, true), c, 2005) != trajectory(couple(id, 1975, true), rich, 2005);
    CHECK(differs);
}

TEST_CASE("household order does not change any trajectory") {
    auto c = stub_config(constant_submodel("pregnancy", 0.3), 0.8, 0.2);
    c.boy_ratio = 0.5;
    std::vector<HouseholdState> hs;
    for (double id = 0; id < 30; ++id) hs.push_back(couple(id, 1970 + int(id) % 20));
    auto reversed = hs;
    std::reverse(reversed.begin(), reversed.end());
    const auto a = simulate_cohort(hs, c, 1997);
    const auto b = simulate_cohort(reversed, c, 1997);
    REQUIRE(a.at_report.size() == b.at_report.size());
    std::map<double, std::string> ta, tb;
    for (const auto& h : hs) ta[h.id] = trajectory(h, c, 1997);
    for (const auto& h : reversed) tb[h.id] = trajectory(h, c, 1997);
    CHECK(ta == tb);
    CHECK(a.skipped == 0);
}

TEST_CASE("cohort runs are deterministic and one household reports only its children") {
    auto c = stub_config(constant_submodel("pregnancy", 0.3), 0.8, 0.2);
    c.boy_ratio = 0.5;
    const std::vector<HouseholdState> one = {couple(5, 1975)};
    const auto run = simulate_cohort(one, c, 1997);
    REQUIRE(run.at_report.size() == 1);
    CHECK(run.at_report[0].state.year() == 1997);
    std::size_t eligible = 0;
    for (const auto& o : run.at_report[0].children) eligible += o.eligible;

    std::istringstream schema(
        "childAge continuous feature\ngender binary feature\nbehindYrs continuous feature\n"
        "hgc continuous feature\nattend binary target\nfail binary target\n");
    Dataset none(parse_schema(schema));
    const auto rep = attendance_report(none, run.at_report, "one");
    std::size_t counted = 0;
    for (std::size_t i = 0; i < 8; i += 2) counted += rep.rows[i].n_predicted + rep.rows[i + 1].n_predicted;
    // the overlapping 12-15 bands are counted once through the first two
    CHECK(rep.rows[0].n_predicted + rep.rows[1].n_predicted + rep.rows[2].n_predicted + rep.rows[3].n_predicted ==
          eligible);
    CHECK(counted >= eligible);

    const auto again = simulate_cohort(one, c, 1997);
    CHECK(trajectory(one[0], c, 1997) == trajectory(one[0], c, 1997));
    CHECK(again.at_report[0].state.income == run.at_report[0].state.income);
    c.seed = 43;
    bool differs = false;
    for (double id = 0; id < 10; ++id) {
        auto d = c;
        d.seed = 42;
        differs |= trajectory(couple(id, 1975), c, 1997) != trajectory(couple(id, 1975), d, 1997);
    }
    CHECK(differs);
}

TEST_CASE("binding errors name the submodel or covariate") {
    SimConfig c = stub_config(first_year_pregnancy(), 1.0, 0.0);
    c.bindings.failure = {};
    CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("failure"), BindingError);

    c = stub_config(first_year_pregnancy(), 1.0, 0.0);
    c.bindings.income.inputs = {Covariate::childAge};
    CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("childAge"), BindingError);
    // bypassing validation aborts the household with the same message
    const std::vector<HouseholdState> hs = {couple(1, 1990), couple(2, 1990)};
    CHECK_THROWS_AS(simulate_household(hs[0], c, 1995), BindingError);

    c = stub_config(first_year_pregnancy(), 1.0, 0.0);
    c.boy_ratio = 1.5;
    CHECK_THROWS_AS(c.validate(), ContractError);
    CHECK_THROWS_AS(bind_model("income", nullptr), BindingError);
}

TEST_CASE("pregnancy rates by mother's age") {
    std::istringstream schema("mAge continuous feature\npreg binary target\n");
    Dataset actual(parse_schema(schema));
    for (int i = 0; i < 250; ++i) actual.append_row(std::vector<double>{22, i < 48 ? 1.0 : 0.0});
    for (int i = 0; i < 10; ++i) actual.append_row(std::vector<double>{50, 1.0});
    std::vector<PeriodRecord> sim(250);
    for (int i = 0; i < 250; ++i) {
        sim[i].state = couple(i, 1990);
        sim[i].state.m_age_wed = 22;
        sim[i].state.pregnant = i < 53;
    }
    const auto rep = pregnancy_rate_report(actual, sim, "control 1997");
    REQUIRE(rep.bands.size() == 4);
    CHECK(rep.bands[0].band == "20-24");
    CHECK(format_fixed(rep.bands[0].actual, 1) == "19.2");
    CHECK(format_fixed(rep.bands[0].predicted, 1) == "21.2");
    CHECK(format_fixed(rep.bands[0].error, 1) == "2.0");
    CHECK(std::isnan(rep.bands[1].actual));
    std::ostringstream md;
    const PregnancyReport reps[] = {rep};
    write_pregnancy_markdown(md, "Pregnancy", reps);
    CHECK(md.str().find("| control 1997 | 25-29 |  |  |  |") != std::string::npos);

    auto c = stub_config(constant_submodel("pregnancy", 0.0), 1.0, 0.0);
    std::vector<HouseholdState> hs;
    for (double id = 0; id < 20; ++id) hs.push_back(couple(id, 1985));
    const auto run = simulate_cohort(hs, c, 1997);
    const auto zero = pregnancy_rate_report(actual, run.at_report, "stub");
    for (const auto& b : zero.bands)
        if (b.n_predicted) CHECK(b.predicted == 0.0);
}

TEST_CASE("trajectory rates agree with the pregnancy report") {
    auto c = stub_config(constant_submodel("pregnancy", 0.25), 0.8, 0.2);
    c.boy_ratio = 0.5;
    std::vector<HouseholdState> hs;
    for (double id = 0; id < 400; ++id) hs.push_back(couple(id, 1970 + int(id) % 25));
    std::ostringstream out;
    TrajectoryWriter writer(out);
    const auto run = simulate_cohort(hs, c, 1997, [&](const PeriodRecord& r) { writer(r); });
    // recount the 1997 rows: one pregnancy flag per household
    std::istringstream in(out.str());
    std::string line;
    std::getline(in, line);
    std::map<std::string, int> preg;
    while (std::getline(in, line)) {
        std::vector<std::string> f;
        std::stringstream ls(line);
        for (std::string cell; std::getline(ls, cell, ',');) f.push_back(cell);
        if (f[1] == "1997") preg[f[0]] = std::stoi(f[3]);
    }
    double p = 0;
    std::size_t n = 0;
    for (const auto& rec : run.at_report) {
        const double m = rec.state.m_age();
        if (m < 20 || m > 24) continue;
        p += preg[id_text(rec.state.id)];
        ++n;
    }
    std::istringstream schema("mAge continuous feature\npreg binary target\n");
    Dataset none(parse_schema(schema));
    const auto rep = pregnancy_rate_report(none, run.at_report, "x");
    REQUIRE(n > 0);
    CHECK(std::abs(rep.bands[0].predicted - 100.0 * p / double(n)) < 0.05);
}
