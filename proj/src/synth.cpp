#include "cctml/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <ostream>

#include "cctml/error.hpp"
#include "cctml/rng.hpp"

namespace cctml {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr int kFirstYear = 1997;
constexpr int kLastYear = 1998;

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }
double logit(double p) { return std::log(p / (1.0 - p)); }

Submodel index_model(std::string name, std::vector<Covariate> inputs, std::function<double(std::span<const double>)> p) {
    Submodel m;
    m.name = std::move(name);
    m.inputs = std::move(inputs);
    m.score = p;
    m.label = [p](std::span<const double> x) { return p(x) >= 0.5 ? 1.0 : 0.0; };
    return m;
}

// every covariate except the transfer itself, which would reveal treatment
std::vector<Covariate> emitted(bool child_level) {
    std::vector<Covariate> out;
    for (std::size_t i = 0; i < kCovariateCount; ++i) {
        const auto c = static_cast<Covariate>(i);
        if (c == Covariate::subsidy) continue;
        if (!child_level && is_child_level(c)) continue;
        out.push_back(c);
    }
    return out;
}

struct Household {
    HouseholdState initial;
    bool dist2city_missing = false;
    std::vector<PeriodRecord> records;  // 1997 and 1998 (when married by then)

    std::size_t rows(int year) const {
        for (const auto& r : records)
            if (r.state.year() == year) return r.children.size();
        return 0;
    }
};

HouseholdState draw_initial(std::uint64_t id, Rng& r) {
    HouseholdState s;
    s.id = double(id);
    s.wedding_year = 1965 + int(r.below(32));
    s.f_age_wed = 18 + double(r.below(13));
    s.m_age_wed = std::min(s.f_age_wed, 15 + double(r.below(10)));
    s.hgc_par_ge9 = r.bernoulli(0.15);
    s.dist2sch = std::round(-1.5 * std::log(1.0 - r.uniform()) * 100.0) / 100.0;
    s.dist2city = std::round((5.0 + 115.0 * r.uniform()) * 10.0) / 10.0;
    return s;
}

Household simulate_one(HouseholdState initial, bool missing_city, const SimConfig& truth) {
    Household h;
    h.initial = initial;
    h.dist2city_missing = missing_city;
    simulate_household(initial, truth, kLastYear, [&](const PeriodRecord& rec) {
        if (rec.state.year() >= kFirstYear) h.records.push_back(rec);
    });
    return h;
}

struct Panels {
    std::vector<Household> households;
};

Panels build_households(const SynthSpec& spec, const SimConfig& truth) {
    Panels p;
    std::uint64_t next = 0;
    const auto candidate = [&](bool treated, bool draw_group) {
        const auto id = next++;
        Rng r = stream(spec.seed ^ 0x9e3779b97f4a7c15ULL, id);
        auto s = draw_initial(id, r);
        s.treated = draw_group ? r.bernoulli(0.5) : treated;
        const bool missing_city = r.bernoulli(spec.dist2city_missing);
        return simulate_one(s, missing_city, truth);
    };
    if (spec.n_households > 0) {
        for (std::size_t i = 0; i < spec.n_households; ++i) p.households.push_back(candidate(false, true));
        return p;
    }
    const std::uint64_t cap = 50 * (spec.train_rows + spec.test_rows) + 100000;
    // treatment households fill the test rows, then controls fill the rest of training
    std::size_t test_left = spec.test_rows, t97 = 0;
    while (test_left > 0) {
        if (next > cap) throw ContractError("synth: could not meet the test row target");
        auto h = candidate(true, false);
        const auto n98 = h.rows(kLastYear);
        if (n98 == 0 || n98 > test_left) continue;
        test_left -= n98;
        t97 += h.rows(kFirstYear);
        p.households.push_back(std::move(h));
    }
    if (t97 > spec.train_rows) throw ContractError("synth: treatment 1997 rows exceed the training target");
    std::size_t train_left = spec.train_rows - t97;
    while (train_left > 0) {
        if (next > cap) throw ContractError("synth: could not meet the training row target");
        auto h = candidate(false, false);
        const auto n = h.rows(kFirstYear) + h.rows(kLastYear);
        if (n == 0 || n > train_left) continue;
        train_left -= n;
        p.households.push_back(std::move(h));
    }
    return p;
}

struct HouseholdYear {
    std::size_t household;
    std::size_t record;
    std::size_t rows;
};

std::vector<double> child_row(const CovariateVector& v, const PeriodRecord& rec, const ChildOutcome& o,
                              std::span<const Covariate> cols) {
    std::vector<double> row = {rec.state.id, double(o.child.id), double(rec.state.year()), rec.state.treated ? 1.0 : 0.0};
    auto cv = v;
    fill_child(cv, o.child);
    for (auto c : cols) row.push_back(cv[static_cast<std::size_t>(c)]);
    row.push_back(rec.state.income);
    row.push_back(o.eligible ? (o.attend ? 1.0 : 0.0) : kNaN);
    row.push_back(o.eligible && o.attend ? (o.fail ? 1.0 : 0.0) : kNaN);
    return row;
}

SynthCorpus assemble(const SynthSpec& spec, const Mechanism& mech, const Panels& panels, const SimConfig& truth) {
    SynthCorpus out;
    out.truth = mech;
    out.train = Dataset(child_schema());
    out.test = Dataset(child_schema());
    out.households_train = Dataset(household_schema());
    out.households_test = Dataset(household_schema());

    // household-years with child rows, per split, for the planted missing income
    std::vector<HouseholdYear> train_hy, test_hy;
    for (std::size_t h = 0; h < panels.households.size(); ++h) {
        const auto& hh = panels.households[h];
        for (std::size_t r = 0; r < hh.records.size(); ++r) {
            const auto& rec = hh.records[r];
            if (rec.children.empty()) continue;
            const bool test = rec.state.treated && rec.state.year() == kLastYear;
            (test ? test_hy : train_hy).push_back({h, r, rec.children.size()});
        }
    }
    std::vector<std::vector<bool>> income_missing(panels.households.size());
    for (std::size_t h = 0; h < panels.households.size(); ++h)
        income_missing[h].assign(panels.households[h].records.size(), false);
    const auto plant = [&](std::vector<HouseholdYear> hys, double rate, std::uint64_t salt) {
        std::size_t total = 0;
        for (const auto& hy : hys) total += hy.rows;
        std::size_t left = static_cast<std::size_t>(std::llround(rate * double(total)));
        Rng r = stream(spec.seed, salt);
        r.shuffle(hys);
        std::size_t planted = 0;
        for (const auto& hy : hys) {
            if (left == 0) break;
            if (hy.rows > left) continue;
            income_missing[hy.household][hy.record] = true;
            left -= hy.rows;
            planted += hy.rows;
        }
        return planted;
    };
    out.train_missing_rows = plant(train_hy, spec.train_missing, 0xa11);
    out.test_missing_rows = plant(test_hy, spec.test_missing, 0xa12);

    const auto child_cols = emitted(true);
    const auto hh_cols = emitted(false);
    std::vector<HouseholdState> initial;
    for (std::size_t h = 0; h < panels.households.size(); ++h) {
        const auto& hh = panels.households[h];
        auto init = hh.initial;
        if (hh.dist2city_missing) init.dist2city = kNaN;
        initial.push_back(init);
        for (std::size_t r = 0; r < hh.records.size(); ++r) {
            const auto& rec = hh.records[r];
            auto state = rec.state;
            if (hh.dist2city_missing) state.dist2city = kNaN;
            auto v = household_covariates(state, truth.schedule, rec.subsidy_active);
            double income = rec.state.income;
            if (income_missing[h][r]) {
                v[static_cast<std::size_t>(Covariate::parInc)] = kNaN;
                apply_derived(v);
                income = kNaN;
            }
            const bool test = rec.state.treated && rec.state.year() == kLastYear;
            auto& rows = test ? out.test : out.train;
            for (const auto& o : rec.children) {
                auto row = child_row(v, rec, o, child_cols);
                row[row.size() - 3] = income;
                rows.append_row(row);
            }
            std::vector<double> hrow = {rec.state.id, double(rec.state.year()), rec.state.treated ? 1.0 : 0.0};
            for (auto c : hh_cols) hrow.push_back(v[static_cast<std::size_t>(c)]);
            hrow.push_back(income);
            (test ? out.households_test : out.households_train).append_row(hrow);
        }
    }
    out.initial = initial_state_table(initial);

    double preg = 0, fails = 0, attendees = 0;
    const auto p = out.train.column("preg");
    const auto f = out.train.column("fail");
    for (std::size_t r = 0; r < out.train.rows(); ++r) {
        preg += p[r];
        if (!std::isnan(f[r])) {
            fails += f[r];
            ++attendees;
        }
    }
    out.truth.realized_pregnancy_rate = out.train.rows() ? preg / double(out.train.rows()) : kNaN;
    out.truth.realized_failure_rate = attendees ? fails / attendees : kNaN;
    return out;
}

}  // namespace

void SynthSpec::validate() const {
    for (double r : {train_missing, test_missing, dist2city_missing, boy_ratio, pregnancy_rate, failure_rate})
        if (!(r >= 0.0 && r <= 1.0)) throw ContractError("synth: rates must lie in [0, 1]");
    if (pregnancy_rate <= 0.0 || pregnancy_rate >= 1.0 || failure_rate <= 0.0 || failure_rate >= 1.0)
        throw ContractError("synth: pregnancy and failure rates must lie strictly inside (0, 1)");
    if (n_households == 0 && (train_rows == 0 || test_rows == 0))
        throw ContractError("synth: row targets must be positive");
}

void Mechanism::write(std::ostream& out) const {
    out.precision(17);
    out << "attendance logit: " << attendance.intercept << " + " << attendance.behind << "*behindYrs + "
        << attendance.age_over_11 << "*max(0, childAge-11) + " << attendance.secondary << "*[hgc>=6] + "
        << attendance.income << "*parInc + " << attendance.subsidy << "*subsidy + " << attendance.boy << "*gender + "
        << attendance.dist2sch << "*dist2sch\n";
    out << "pregnancy logit: " << pregnancy_intercept
        << " - 0.12*(mAge-24) - 0.3*childNum - 2*prePreg + 1.2*[yrAfterWed<=1] - 3e-5*parInc; 0 when mAge > 44\n";
    out << "failure logit: " << failure_intercept << " + 0.5*[hgc==0] + 0.2*gender - 2e-5*(parInc-10000)\n";
    out << "income: max(2000, 11000 + 300*(fAge-35) - 8*(fAge-35)^2 - 50*dist2city - 400*dist2sch + 4000*hgcParGe9)"
        << " + N(0, " << income_noise_sd << "^2), floored at 0\n";
    out << "boy ratio: " << boy_ratio << "\n";
    out << "realized pregnancy rate (training child rows): " << realized_pregnancy_rate << "\n";
    out << "realized failure rate (training attendees): " << realized_failure_rate << "\n";
    out << "dominant attendance covariate: " << dominant_covariate << "\n";
}

SimConfig truth_config(const Mechanism& m, std::uint64_t seed) {
    using C = Covariate;
    SimConfig c;
    c.seed = seed;
    c.boy_ratio = m.boy_ratio;
    c.mode = Realization::stochastic;

    c.bindings.income.name = "income";
    c.bindings.income.inputs = {C::fAge, C::dist2sch, C::dist2city, C::hgcParGe9};
    c.bindings.income.regression = true;
    c.bindings.income.noise_sd = m.income_noise_sd;
    c.bindings.income.score = [](std::span<const double> x) {
        const double a = x[0] - 35.0;
        return std::max(2000.0, 11000.0 + 300.0 * a - 8.0 * a * a - 50.0 * x[2] - 400.0 * x[1] + 4000.0 * x[3]);
    };
    c.bindings.income.label = c.bindings.income.score;

    const double pi = m.pregnancy_intercept;
    c.bindings.pregnancy = index_model("pregnancy", {C::mAge, C::childNum, C::prePreg, C::yrAfterWed, C::parInc},
                                       [pi](std::span<const double> x) {
                                           if (x[0] > 44.0) return 0.0;
                                           return logistic(pi - 0.12 * (x[0] - 24.0) - 0.3 * x[1] - 2.0 * x[2] +
                                                           (x[3] <= 1.0 ? 1.2 : 0.0) - 3e-5 * x[4]);
                                       });

    const auto a = m.attendance;
    c.bindings.attendance = index_model(
        "attendance", {C::childAge, C::behindYrs, C::hgc, C::parInc, C::subsidy, C::gender, C::dist2sch},
        [a](std::span<const double> x) {
            return logistic(a.intercept + a.behind * x[1] + a.age_over_11 * std::max(0.0, x[0] - 11.0) +
                            (x[2] >= 6.0 ? a.secondary : 0.0) + a.income * x[3] + a.subsidy * x[4] + a.boy * x[5] +
                            a.dist2sch * x[6]);
        });

    const double fi = m.failure_intercept;
    c.bindings.failure = index_model("failure", {C::hgc, C::childAge, C::gender, C::parInc},
                                     [fi](std::span<const double> x) {
                                         return logistic(fi + (x[0] == 0.0 ? 0.5 : 0.0) + 0.2 * x[2] -
                                                         2e-5 * (x[3] - 10000.0));
                                     });
    return c;
}

FeatureSchema child_schema() {
    FeatureSchema s({{"hhid", ColumnKind::continuous, ColumnRole::id, {}},
                     {"childId", ColumnKind::continuous, ColumnRole::id, {}},
                     {"year", ColumnKind::continuous, ColumnRole::id, {}},
                     {"group", ColumnKind::categorical, ColumnRole::group_key, {"control", "treatment"}}});
    for (auto c : emitted(true)) s.add({std::string(to_string(c)), kind_of(c), ColumnRole::feature, {}});
    s.add({"income", ColumnKind::continuous, ColumnRole::target, {}});
    s.add({"attend", ColumnKind::binary, ColumnRole::target, {}});
    s.add({"fail", ColumnKind::binary, ColumnRole::target, {}});
    return s;
}

FeatureSchema household_schema() {
    FeatureSchema s({{"hhid", ColumnKind::continuous, ColumnRole::id, {}},
                     {"year", ColumnKind::continuous, ColumnRole::id, {}},
                     {"group", ColumnKind::categorical, ColumnRole::group_key, {"control", "treatment"}}});
    for (auto c : emitted(false)) s.add({std::string(to_string(c)), kind_of(c), ColumnRole::feature, {}});
    s.add({"income", ColumnKind::continuous, ColumnRole::target, {}});
    return s;
}

SynthCorpus generate(const SynthSpec& spec) {
    spec.validate();
    Mechanism mech;
    mech.attendance = spec.attendance;
    mech.boy_ratio = spec.boy_ratio;
    mech.pregnancy_intercept = -1.0;
    mech.failure_intercept = logit(spec.failure_rate);

    // shift both intercepts on the logit scale until the realized rates match
    SynthCorpus best;
    double best_gap = std::numeric_limits<double>::infinity();
    for (int iter = 0; iter < 12; ++iter) {
        const auto truth = truth_config(mech, spec.seed);
        const auto panels = build_households(spec, truth);
        auto corpus = assemble(spec, mech, panels, truth);
        const double pr = corpus.truth.realized_pregnancy_rate, fr = corpus.truth.realized_failure_rate;
        const bool usable = pr > 0 && pr < 1 && fr > 0 && fr < 1;
        const double gap = usable ? std::abs(pr - spec.pregnancy_rate) + std::abs(fr - spec.failure_rate)
                                  : std::numeric_limits<double>::infinity();
        if (gap < best_gap || iter == 0) {
            best_gap = gap;
            best = std::move(corpus);
        }
        if (!usable || gap < 0.002) break;
        mech.pregnancy_intercept += logit(spec.pregnancy_rate) - logit(pr);
        mech.failure_intercept += logit(spec.failure_rate) - logit(fr);
    }
    return best;
}

void write_corpus(const SynthCorpus& corpus, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    const auto schema = [&](const std::string& name, const FeatureSchema& s) {
        std::ofstream out(dir / name);
        if (!out) throw SchemaError("cannot write " + (dir / name).string());
        write_schema(out, s);
    };
    write_csv(dir / "train.csv", corpus.train);
    write_csv(dir / "test.csv", corpus.test);
    write_csv(dir / "households_train.csv", corpus.households_train);
    write_csv(dir / "households_test.csv", corpus.households_test);
    write_csv(dir / "initial_states.csv", corpus.initial);
    schema("children.schema", corpus.train.schema());
    schema("households.schema", corpus.households_train.schema());
    schema("initial_states.schema", corpus.initial.schema());
    std::ofstream mech(dir / "mechanism.txt");
    corpus.truth.write(mech);
}

}  // namespace cctml
