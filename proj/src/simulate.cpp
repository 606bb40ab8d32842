#include "cctml/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <ostream>
#include <unordered_map>

#include "cctml/error.hpp"
#include "text.hpp"

namespace cctml {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<double> assemble(const CovariateVector& v, const Submodel& model, bool has_child) {
    if (!has_child)
        for (auto c : model.inputs)
            if (is_child_level(c))
                throw BindingError("covariate '" + std::string(to_string(c)) + "' is undefined for the household-level " +
                                   model.name + " model");
    return gather(v, model.inputs);
}

bool draw_outcome(const Submodel& model, std::span<const double> x, const SimConfig& config, Rng* rng) {
    if (config.mode == Realization::expected || !rng) return model.label(x) > 0.5;
    return rng->uniform() < model.score(x);
}

void check_household_level(const Submodel& m) {
    for (auto c : m.inputs)
        if (is_child_level(c))
            throw BindingError(m.name + " model reads child covariate '" + std::string(to_string(c)) + "'");
}

}  // namespace

Submodel bind_model(std::string name, std::shared_ptr<const FittedModel> model) {
    if (!model) throw BindingError("no model bound for the " + name + " submodel");
    Submodel sub;
    sub.name = std::move(name);
    const auto names = model->feature_names();
    try {
        sub.inputs = resolve(names);
    } catch (const BindingError& e) {
        throw BindingError(sub.name + " model: " + e.what());
    }
    sub.regression = model->task == Task::regression;
    sub.score = [model](std::span<const double> x) { return model->score_row(x); };
    sub.label = [model](std::span<const double> x) { return model->predict_row(x); };
    return sub;
}

Submodel constant_submodel(std::string name, double value, bool regression) {
    Submodel sub;
    sub.name = std::move(name);
    sub.regression = regression;
    sub.score = [value](std::span<const double>) { return value; };
    sub.label = [value, regression](std::span<const double>) {
        return regression ? value : (value >= 0.5 ? 1.0 : 0.0);
    };
    return sub;
}

void SimConfig::validate() const {
    const Submodel* all[] = {&bindings.income, &bindings.pregnancy, &bindings.attendance, &bindings.failure};
    const char* names[] = {"income", "pregnancy", "attendance", "failure"};
    for (int i = 0; i < 4; ++i)
        if (!all[i]->bound()) throw BindingError(std::string("no model bound for the ") + names[i] + " submodel");
    if (!bindings.income.regression) throw BindingError("income submodel must be a regression model");
    for (const Submodel* m : {&bindings.pregnancy, &bindings.attendance, &bindings.failure})
        if (m->regression) throw BindingError(m->name + " submodel must be a classifier");
    check_household_level(bindings.income);
    check_household_level(bindings.pregnancy);
    if (!(boy_ratio >= 0.0 && boy_ratio <= 1.0)) throw ContractError("boy ratio must lie in [0, 1]");
    if (max_child_age < 15) throw ContractError("children must stay in the household through age 15");
}

std::vector<ChildOutcome> decide_children(const HouseholdState& state, const CovariateVector& household,
                                          const SimConfig& config, Rng* rng) {
    std::vector<ChildOutcome> out;
    out.reserve(state.children.size());
    for (const auto& child : state.children) {
        ChildOutcome o;
        o.child = child;
        o.eligible = child.age >= 6 && child.age <= 15;
        if (o.eligible) {
            CovariateVector v = household;
            fill_child(v, child);
            o.attend = draw_outcome(config.bindings.attendance, assemble(v, config.bindings.attendance, true), config, rng);
            if (o.attend)
                o.fail = draw_outcome(config.bindings.failure, assemble(v, config.bindings.failure, true), config, rng);
        }
        out.push_back(o);
    }
    return out;
}

HouseholdState simulate_household(HouseholdState s, const SimConfig& config, int horizon_year,
                                  const PeriodObserver& observer) {
    if (s.id < 0 || s.id != std::floor(s.id)) throw ContractError("household ids must be non-negative integers");
    Rng rng = stream(config.seed, static_cast<std::uint64_t>(s.id));
    Rng* r = config.mode == Realization::stochastic ? &rng : nullptr;
    const auto& b = config.bindings;
    while (s.year() <= horizon_year) {
        const bool active = s.treated && s.year() >= config.subsidy_start_year;
        s.pregnant = false;

        // 1. income
        auto v = household_covariates(s, config.schedule, active);
        double income = b.income.label(assemble(v, b.income, false));
        if (r && b.income.noise_sd > 0) income = std::max(0.0, income + b.income.noise_sd * r->normal());
        s.income = income;

        // 2-3. pregnancy and the newborn's gender
        v = household_covariates(s, config.schedule, active);
        s.pregnant = draw_outcome(b.pregnancy, assemble(v, b.pregnancy, false), config, r);
        bool boy = false;
        if (s.pregnant) boy = r ? r->bernoulli(config.boy_ratio) : config.boy_ratio >= 0.5;

        // 4-5. attendance and failure
        v = household_covariates(s, config.schedule, active);
        PeriodRecord record;
        record.children = decide_children(s, v, config, r);
        if (observer) {
            record.state = s;
            record.par_inc = v[static_cast<std::size_t>(Covariate::parInc)];
            record.subsidy_active = active;
            observer(record);
        }

        // 6. update, age, births
        for (std::size_t i = 0; i < s.children.size(); ++i) {
            auto& c = s.children[i];
            const auto& o = record.children[i];
            if (o.eligible) {
                if (o.attend && c.hgc >= 6) c.ever_sec = true;
                if (o.attend && !o.fail) ++c.hgc;
                else ++c.behind;
            } else if (c.age > 15) {
                ++c.behind;
            }
            ++c.age;
        }
        std::erase_if(s.children, [&](const ChildState& c) { return c.age > config.max_child_age; });
        if (s.pregnant) {
            if (s.m_age_first_birth == 0.0) s.m_age_first_birth = s.m_age();
            if (s.t == 0) s.preg_first_yr = true;
            s.children.push_back({s.next_child_id++, 0, boy ? Gender::boy : Gender::girl, 0, 0, false});
        }
        s.pre_preg = s.pregnant;
        s.pregnant = false;
        ++s.t;
    }
    return s;
}

CohortRun simulate_cohort(std::span<const HouseholdState> initial, const SimConfig& config, int report_year,
                          const PeriodObserver& observer) {
    config.validate();
    CohortRun run;
    for (const auto& h : initial) {
        std::optional<PeriodRecord> kept;
        try {
            simulate_household(h, config, report_year, [&](const PeriodRecord& rec) {
                if (rec.state.year() == report_year) kept = rec;
                if (observer) observer(rec);
            });
        } catch (const BindingError& e) {
            ++run.skipped;
            run.errors.push_back("household " + detail::format_double(h.id) + ": " + e.what());
            continue;
        } catch (const ContractError& e) {
            ++run.skipped;
            run.errors.push_back("household " + detail::format_double(h.id) + ": " + e.what());
            continue;
        }
        if (kept) run.at_report.push_back(std::move(*kept));
    }
    return run;
}

// ---------------------------------------------------------------------------
// Initial states and reconstruction

FeatureSchema initial_state_schema() {
    using K = ColumnKind;
    using R = ColumnRole;
    return FeatureSchema({{"hhid", K::continuous, R::id, {}},
                          {"group", K::categorical, R::group_key, {"control", "treatment"}},
                          {"weddingYear", K::continuous, R::feature, {}},
                          {"fAgeWed", K::continuous, R::feature, {}},
                          {"mAgeWed", K::continuous, R::feature, {}},
                          {"hgcParGe9", K::binary, R::feature, {}},
                          {"dist2sch", K::continuous, R::feature, {}},
                          {"dist2city", K::continuous, R::feature, {}}});
}

std::vector<HouseholdState> initial_states(const Dataset& data) {
    const char* required[] = {"hhid", "group", "weddingYear", "fAgeWed", "mAgeWed", "hgcParGe9", "dist2sch", "dist2city"};
    for (const char* name : required) data.schema().index_of(name);
    std::vector<HouseholdState> out;
    for (std::size_t r = 0; r < data.rows(); ++r) {
        HouseholdState s;
        s.id = data.at(r, "hhid");
        s.treated = data.at(r, "group") == 1.0;
        const double wy = data.at(r, "weddingYear");
        if (std::isnan(wy) || std::isnan(s.id))
            throw SchemaError("initial state row " + std::to_string(r + 1) + ": hhid and weddingYear are required");
        s.wedding_year = static_cast<int>(wy);
        s.f_age_wed = data.at(r, "fAgeWed");
        s.m_age_wed = data.at(r, "mAgeWed");
        s.hgc_par_ge9 = data.at(r, "hgcParGe9") == 1.0;
        s.dist2sch = data.at(r, "dist2sch");
        s.dist2city = data.at(r, "dist2city");
        out.push_back(std::move(s));
    }
    return out;
}

Dataset initial_state_table(std::span<const HouseholdState> states) {
    Dataset d(initial_state_schema());
    for (const auto& s : states)
        d.append_row(std::vector<double>{s.id, s.treated ? 1.0 : 0.0, double(s.wedding_year), s.f_age_wed, s.m_age_wed,
                                         s.hgc_par_ge9 ? 1.0 : 0.0, s.dist2sch, s.dist2city});
    return d;
}

HouseholdState reconstruct_state(const Dataset& rows, std::span<const std::size_t> indices) {
    if (indices.empty()) throw ContractError("reconstruct_state: no rows");
    const auto first = indices.front();
    const auto get = [&](std::size_t r, const char* name) { return rows.at(r, name); };
    HouseholdState s;
    s.id = get(first, "hhid");
    s.t = static_cast<int>(get(first, "yrAfterWed"));
    s.wedding_year = static_cast<int>(get(first, "year")) - s.t;
    s.treated = false;
    s.f_age_wed = get(first, "fAgeWed");
    s.m_age_wed = get(first, "mAgeWed");
    s.hgc_par_ge9 = get(first, "hgcParGe9") == 1.0;
    s.dist2sch = get(first, "dist2sch");
    s.dist2city = get(first, "dist2city");
    s.income = get(first, "parInc");
    s.pregnant = get(first, "preg") == 1.0;
    s.pre_preg = get(first, "prePreg") == 1.0;
    s.preg_first_yr = get(first, "pregFirstYr") == 1.0;
    s.m_age_first_birth = get(first, "mAgeFirstBirth");
    for (auto r : indices) {
        ChildState c;
        c.id = static_cast<std::uint32_t>(get(r, "childId"));
        c.age = static_cast<int>(get(r, "childAge"));
        c.gender = get(r, "gender") == 1.0 ? Gender::boy : Gender::girl;
        c.hgc = static_cast<int>(get(r, "hgc"));
        c.behind = static_cast<int>(get(r, "behindYrs"));
        c.ever_sec = get(r, "everSec") == 1.0;
        s.next_child_id = std::max(s.next_child_id, c.id + 1);
        s.children.push_back(c);
    }
    return s;
}

std::vector<double> one_step_attendance(const Dataset& rows, const SimConfig& config) {
    SimConfig cfg = config;
    cfg.mode = Realization::expected;
    std::map<std::pair<double, double>, std::vector<std::size_t>> groups;
    const auto hh = rows.column("hhid");
    const auto year = rows.column("year");
    for (std::size_t r = 0; r < rows.rows(); ++r) groups[{hh[r], year[r]}].push_back(r);
    std::vector<double> out(rows.rows(), kNaN);
    for (const auto& [key, idx] : groups) {
        const auto s = reconstruct_state(rows, idx);
        const auto v = household_covariates(s, cfg.schedule, false);
        const auto outcomes = decide_children(s, v, cfg, nullptr);
        for (std::size_t i = 0; i < idx.size(); ++i)
            if (outcomes[i].eligible) out[idx[i]] = outcomes[i].attend ? 1.0 : 0.0;
    }
    return out;
}

double boy_ratio(const Dataset& rows) {
    double boys = 0, n = 0;
    for (double g : rows.column("gender")) {
        if (std::isnan(g)) continue;
        boys += g;
        ++n;
    }
    if (n == 0) throw ContractError("boy_ratio: no children");
    return boys / n;
}

// ---------------------------------------------------------------------------
// Reports

namespace {

struct Simulated {
    std::vector<double> values;
    SubgroupMap groups;
};

template <class Pick>
Simulated collect(std::span<const PeriodRecord> simulated, Pick pick) {
    Simulated s;
    for (const auto& rec : simulated)
        for (const auto& o : rec.children) {
            const auto value = pick(o);
            if (!value) continue;
            for (const auto& key : subgroups_for(o.child.age, o.child.gender, o.child.behind, o.child.hgc))
                s.groups[key.index()].push_back(s.values.size());
            s.values.push_back(*value);
        }
    return s;
}

}  // namespace

SubgroupReport attendance_report(const Dataset& actual, std::span<const PeriodRecord> simulated, std::string label) {
    const auto sim = collect(simulated, [](const ChildOutcome& o) -> std::optional<double> {
        if (!o.eligible) return std::nullopt;
        return o.attend ? 1.0 : 0.0;
    });
    return compare_subgroup_rates(actual.column("attend"), assign_subgroups(actual), sim.values, sim.groups,
                                  std::move(label));
}

SubgroupReport failure_report(const Dataset& actual, std::span<const PeriodRecord> simulated, std::string label) {
    const auto sim = collect(simulated, [](const ChildOutcome& o) -> std::optional<double> {
        if (!o.eligible || !o.attend) return std::nullopt;
        return o.fail ? 1.0 : 0.0;
    });
    const auto attend = actual.column("attend");
    const auto fail = actual.column("fail");
    std::vector<double> observed(actual.rows(), kNaN);
    for (std::size_t r = 0; r < actual.rows(); ++r)
        if (attend[r] == 1.0) observed[r] = fail[r];
    return compare_subgroup_rates(observed, assign_subgroups(actual), sim.values, sim.groups, std::move(label));
}

ValueReport income_report(const Dataset& actual, std::span<const PeriodRecord> simulated, std::string label) {
    std::unordered_map<double, double> income;
    for (const auto& rec : simulated) income[rec.state.id] = rec.state.income;
    const auto hh = actual.column("hhid");
    std::vector<double> predicted(actual.rows(), kNaN);
    for (std::size_t r = 0; r < actual.rows(); ++r)
        if (auto it = income.find(hh[r]); it != income.end()) predicted[r] = it->second;
    return value_report(actual.column("income"), predicted, assign_subgroups(actual), std::move(label));
}

PregnancyReport pregnancy_rate_report(const Dataset& actual, std::span<const PeriodRecord> simulated,
                                      std::string label) {
    PregnancyReport rep;
    rep.label = std::move(label);
    const std::pair<int, int> bands[] = {{20, 24}, {25, 29}, {30, 34}, {35, 44}};
    const auto m_age = actual.column("mAge");
    const auto preg = actual.column("preg");
    for (const auto& [lo, hi] : bands) {
        AgeBandRate b;
        b.band = std::to_string(lo) + "-" + std::to_string(hi);
        b.lo = lo;
        b.hi = hi;
        double a = 0, p = 0;
        for (std::size_t r = 0; r < actual.rows(); ++r) {
            if (std::isnan(m_age[r]) || std::isnan(preg[r]) || m_age[r] < lo || m_age[r] > hi) continue;
            a += preg[r];
            ++b.n_actual;
        }
        for (const auto& rec : simulated) {
            const double m = rec.state.m_age();
            if (m < lo || m > hi) continue;
            p += rec.state.pregnant;
            ++b.n_predicted;
        }
        b.actual = b.n_actual ? 100.0 * a / double(b.n_actual) : kNaN;
        b.predicted = b.n_predicted ? 100.0 * p / double(b.n_predicted) : kNaN;
        b.error = b.predicted - b.actual;
        rep.bands.push_back(std::move(b));
    }
    return rep;
}

void write_pregnancy_csv(std::ostream& out, std::span<const PregnancyReport> reports) {
    out << "panel,band,n_actual,n_predicted,actual,predicted,error\n";
    for (const auto& rep : reports)
        for (const auto& b : rep.bands)
            out << rep.label << ',' << b.band << ',' << b.n_actual << ',' << b.n_predicted << ','
                << format_fixed(b.actual, 4) << ',' << format_fixed(b.predicted, 4) << ',' << format_fixed(b.error, 4)
                << '\n';
}

void write_pregnancy_markdown(std::ostream& out, std::string_view title, std::span<const PregnancyReport> reports) {
    out << "### " << title << "\n\n| Panel | Mother's age | Actual | Predicted | Error |\n|---|---|---:|---:|---:|\n";
    for (const auto& rep : reports)
        for (const auto& b : rep.bands)
            out << "| " << rep.label << " | " << b.band << " | " << format_fixed(b.actual, 1) << " | "
                << format_fixed(b.predicted, 1) << " | " << format_fixed(b.error, 1) << " |\n";
    out << '\n';
}

TrajectoryWriter::TrajectoryWriter(std::ostream& out) : out_(&out) {
    *out_ << "household_id,year,income,pregnant,child_id,age,attend,fail,hgc,behindYrs\n";
}

void TrajectoryWriter::operator()(const PeriodRecord& rec) {
    const auto head = detail::format_double(rec.state.id) + ',' + std::to_string(rec.state.year()) + ',' +
                      detail::format_double(rec.state.income) + ',' + (rec.state.pregnant ? "1" : "0") + ',';
    if (rec.children.empty()) {
        *out_ << head << ",,,,,\n";
        return;
    }
    for (const auto& o : rec.children) {
        *out_ << head << o.child.id << ',' << o.child.age << ',';
        if (o.eligible) *out_ << (o.attend ? 1 : 0) << ',' << (o.attend ? (o.fail ? "1" : "0") : "");
        else *out_ << ',';
        *out_ << ',' << o.child.hgc << ',' << o.child.behind << '\n';
    }
}

}  // namespace cctml
