#include "pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <memory>
#include <sstream>

#include "cctml/error.hpp"
#include "cctml/reference.hpp"
#include "cctml/rng.hpp"
#include "cctml/synth.hpp"
#include "text.hpp"

namespace cctml::app {

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::ofstream open_out(const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write " + path.string());
    return out;
}

const reference::RatePanel* published_panel(std::span<const reference::RatePanel> panels, const Panel& p) {
    for (const auto& rp : panels)
        if (rp.label == p.label()) return &rp;
    return nullptr;
}

SubgroupReport published_report(const reference::RatePanel& rp) {
    std::array<double, 8> a{}, p{}, e{};
    std::copy(rp.actual.begin(), rp.actual.end(), a.begin());
    std::copy(rp.predicted.begin(), rp.predicted.end(), p.begin());
    std::copy(rp.error.begin(), rp.error.end(), e.begin());
    return fixed_report("TW2006", a, p, e);
}

// Adds a leading column to every line of a CSV block.
std::string prefix_csv(const std::string& csv, std::string_view name, std::string_view value, bool header) {
    std::istringstream in(csv);
    std::string line, out;
    bool first = true;
    while (std::getline(in, line)) {
        if (first && header) out += std::string(name) + ',' + line + '\n';
        else if (!first || !header) out += std::string(value) + ',' + line + '\n';
        first = false;
    }
    return out;
}

ModelScore pooled_score(std::string name, std::span<const SubgroupReport> reports) {
    std::vector<double> errors;
    double acc = 0;
    std::size_t n = 0;
    for (const auto& r : reports) {
        for (double e : r.errors()) errors.push_back(e);
        for (const auto& row : r.rows)
            if (!std::isnan(row.accuracy)) {
                acc += row.accuracy;
                ++n;
            }
    }
    const auto s = mae_rmse(errors);
    return {std::move(name), s.mae, s.rmse, n ? acc / double(n) : kNaN};
}

std::vector<double> band_errors(const PregnancyReport& r) {
    std::vector<double> out;
    for (const auto& b : r.bands)
        if (!std::isnan(b.error)) out.push_back(b.error);
    return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Outcomes

std::string_view to_string(Outcome o) {
    switch (o) {
        case Outcome::attendance: return "attendance";
        case Outcome::income: return "income";
        case Outcome::pregnancy: return "pregnancy";
        case Outcome::failure: return "failure";
    }
    return "?";
}

Outcome parse_outcome(std::string_view name) {
    for (auto o : kOutcomes)
        if (to_string(o) == name) return o;
    throw ContractError("unknown outcome '" + std::string(name) + "' (attendance, income, pregnancy, failure)");
}

std::string_view target_of(Outcome o) {
    switch (o) {
        case Outcome::attendance: return "attend";
        case Outcome::income: return "income";
        case Outcome::pregnancy: return "preg";
        case Outcome::failure: return "fail";
    }
    return "";
}

Task task_of(Outcome o) { return o == Outcome::income ? Task::regression : Task::classification; }

bool household_level(Outcome o) { return o == Outcome::income || o == Outcome::pregnancy; }

std::vector<std::string> features_of(Outcome o) {
    switch (o) {
        case Outcome::attendance: return names_of(attendance_covariates());
        case Outcome::income: return names_of(income_covariates());
        case Outcome::pregnancy: return names_of(pregnancy_covariates());
        case Outcome::failure: return names_of(failure_covariates());
    }
    return {};
}

Outcome outcome_for_target(std::string_view target) {
    for (auto o : kOutcomes)
        if (target_of(o) == target) return o;
    throw ContractError("no outcome has target '" + std::string(target) + "'");
}

std::vector<LearnerId> learners_for(Outcome o, std::span<const LearnerId> requested) {
    std::vector<LearnerId> out;
    for (auto id : requested)
        if (supports(id, task_of(o))) out.push_back(id);
    return out;
}

// ---------------------------------------------------------------------------
// Data

fs::path resolve_schema_path(const fs::path& data, const std::optional<fs::path>& schema) {
    if (schema) {
        if (!fs::exists(*schema)) throw InputError("schema file not found: " + schema->string());
        return *schema;
    }
    auto sidecar = data;
    sidecar.replace_extension(".schema");
    if (fs::exists(sidecar)) return sidecar;
    const auto stem = data.filename().string();
    const auto dir = data.parent_path();
    const auto guess = stem.starts_with("households")   ? dir / "households.schema"
                       : stem.starts_with("initial")    ? dir / "initial_states.schema"
                                                        : dir / "children.schema";
    if (fs::exists(guess)) return guess;
    throw InputError("no schema for " + data.string() + " (pass --schema)");
}

IngestResult load_rows(const fs::path& data, const FeatureSchema& schema) {
    if (!fs::exists(data)) throw InputError("data file not found: " + data.string());
    IngestOptions opt;
    opt.required.clear();
    for (const char* c : {"parInc", "childAge"})
        if (schema.contains(c)) opt.required.emplace_back(c);
    return ingest_csv(data, schema, opt);
}

std::vector<LearnerParams> parse_grid(std::string_view text) {
    std::vector<std::string> cells{""};
    for (const auto& tok : detail::split_ws(text)) {
        const auto eq = tok.find('=');
        if (eq == std::string::npos) throw ContractError("grid entry '" + tok + "' is not key=v1,v2,...");
        const auto key = tok.substr(0, eq);
        const auto values = detail::split(std::string_view(tok).substr(eq + 1), ',');
        std::vector<std::string> next;
        for (const auto& c : cells)
            for (const auto& v : values) next.push_back(c + (c.empty() ? "" : " ") + key + '=' + v);
        cells = std::move(next);
    }
    std::vector<LearnerParams> grid;
    if (cells.size() == 1 && cells[0].empty()) return grid;
    for (const auto& c : cells) grid.push_back(LearnerParams::parse(c));
    return grid;
}

ResamplePlan parse_resample(std::string_view text) {
    const auto parts = detail::split(text, ':');
    ResamplePlan plan;
    if (parts.empty() || parts.size() > 3) throw ContractError("resample must be method[:ratio[:k]]");
    plan.method = parse_resample_method(parts[0]);
    if (parts.size() > 1 && !detail::parse_double(parts[1], plan.ratio))
        throw ContractError("bad resample ratio '" + parts[1] + "'");
    if (parts.size() > 2 && !detail::parse_size(parts[2], plan.smote_k))
        throw ContractError("bad SMOTE neighbour count '" + parts[2] + "'");
    plan.validate();
    return plan;
}

// ---------------------------------------------------------------------------
// Training

TrainResult train_model(const Dataset& data, const TrainOptions& o) {
    const auto t0 = Clock::now();
    const std::string target(target_of(o.outcome));
    const auto task = task_of(o.outcome);
    const auto features = features_of(o.outcome);
    if (!supports(o.learner, task))
        throw ContractError(std::string(to_string(o.learner)) + " cannot fit the " + std::string(to_string(o.outcome)) +
                            " outcome");
    if (task == Task::regression && o.resample.method != ResampleMethod::none)
        throw ContractError("resampling applies to classification outcomes only");
    for (const auto& f : features) data.schema().index_of(f);
    data.schema().index_of(target);

    CvPlan plan;
    plan.folds = o.folds;
    plan.grid = o.grid;
    plan.seed = o.seed;
    plan.resample = o.resample;
    plan.resample.seed = stream_seed(o.seed, 2);
    plan.cluster_column = o.cluster;
    plan.threads = o.threads;

    TrainResult res;
    res.cv = cross_validate(data, target, features, o.learner, task, plan);

    const auto rows = rows_with_target(data, target);
    auto fit_rows = data.select_rows(rows);
    if (o.resample.method != ResampleMethod::none) {
        auto rp = plan.resample;
        rp.seed = stream_seed(o.seed, 3);
        fit_rows = apply_resample(fit_rows, target, rp);
    }
    FitOptions fo;
    fo.seed = o.seed;
    fo.threads = o.threads;
    res.model = fit_learner(o.learner, task, fit_rows, target, features, res.cv.best_params(), fo);
    res.seconds = since(t0);
    return res;
}

void save_model(const FittedModel& model, const fs::path& path) {
    auto out = open_out(path);
    model.write(out);
}

FittedModel load_model(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open model file " + path.string());
    return FittedModel::read(in);
}

// ---------------------------------------------------------------------------
// Panels

std::string Panel::label() const { return group + ' ' + std::to_string(year); }

const std::vector<Panel>& training_panels() {
    static const std::vector<Panel> p = {{"control", 1997}, {"control", 1998}, {"treatment", 1997}};
    return p;
}

Panel test_panel() { return {"treatment", 1998}; }

Panel parse_panel(std::string_view text) {
    const auto parts = detail::split(text, ':');
    std::size_t year = 0;
    if (parts.size() != 2 || !detail::parse_size(parts[1], year))
        throw ContractError("panel must be group:year, got '" + std::string(text) + "'");
    return {parts[0], static_cast<int>(year)};
}

Dataset panel_rows(const Dataset& data, const Panel& panel) {
    const auto g = data.schema().index_of("group");
    const auto level = data.schema().level_index(g, panel.group);
    if (!level) throw SchemaError("column 'group' has no level '" + panel.group + "'");
    const auto group = data.column(g);
    const auto year = data.column("year");
    std::vector<std::size_t> idx;
    for (std::size_t r = 0; r < data.rows(); ++r)
        if (group[r] == double(*level) && year[r] == panel.year) idx.push_back(r);
    return data.select_rows(idx);
}

std::vector<HouseholdState> panel_households(const Dataset& initial, const Panel& panel) {
    const auto g = initial.schema().index_of("group");
    const auto level = initial.schema().level_index(g, panel.group);
    if (!level) throw SchemaError("column 'group' has no level '" + panel.group + "'");
    std::vector<std::size_t> idx;
    const auto group = initial.column(g);
    for (std::size_t r = 0; r < initial.rows(); ++r)
        if (group[r] == double(*level)) idx.push_back(r);
    return initial_states(initial.select_rows(idx));
}

SubgroupReport attendance_fit(const FittedModel& model, const Dataset& rows, std::string label) {
    const auto d = rows.select_rows(rows_with_target(rows, "attend"));
    const auto pred = model.predict(d);
    return subgroup_report(d.column("attend"), pred, assign_subgroups(d), std::move(label));
}

SubgroupReport failure_fit(const FittedModel& model, const Dataset& rows, std::string label) {
    const auto d = rows.select_rows(rows_with_target(rows, "fail"));
    const auto score = model.score(d);
    const auto groups = assign_subgroups(d);
    return compare_subgroup_rates(d.column("fail"), groups, score, groups, std::move(label));
}

PregnancyReport pregnancy_fit(const FittedModel& model, const Dataset& households, std::string label) {
    const auto d = households.select_rows(rows_with_target(households, "preg"));
    const auto score = model.score(d);
    const auto age = d.column("mAge");
    const auto preg = d.column("preg");
    PregnancyReport rep;
    rep.label = std::move(label);
    for (auto [name, lo, hi] : {std::tuple{"20-24", 20, 24}, {"25-29", 25, 29}, {"30-34", 30, 34}, {"35-44", 35, 44}}) {
        AgeBandRate b;
        b.band = name;
        b.lo = lo;
        b.hi = hi;
        double a = 0, p = 0;
        for (std::size_t r = 0; r < d.rows(); ++r) {
            if (std::isnan(age[r]) || age[r] < lo || age[r] > hi) continue;
            a += preg[r];
            p += score[r];
            ++b.n_actual;
        }
        b.n_predicted = b.n_actual;
        b.actual = b.n_actual ? 100.0 * a / double(b.n_actual) : kNaN;
        b.predicted = b.n_actual ? 100.0 * p / double(b.n_actual) : kNaN;
        b.error = b.predicted - b.actual;
        rep.bands.push_back(std::move(b));
    }
    return rep;
}

ErrorSummary income_fit(const FittedModel& model, const Dataset& households) {
    const auto d = households.select_rows(rows_with_target(households, "income"));
    const auto pred = model.predict(d);
    const auto y = d.column("income");
    std::vector<double> resid(d.rows());
    for (std::size_t r = 0; r < d.rows(); ++r) resid[r] = pred[r] - y[r];
    return mae_rmse(resid);
}

void write_split_csv(std::ostream& out, std::span<const SplitScore> rows) {
    out << "model,train_mae,train_rmse,test_mae,test_rmse,selected,reference\n";
    for (const auto& r : rows)
        out << r.model << ',' << format_fixed(r.train_mae, 4) << ',' << format_fixed(r.train_rmse, 4) << ','
            << format_fixed(r.test_mae, 4) << ',' << format_fixed(r.test_rmse, 4) << ',' << int(r.selected) << ','
            << int(r.reference) << '\n';
}

void write_split_markdown(std::ostream& out, std::string_view title, std::span<const SplitScore> rows,
                          int decimals) {
    out << "### " << title << "\n\n| Model | Training MAE | Training RMSE | Test MAE | Test RMSE |\n"
        << "|---|---:|---:|---:|---:|\n";
    bool any_ref = false;
    for (const auto& r : rows) {
        any_ref |= r.reference;
        out << "| " << r.model << (r.reference ? " (published)" : "") << (r.selected ? " (selected)" : "") << " | "
            << format_fixed(r.train_mae, decimals) << " | " << format_fixed(r.train_rmse, decimals) << " | "
            << format_fixed(r.test_mae, decimals) << " | " << format_fixed(r.test_rmse, decimals) << " |\n";
    }
    if (any_ref) out << "\nPublished rows are fixed reference values and are not recomputed.\n";
    out << '\n';
}

// ---------------------------------------------------------------------------
// Simulation

BindingSpecs read_binding_specs(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open binding file " + path.string());
    BindingSpecs specs;
    std::string line;
    std::size_t no = 0;
    while (std::getline(in, line)) {
        ++no;
        const auto t = detail::trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw ParseError(path.string() + ": expected submodel=model", no);
        const auto key = detail::trim(std::string_view(t).substr(0, eq));
        if (key != "income" && key != "pregnancy" && key != "attendance" && key != "failure")
            throw ParseError(path.string() + ": unknown submodel '" + key + "'", no);
        specs[key] = detail::trim(std::string_view(t).substr(eq + 1));
    }
    return specs;
}

Bindings make_bindings(const BindingSpecs& specs, const fs::path& base) {
    Bindings b;
    for (const auto& [name, spec] : specs) {
        cctml::Submodel m;
        if (spec.starts_with("const:")) {
            double v = 0;
            if (!detail::parse_double(std::string_view(spec).substr(6), v))
                throw InputError("binding " + name + ": bad constant '" + spec + "'");
            m = constant_submodel(name, v, name == "income");
        } else {
            fs::path p(spec);
            if (p.is_relative()) p = base / p;
            if (!fs::exists(p)) throw BindingError("submodel '" + name + "': model file not found: " + p.string());
            m = bind_model(name, std::make_shared<const FittedModel>(load_model(p)));
        }
        if (name == "income") b.income = std::move(m);
        else if (name == "pregnancy") b.pregnancy = std::move(m);
        else if (name == "attendance") b.attendance = std::move(m);
        else b.failure = std::move(m);
    }
    return b;
}

SimulateResult simulate_panels(const SimulateInputs& in, const SimConfig& config, const std::string& label,
                               std::ostream* trajectories) {
    config.validate();
    const auto t0 = Clock::now();
    SimulateResult res;
    std::optional<TrajectoryWriter> writer;
    if (trajectories) writer.emplace(*trajectories);
    for (const auto& panel : in.panels) {
        // a later panel of the same group replays this one's years
        const bool dump = writer && in.trajectories &&
                          std::none_of(in.panels.begin(), in.panels.end(), [&](const Panel& q) {
                              return q.group == panel.group && q.year > panel.year;
                          });
        const auto states = panel_households(in.initial, panel);
        PeriodObserver observer;
        if (dump) observer = [&](const PeriodRecord& r) { (*writer)(r); };
        const auto run = simulate_cohort(states, config, panel.year, observer);
        const auto actual = panel_rows(in.actual, panel);

        PanelResult pr;
        pr.panel = panel;
        pr.households = states.size();
        pr.skipped = run.skipped;
        pr.errors = run.errors;
        pr.attendance = attendance_report(actual, run.at_report, label);
        pr.failure = failure_report(actual, run.at_report, label);
        pr.income = income_report(actual, run.at_report, label);
        if (in.households) pr.pregnancy = pregnancy_rate_report(panel_rows(*in.households, panel), run.at_report, label);
        res.skipped += run.skipped;
        res.panels.push_back(std::move(pr));
    }
    res.seconds = since(t0);
    return res;
}

void write_simulation_tables(const fs::path& dir, const std::string& stem, const SimulateResult& result,
                             const std::string& label) {
    fs::create_directories(dir);
    std::string att_csv, fail_csv, inc_csv, preg_csv;
    std::ostringstream att_md, fail_md, inc_md, preg_md;
    bool first = true;
    for (const auto& p : result.panels) {
        std::vector<SubgroupReport> att;
        if (const auto* rp = published_panel(reference::kNStepTw2006, p.panel)) att.push_back(published_report(*rp));
        att.push_back(p.attendance);
        std::ostringstream s;
        write_reports_csv(s, att);
        att_csv += prefix_csv(s.str(), "panel", p.panel.label(), first);
        write_reports_markdown(att_md, "N-step attendance, " + p.panel.label(), att);

        s.str("");
        write_reports_csv(s, std::span(&p.failure, 1));
        fail_csv += prefix_csv(s.str(), "panel", p.panel.label(), first);
        write_reports_markdown(fail_md, "N-step school failure, " + p.panel.label(), std::span(&p.failure, 1));

        s.str("");
        write_value_csv(s, std::span(&p.income, 1));
        inc_csv += prefix_csv(s.str(), "panel", p.panel.label(), first);
        write_value_markdown(inc_md, "N-step income, " + p.panel.label(), std::span(&p.income, 1));

        if (p.pregnancy) {
            s.str("");
            write_pregnancy_csv(s, std::span(&*p.pregnancy, 1));
            preg_csv += prefix_csv(s.str(), "panel", p.panel.label(), preg_csv.empty());
            write_pregnancy_markdown(preg_md, "Pregnancy by mother's age, " + p.panel.label(),
                                     std::span(&*p.pregnancy, 1));
        }
        first = false;
    }
    const auto put = [&](const std::string& name, const std::string& text) {
        auto out = open_out(dir / (stem + name));
        out << text;
    };
    put("_attendance.csv", att_csv);
    put("_attendance.md", att_md.str());
    put("_failure.csv", fail_csv);
    put("_failure.md", fail_md.str());
    put("_income.csv", inc_csv);
    put("_income.md", inc_md.str());
    if (!preg_csv.empty()) {
        put("_pregnancy.csv", preg_csv);
        put("_pregnancy.md", preg_md.str());
    }
    std::ostringstream sum;
    sum << "model: " << label << '\n';
    for (const auto& p : result.panels)
        sum << p.panel.label() << ": households " << p.households << ", skipped " << p.skipped << '\n';
    sum << "skipped households: " << result.skipped << '\n';
    for (const auto& p : result.panels)
        for (const auto& e : p.errors) sum << "error: " << e << '\n';
    put("_summary.txt", sum.str());
}

// ---------------------------------------------------------------------------
// Full study

namespace {

struct Corpus {
    Dataset train, test, households_train, households_test, initial;
};

Dataset load_table(const fs::path& dir, const std::string& file) {
    const auto path = dir / file;
    return load_rows(path, read_schema(resolve_schema_path(path, std::nullopt))).data;
}

Corpus load_corpus(const fs::path& dir) {
    Corpus c;
    c.train = load_table(dir, "train.csv");
    c.test = load_table(dir, "test.csv");
    c.households_train = load_table(dir, "households_train.csv");
    c.households_test = load_table(dir, "households_test.csv");
    c.initial = load_table(dir, "initial_states.csv");
    return c;
}

struct Writer {
    fs::path dir;
    std::vector<fs::path>* outputs;

    std::ofstream open(const std::string& name) {
        outputs->push_back(dir / name);
        return open_out(dir / name);
    }
};

std::string name_of(LearnerId id) { return std::string(display_name(id)); }

}  // namespace

ReproSummary run_repro(const ReproOptions& o, std::ostream& log) {
    ReproSummary sum;
    const auto step = [&](std::string name, Clock::time_point t0) {
        sum.timings.push_back({std::move(name), since(t0)});
        log << sum.timings.back().step << ": " << format_fixed(sum.timings.back().seconds, 2) << " s\n" << std::flush;
    };
    fs::create_directories(o.out);
    Writer tables{o.out / "tables", &sum.outputs};
    fs::create_directories(tables.dir);

    // data
    auto t0 = Clock::now();
    fs::path data_dir;
    if (o.data) {
        data_dir = *o.data;
    } else {
        SynthSpec spec;
        spec.seed = o.seed;
        spec.n_households = o.households;
        data_dir = o.out / "data";
        write_corpus(generate(spec), data_dir);
        step("generate corpus", t0);
        t0 = Clock::now();
    }
    const auto corpus = load_corpus(data_dir);
    step("ingest corpus", t0);
    log << "training rows " << corpus.train.rows() << ", test rows " << corpus.test.rows() << '\n';

    // training
    std::map<Outcome, std::vector<std::pair<LearnerId, FittedModel>>> models;
    for (std::size_t oi = 0; oi < kOutcomes.size(); ++oi) {
        const auto outcome = kOutcomes[oi];
        const auto& data = household_level(outcome) ? corpus.households_train : corpus.train;
        const auto learners = learners_for(outcome, o.learners);
        for (std::size_t li = 0; li < learners.size(); ++li) {
            const auto id = learners[li];
            TrainOptions to;
            to.learner = id;
            to.outcome = outcome;
            to.seed = stream_seed(o.seed, 100 + 10 * oi + static_cast<std::size_t>(id));
            to.folds = o.folds;
            if (o.resample && task_of(outcome) == Task::classification) to.resample = *o.resample;
            to.threads = o.threads;
            const auto tag = std::string(to_string(outcome)) + ' ' + std::string(to_string(id));
            try {
                auto res = train_model(data, to);
                const auto dir = o.out / "models" / std::string(to_string(outcome));
                save_model(res.model, dir / (std::string(to_string(id)) + ".model"));
                {
                    auto cv = open_out(dir / (std::string(to_string(id)) + "_cv.csv"));
                    write_cv_csv(cv, res.cv);
                }
                if (id == LearnerId::rf) sum.rf_train_seconds += res.seconds;
                if (!res.model.converged()) {
                    sum.converged = false;
                    log << "warning: " << tag << " did not converge\n";
                }
                sum.timings.push_back({"train " + tag, res.seconds});
                log << "train " << tag << " [" << res.cv.best_params().describe(id)
                    << "]: " << format_fixed(res.seconds, 2) << " s\n"
                    << std::flush;
                models[outcome].emplace_back(id, std::move(res.model));
            } catch (const TrainingError& e) {
                log << "train " << tag << " failed: " << e.what() << '\n';
            }
        }
        if (models[outcome].empty())
            throw TrainingError("no learner could fit the " + std::string(to_string(outcome)) + " outcome");
    }

    // forest prediction time over the full tables
    t0 = Clock::now();
    for (const auto& [outcome, list] : models)
        for (const auto& [id, m] : list) {
            if (id != LearnerId::rf) continue;
            if (household_level(outcome)) {
                m.predict(corpus.households_train);
                m.predict(corpus.households_test);
            } else {
                m.predict(corpus.train);
                m.predict(corpus.test);
            }
        }
    sum.rf_predict_seconds = since(t0);
    step("forest prediction, full corpus", t0);

    // one-step attendance
    t0 = Clock::now();
    const auto& attendance = models[Outcome::attendance];
    {
        const auto test = panel_rows(corpus.test, test_panel());
        std::vector<SubgroupReport> reports{published_report(reference::kOneStepTw2006)};
        std::vector<ModelScore> scores;
        for (const auto& [id, m] : attendance) reports.push_back(attendance_fit(m, test, name_of(id)));
        for (const auto& r : reports) scores.push_back({r.label, r.mae, r.rmse, r.mean_accuracy});
        auto csv = tables.open("one_step_attendance.csv");
        write_reports_csv(csv, reports);
        auto md = tables.open("one_step_attendance.md");
        write_reports_markdown(md, "One-step-ahead attendance, treatment 1998", reports);
        auto acc = tables.open("one_step_accuracy.md");
        write_accuracy_markdown(acc, "Accuracy of one-step-ahead attendance", std::span(reports).subspan(1));
        auto cmp_csv = tables.open("one_step_comparison.csv");
        write_comparison_csv(cmp_csv, scores);
        auto cmp = tables.open("one_step_comparison.md");
        write_comparison_markdown(cmp, "One-step-ahead model comparison", scores);
    }

    // within-sample attendance fit
    {
        std::string csv;
        std::ostringstream md;
        std::vector<ModelScore> scores{pooled_score(
            "TW2006", std::vector<SubgroupReport>{published_report(reference::kWithinSampleTw2006[0]),
                                                  published_report(reference::kWithinSampleTw2006[1]),
                                                  published_report(reference::kWithinSampleTw2006[2])})};
        std::map<LearnerId, std::vector<SubgroupReport>> per_model;
        bool first = true;
        for (std::size_t pi = 0; pi < training_panels().size(); ++pi) {
            const auto& panel = training_panels()[pi];
            const auto rows = panel_rows(corpus.train, panel);
            std::vector<SubgroupReport> reports{published_report(reference::kWithinSampleTw2006[pi])};
            for (const auto& [id, m] : attendance) {
                reports.push_back(attendance_fit(m, rows, name_of(id)));
                per_model[id].push_back(reports.back());
            }
            std::ostringstream s;
            write_reports_csv(s, reports);
            csv += prefix_csv(s.str(), "panel", panel.label(), first);
            first = false;
            write_reports_markdown(md, "Within-sample attendance, " + panel.label(), reports);
        }
        for (const auto& [id, m] : attendance) scores.push_back(pooled_score(name_of(id), per_model[id]));
        tables.open("within_sample_attendance.csv") << csv;
        tables.open("within_sample_attendance.md") << md.str();
        auto cmp_csv = tables.open("within_sample_comparison.csv");
        write_comparison_csv(cmp_csv, scores);
        auto cmp = tables.open("within_sample_comparison.md");
        write_comparison_markdown(cmp, "Within-sample model comparison (24 subgroup errors pooled)", scores);
    }
    step("attendance reports", t0);

    // submodel selection
    t0 = Clock::now();
    const auto select = [&](Outcome outcome, std::vector<SplitScore>& rows) {
        std::vector<Candidate> cands;
        for (std::size_t i = 0; i < models[outcome].size(); ++i) {
            const auto& r = rows[rows.size() - models[outcome].size() + i];
            cands.push_back({models[outcome][i].first, r.train_mae, r.train_rmse});
        }
        const auto best = model_select(cands);
        for (std::size_t i = 0; i < models[outcome].size(); ++i)
            rows[rows.size() - models[outcome].size() + i].selected = models[outcome][i].first == best;
        return best;
    };
    {
        std::vector<SplitScore> rows;
        const auto& ref = reference::kIncome[0];
        rows.push_back({std::string(ref.model), ref.train_mae, ref.train_rmse, ref.test_mae, ref.test_rmse, false, true});
        for (const auto& [id, m] : models[Outcome::income]) {
            const auto tr = income_fit(m, corpus.households_train);
            const auto te = income_fit(m, corpus.households_test);
            rows.push_back({name_of(id), tr.mae, tr.rmse, te.mae, te.rmse});
        }
        sum.income = select(Outcome::income, rows);
        auto csv = tables.open("income_models.csv");
        write_split_csv(csv, rows);
        auto md = tables.open("income_models.md");
        write_split_markdown(md, "Income model comparison", rows, 0);
    }
    {
        std::vector<SplitScore> rows;
        const auto test_hh = panel_rows(corpus.households_test, test_panel());
        for (const auto& [id, m] : models[Outcome::pregnancy]) {
            std::vector<double> errs;
            for (const auto& panel : training_panels())
                for (double e : band_errors(pregnancy_fit(m, panel_rows(corpus.households_train, panel), "")))
                    errs.push_back(e);
            const auto tr = mae_rmse(errs);
            const auto te = mae_rmse(band_errors(pregnancy_fit(m, test_hh, "")));
            rows.push_back({name_of(id), tr.mae, tr.rmse, te.mae, te.rmse});
        }
        sum.pregnancy = select(Outcome::pregnancy, rows);
        auto csv = tables.open("pregnancy_models.csv");
        write_split_csv(csv, rows);
        auto md = tables.open("pregnancy_models.md");
        write_split_markdown(md, "Pregnancy model comparison (age-band rate errors)", rows, 2);
    }
    {
        std::vector<SplitScore> rows;
        const auto& ref = reference::kFailure[0];
        rows.push_back({std::string(ref.model), ref.train_mae, ref.train_rmse, ref.test_mae, ref.test_rmse, false, true});
        const auto test = panel_rows(corpus.test, test_panel());
        for (const auto& [id, m] : models[Outcome::failure]) {
            std::vector<SubgroupReport> reps;
            for (const auto& panel : training_panels()) reps.push_back(failure_fit(m, panel_rows(corpus.train, panel), ""));
            const auto tr = pooled_score("", reps);
            const auto te = failure_fit(m, test, "");
            rows.push_back({name_of(id), tr.mae, tr.rmse, te.mae, te.rmse});
        }
        sum.failure = select(Outcome::failure, rows);
        auto csv = tables.open("failure_models.csv");
        write_split_csv(csv, rows);
        auto md = tables.open("failure_models.md");
        write_split_markdown(md, "School failure model comparison (subgroup rate errors)", rows, 2);
    }
    step("submodel selection", t0);
    log << "selected: income " << to_string(sum.income) << ", pregnancy " << to_string(sum.pregnancy) << ", failure "
        << to_string(sum.failure) << '\n';

    // N-step simulation
    t0 = Clock::now();
    const auto shared = [&](Outcome outcome, LearnerId id) {
        for (const auto& [lid, m] : models[outcome])
            if (lid == id) return std::make_shared<const FittedModel>(m);
        throw BindingError("no fitted " + std::string(to_string(id)) + " model for " + std::string(to_string(outcome)));
    };
    SimConfig base;
    base.bindings.income = bind_model("income", shared(Outcome::income, sum.income));
    base.bindings.pregnancy = bind_model("pregnancy", shared(Outcome::pregnancy, sum.pregnancy));
    base.bindings.failure = bind_model("failure", shared(Outcome::failure, sum.failure));
    base.boy_ratio = boy_ratio(corpus.train);
    base.seed = stream_seed(o.seed, 7);
    base.mode = o.expected ? Realization::expected : Realization::stochastic;

    SimulateInputs in;
    in.initial = corpus.initial;
    in.actual = corpus.train;
    in.households = corpus.households_train;

    // headline attendance learner: lowest one-step MAE
    LearnerId headline = attendance.front().first;
    {
        const auto test = panel_rows(corpus.test, test_panel());
        double best = std::numeric_limits<double>::infinity();
        for (const auto& [id, m] : attendance) {
            const auto mae = attendance_fit(m, test, "").mae;
            if (mae < best) {
                best = mae;
                headline = id;
            }
        }
    }

    std::map<LearnerId, SimulateResult> runs;
    for (const auto& [id, m] : attendance) {
        auto cfg = base;
        cfg.bindings.attendance = bind_model("attendance", shared(Outcome::attendance, id));
        if (id == headline) {
            auto traj = tables.open("trajectories.csv");
            runs[id] = simulate_panels(in, cfg, name_of(id), &traj);
        } else {
            runs[id] = simulate_panels(in, cfg, name_of(id), nullptr);
        }
        log << "simulate " << to_string(id) << ": " << format_fixed(runs[id].seconds, 2) << " s, skipped "
            << runs[id].skipped << '\n'
            << std::flush;
    }
    {
        std::string csv;
        std::ostringstream md;
        std::vector<ModelScore> scores{pooled_score(
            "TW2006", std::vector<SubgroupReport>{published_report(reference::kNStepTw2006[0]),
                                                  published_report(reference::kNStepTw2006[1]),
                                                  published_report(reference::kNStepTw2006[2])})};
        scores.back().accuracy = kNaN;
        std::map<LearnerId, std::vector<SubgroupReport>> per_model;
        bool first = true;
        for (std::size_t pi = 0; pi < training_panels().size(); ++pi) {
            const auto& panel = training_panels()[pi];
            std::vector<SubgroupReport> reports{published_report(reference::kNStepTw2006[pi])};
            for (const auto& [id, m] : attendance) {
                reports.push_back(runs[id].panels[pi].attendance);
                per_model[id].push_back(reports.back());
            }
            std::ostringstream s;
            write_reports_csv(s, reports);
            csv += prefix_csv(s.str(), "panel", panel.label(), first);
            first = false;
            write_reports_markdown(md, "N-step attendance, " + panel.label(), reports);
        }
        for (const auto& [id, m] : attendance) scores.push_back(pooled_score(name_of(id), per_model[id]));
        tables.open("nstep_attendance.csv") << csv;
        tables.open("nstep_attendance.md") << md.str();
        auto cmp_csv = tables.open("nstep_comparison.csv");
        write_comparison_csv(cmp_csv, scores);
        auto cmp = tables.open("nstep_comparison.md");
        write_comparison_markdown(cmp, "N-step model comparison (24 subgroup errors pooled)", scores);
    }
    const auto& head = runs[headline];
    write_simulation_tables(tables.dir, "nstep_" + std::string(to_string(headline)), head, name_of(headline));
    for (const char* s : {"_attendance.csv", "_attendance.md", "_failure.csv", "_failure.md", "_income.csv",
                          "_income.md", "_pregnancy.csv", "_pregnancy.md", "_summary.txt"})
        sum.outputs.push_back(tables.dir / ("nstep_" + std::string(to_string(headline)) + s));
    sum.skipped = 0;
    for (const auto& [id, r] : runs) sum.skipped += r.skipped;
    step("N-step simulation", t0);

    // summary
    auto md = tables.open("summary.md");
    md << "# Study summary\n\n";
    md << "- training rows: " << corpus.train.rows() << "; test rows: " << corpus.test.rows() << '\n';
    md << "- selected submodels: income " << display_name(sum.income) << ", pregnancy "
       << display_name(sum.pregnancy) << ", failure " << display_name(sum.failure) << '\n';
    md << "- headline attendance learner: " << display_name(headline) << '\n';
    md << "- realization: " << (o.expected ? "expected" : "stochastic") << '\n';
    md << "- skipped households: " << sum.skipped << '\n';
    md << "- all linear fits converged: " << (sum.converged ? "yes" : "no") << '\n';
    md << "- forest training (all outcomes, with cross-validation): " << format_fixed(sum.rf_train_seconds, 2)
       << " s\n";
    md << "- forest prediction over the full corpus: " << format_fixed(sum.rf_predict_seconds, 3) << " s\n\n";
    md << "TW2006 rows are published reference values, reproduced as constants and never recomputed. "
          "Their MAE/RMSE (one-step "
       << format_fixed(mae_rmse(reference::kOneStepTw2006.error).mae, 2) << '/'
       << format_fixed(mae_rmse(reference::kOneStepTw2006.error).rmse, 2)
       << ") are computed from the published subgroup errors.\n\n## Timings\n\n| Step | Seconds |\n|---|---:|\n";
    for (const auto& t : sum.timings) md << "| " << t.step << " | " << format_fixed(t.seconds, 2) << " |\n";
    return sum;
}

}  // namespace cctml::app
