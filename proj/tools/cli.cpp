#include "cli.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "cctml/error.hpp"
#include "cctml/reference.hpp"
#include "cctml/synth.hpp"
#include "json.hpp"
#include "pipeline.hpp"
#include "text.hpp"

#ifndef CCTML_VERSION
#define CCTML_VERSION "0.0.0"
#endif

namespace cctml::app {

namespace {

using json = nlohmann::ordered_json;
using Clock = std::chrono::steady_clock;

// Flags shared by several subcommands.
struct Common {
    std::string out;
    std::uint64_t seed = 0;
    std::string data;
    std::string schema;
    unsigned threads = 0;
};

struct Run {
    std::string subcommand;
    std::vector<std::string> args;
    json inputs = json::array();
    json outputs = json::array();
    json timings = json::object();
    json config = json::object();
    bool converged = true;
};

void add_input(Run& run, const fs::path& p) {
    json j{{"path", p.string()}};
    std::error_code ec;
    const auto size = fs::file_size(p, ec);
    if (!ec) j["bytes"] = size;
    run.inputs.push_back(j);
}

void write_manifest(const fs::path& out, const Run& run, int code) {
    json m;
    m["tool"] = "cctml";
    m["version"] = CCTML_VERSION;
    m["subcommand"] = run.subcommand;
    m["arguments"] = run.args;
    m["config"] = run.config;
    m["inputs"] = run.inputs;
    m["outputs"] = run.outputs;
    m["timings_seconds"] = run.timings;
    m["exit_code"] = code;
    fs::create_directories(out);
    std::ofstream f(out / "manifest.json");
    f << m.dump(2) << '\n';
}

std::string rel(const fs::path& p, const fs::path& base) { return fs::relative(p, base).generic_string(); }

std::ofstream open_out(const fs::path& p) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream f(p, std::ios::binary);
    if (!f) throw InputError("cannot write " + p.string());
    return f;
}

// key=value config lines become flags unless the flag is already given.
std::vector<std::string> merge_config(std::vector<std::string> args) {
    std::string path;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
        else if (args[i].starts_with("--config=")) path = args[i].substr(9);
    }
    if (path.empty()) return args;
    std::ifstream in(path);
    if (!in) throw InputError("cannot open config file " + path);
    const auto given = [&](const std::string& key) {
        return std::any_of(args.begin(), args.end(), [&](const std::string& a) {
            return a == "--" + key || a.starts_with("--" + key + "=");
        });
    };
    std::vector<std::string> extra;
    std::string line;
    std::size_t no = 0;
    while (std::getline(in, line)) {
        ++no;
        const auto t = detail::trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos) throw ParseError(path + ": expected key=value", no);
        const auto key = detail::trim(std::string_view(t).substr(0, eq));
        const auto value = detail::trim(std::string_view(t).substr(eq + 1));
        if (given(key)) continue;
        if (key == "expected" || key == "no-trajectories") {
            if (value == "true" || value == "1" || value == "yes") extra.push_back("--" + key);
            continue;
        }
        extra.push_back("--" + key + "=" + value);
    }
    args.insert(args.end(), extra.begin(), extra.end());
    return args;
}

std::vector<LearnerId> parse_learners(const std::string& text) {
    std::vector<LearnerId> out;
    for (const auto& t : detail::split(text, ','))
        if (!detail::trim(t).empty()) out.push_back(parse_learner(detail::trim(t)));
    if (out.empty()) throw ContractError("no learner given");
    return out;
}

Dataset load(const std::string& data, const std::optional<fs::path>& schema, Run& run) {
    const fs::path p(data);
    const auto sp = resolve_schema_path(p, schema);
    add_input(run, p);
    add_input(run, sp);
    return load_rows(p, read_schema(sp)).data;
}

std::optional<fs::path> opt_path(const std::string& s) {
    if (s.empty()) return std::nullopt;
    return fs::path(s);
}

// ---------------------------------------------------------------------------
// Subcommands

int cmd_generate(const Common& c, std::size_t households, Run& run, std::ostream& out) {
    const auto t0 = Clock::now();
    SynthSpec spec;
    spec.seed = c.seed;
    spec.n_households = households;
    const auto corpus = generate(spec);
    write_corpus(corpus, c.out);
    for (const char* f : {"train.csv", "test.csv", "households_train.csv", "households_test.csv", "initial_states.csv",
                          "children.schema", "households.schema", "initial_states.schema", "mechanism.txt"})
        run.outputs.push_back(f);
    run.timings["generate"] = std::chrono::duration<double>(Clock::now() - t0).count();
    out << "train rows " << corpus.train.rows() << ", test rows " << corpus.test.rows() << ", households "
        << corpus.initial.rows() << '\n';
    return kOk;
}

struct TrainFlags {
    std::string learner;
    std::string outcome = "attendance";
    std::size_t folds = 10;
    std::string grid;
    std::string resample = "none";
    std::string cluster;
};

int cmd_train(const Common& c, const TrainFlags& f, Run& run, std::ostream& out) {
    const auto data = load(c.data, opt_path(c.schema), run);
    TrainOptions o;
    o.learner = parse_learner(f.learner);
    o.outcome = parse_outcome(f.outcome);
    o.seed = c.seed;
    o.folds = f.folds;
    o.grid = parse_grid(f.grid);
    o.resample = parse_resample(f.resample);
    o.cluster = f.cluster;
    o.threads = c.threads;
    const auto res = train_model(data, o);
    const fs::path dir(c.out);
    const auto model_name = std::string(to_string(o.outcome)) + '_' + std::string(to_string(o.learner)) + ".model";
    save_model(res.model, dir / model_name);
    {
        auto cv = open_out(dir / "cv_report.csv");
        write_cv_csv(cv, res.cv);
    }
    run.outputs.push_back(model_name);
    run.outputs.push_back("cv_report.csv");
    run.timings["train"] = res.seconds;
    run.converged = res.model.converged();
    out << "selected " << res.cv.best_params().describe(o.learner) << " (" << to_string(res.cv.metric) << ' '
        << format_fixed(res.cv.cells[res.cv.best].score, 4) << ")\n";
    if (!run.converged) {
        out << "warning: the final fit did not converge\n";
        return kNotConverged;
    }
    return kOk;
}

int cmd_evaluate(const Common& c, const std::vector<std::string>& model_paths, Run& run, std::ostream& out) {
    const auto t0 = Clock::now();
    std::vector<std::pair<std::string, FittedModel>> models;
    for (const auto& p : model_paths) {
        add_input(run, p);
        auto m = load_model(p);
        std::string label(display_name(m.learner));
        const bool dup = std::any_of(models.begin(), models.end(), [&](const auto& e) { return e.first == label; });
        if (dup) label += " (" + fs::path(p).stem().string() + ")";
        if (!models.empty() && models.front().second.target != m.target)
            throw ContractError("models predict different targets: '" + models.front().second.target + "' and '" +
                                m.target + "'");
        run.converged = run.converged && m.converged();
        models.emplace_back(std::move(label), std::move(m));
    }
    const auto data = load(c.data, opt_path(c.schema), run);
    const auto outcome = outcome_for_target(models.front().second.target);
    const fs::path dir(c.out);
    const auto put = [&](const std::string& name) {
        run.outputs.push_back(name);
        return open_out(dir / name);
    };

    std::vector<ModelScore> scores;
    int decimals = 2;
    switch (outcome) {
        case Outcome::attendance: {
            std::vector<SubgroupReport> reports;
            {
                const auto& rp = reference::kOneStepTw2006;
                std::array<double, 8> a{}, p{}, e{};
                std::copy(rp.actual.begin(), rp.actual.end(), a.begin());
                std::copy(rp.predicted.begin(), rp.predicted.end(), p.begin());
                std::copy(rp.error.begin(), rp.error.end(), e.begin());
                reports.push_back(fixed_report("TW2006", a, p, e));
            }
            for (const auto& [label, m] : models) reports.push_back(attendance_fit(m, data, label));
            for (const auto& r : reports) scores.push_back({r.label, r.mae, r.rmse, r.mean_accuracy});
            auto csv = put("attendance_report.csv");
            write_reports_csv(csv, reports);
            auto md = put("attendance_report.md");
            write_reports_markdown(md, "One-step-ahead attendance", reports);
            auto acc = put("attendance_accuracy.md");
            write_accuracy_markdown(acc, "Accuracy of one-step-ahead attendance", std::span(reports).subspan(1));
            break;
        }
        case Outcome::failure: {
            std::vector<SubgroupReport> reports;
            for (const auto& [label, m] : models) reports.push_back(failure_fit(m, data, label));
            for (const auto& r : reports) scores.push_back({r.label, r.mae, r.rmse, std::nan("")});
            auto csv = put("failure_report.csv");
            write_reports_csv(csv, reports);
            auto md = put("failure_report.md");
            write_reports_markdown(md, "School failure", reports);
            break;
        }
        case Outcome::pregnancy: {
            std::vector<PregnancyReport> reports;
            for (const auto& [label, m] : models) {
                reports.push_back(pregnancy_fit(m, data, label));
                std::vector<double> e;
                for (const auto& b : reports.back().bands)
                    if (!std::isnan(b.error)) e.push_back(b.error);
                const auto s = mae_rmse(e);
                scores.push_back({label, s.mae, s.rmse, std::nan("")});
            }
            auto csv = put("pregnancy_report.csv");
            write_pregnancy_csv(csv, reports);
            auto md = put("pregnancy_report.md");
            write_pregnancy_markdown(md, "Pregnancy by mother's age", reports);
            break;
        }
        case Outcome::income:
            decimals = 0;
            for (const auto& [label, m] : models) {
                const auto s = income_fit(m, data);
                scores.push_back({label, s.mae, s.rmse, std::nan("")});
            }
            break;
    }
    auto cmp_csv = put("comparison.csv");
    write_comparison_csv(cmp_csv, scores);
    auto cmp = put("comparison.md");
    write_comparison_markdown(cmp, "Model comparison", scores, decimals);
    write_comparison_markdown(out, "Model comparison", scores, decimals);
    run.timings["evaluate"] = std::chrono::duration<double>(Clock::now() - t0).count();
    return run.converged ? kOk : kNotConverged;
}

struct SimFlags {
    std::string bindings;
    std::string actual;
    std::string households;
    std::string panels = "control:1997,control:1998,treatment:1997";
    bool expected = false;
    bool no_trajectories = false;
    double boy_ratio = -1.0;
};

int cmd_simulate(const Common& c, const SimFlags& f, Run& run, std::ostream& out) {
    const auto t0 = Clock::now();
    add_input(run, f.bindings);
    const auto specs = read_binding_specs(f.bindings);
    SimConfig cfg;
    cfg.bindings = make_bindings(specs, fs::path(f.bindings).parent_path());
    cfg.seed = c.seed;
    cfg.mode = f.expected ? Realization::expected : Realization::stochastic;

    SimulateInputs in;
    in.initial = load(c.data, opt_path(c.schema), run);
    in.actual = load(f.actual, std::nullopt, run);
    if (!f.households.empty()) in.households = load(f.households, std::nullopt, run);
    in.panels.clear();
    for (const auto& p : detail::split(f.panels, ','))
        if (!detail::trim(p).empty()) in.panels.push_back(parse_panel(detail::trim(p)));
    if (in.panels.empty()) throw ContractError("no simulation panel given");
    cfg.boy_ratio = f.boy_ratio >= 0 ? f.boy_ratio : boy_ratio(in.actual);
    cfg.validate();

    const fs::path dir(c.out);
    std::optional<std::ofstream> traj;
    if (!f.no_trajectories) {
        traj.emplace(open_out(dir / "trajectories.csv"));
        run.outputs.push_back("trajectories.csv");
    }
    const std::string label = specs.count("attendance") ? fs::path(specs.at("attendance")).stem().string() : "model";
    const auto res = simulate_panels(in, cfg, label, traj ? &*traj : nullptr);
    write_simulation_tables(dir, "nstep", res, label);
    for (const char* s : {"_attendance.csv", "_attendance.md", "_failure.csv", "_failure.md", "_income.csv",
                          "_income.md", "_summary.txt"})
        run.outputs.push_back(std::string("nstep") + s);
    if (in.households) {
        run.outputs.push_back("nstep_pregnancy.csv");
        run.outputs.push_back("nstep_pregnancy.md");
    }
    for (const auto& p : res.panels)
        out << p.panel.label() << ": MAE " << format_fixed(p.attendance.mae, 2) << ", RMSE "
            << format_fixed(p.attendance.rmse, 2) << '\n';
    out << "skipped households: " << res.skipped << '\n';
    run.timings["simulate"] = std::chrono::duration<double>(Clock::now() - t0).count();
    run.config["boy_ratio"] = cfg.boy_ratio;
    return kOk;
}

struct ReproFlags {
    std::size_t households = 0;
    std::size_t folds = 10;
    std::string learners;
    std::string resample;
    bool expected = false;
};

int cmd_repro(const Common& c, const ReproFlags& f, Run& run, std::ostream& out) {
    const auto t0 = Clock::now();
    ReproOptions o;
    o.out = c.out;
    o.seed = c.seed;
    o.households = f.households;
    if (!c.data.empty()) {
        if (!fs::is_directory(c.data)) throw InputError("--data must name a corpus directory for repro");
        o.data = fs::path(c.data);
        add_input(run, o.data->string());
    }
    o.folds = f.folds;
    if (!f.learners.empty()) o.learners = parse_learners(f.learners);
    if (!f.resample.empty()) o.resample = parse_resample(f.resample);
    o.expected = f.expected;
    o.threads = c.threads;
    const auto sum = run_repro(o, out);
    for (const auto& p : sum.outputs) run.outputs.push_back(rel(p, o.out));
    for (const auto& t : sum.timings) run.timings[t.step] = t.seconds;
    run.timings["forest training"] = sum.rf_train_seconds;
    run.timings["forest prediction"] = sum.rf_predict_seconds;
    run.timings["total"] = std::chrono::duration<double>(Clock::now() - t0).count();
    run.config["selected"] = {{"income", to_string(sum.income)},
                              {"pregnancy", to_string(sum.pregnancy)},
                              {"failure", to_string(sum.failure)}};
    run.converged = sum.converged;
    out << "skipped households: " << sum.skipped << '\n';
    out << "forest training " << format_fixed(sum.rf_train_seconds, 1) << " s, forest prediction "
        << format_fixed(sum.rf_predict_seconds, 2) << " s\n";
    return sum.converged ? kOk : kNotConverged;
}

}  // namespace

int run_cli(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Machine-learning and microsimulation toolkit for conditional cash transfer studies", "cctml"};
    app.require_subcommand(1);
    app.set_version_flag("--version", CCTML_VERSION);

    Common c;
    std::string config;
    const auto common = [&](CLI::App* s, bool data, bool seed_required) {
        s->add_option("--out", c.out, "Output directory")->required();
        auto* seed = s->add_option("--seed", c.seed, "Master seed");
        if (seed_required) seed->required();
        if (data) {
            s->add_option("--data", c.data, "Input CSV")->required()->check(CLI::ExistingFile);
            s->add_option("--schema", c.schema, "Schema sidecar (default: next to the data)")
                ->check(CLI::ExistingFile);
        }
        s->add_option("--threads", c.threads, "Worker threads (0: all cores)");
        s->add_option("--config", config, "key=value file mirroring the flags");
    };

    std::size_t households = 0;
    auto* gen = app.add_subcommand("generate", "Write a synthetic corpus");
    common(gen, false, true);
    gen->add_option("--households", households, "Exact household count (0: default row targets)");

    TrainFlags tf;
    auto* train = app.add_subcommand("train", "Cross-validate a learner and fit the best cell");
    common(train, true, true);
    train->add_option("--learner", tf.learner, "cart, c45, lasso, rf, adaboost or logit")->required();
    train->add_option("--outcome,--task", tf.outcome, "attendance, income, pregnancy or failure");
    train->add_option("--cv-folds", tf.folds, "Cross-validation folds");
    train->add_option("--grid", tf.grid, "Parameter grid, e.g. \"max_depth=3,6 min_node=5,20\"");
    train->add_option("--resample", tf.resample, "none, under[:ratio], over[:ratio] or smote[:ratio[:k]]");
    train->add_option("--cluster", tf.cluster, "Keep rows with equal values of this column in one fold");

    std::vector<std::string> model_paths;
    auto* eval = app.add_subcommand("evaluate", "Score fitted models on a data set");
    common(eval, true, false);
    eval->add_option("--model", model_paths, "Model file (repeatable)")->required()->check(CLI::ExistingFile);

    SimFlags sf;
    auto* sim = app.add_subcommand("simulate", "N-step simulation of initial household states");
    common(sim, true, true);
    sim->add_option("--sim-bindings", sf.bindings, "Binding file: submodel=model-path or const:value")
        ->required()
        ->check(CLI::ExistingFile);
    sim->add_option("--actual", sf.actual, "Observed child rows")->required()->check(CLI::ExistingFile);
    sim->add_option("--households", sf.households, "Observed household rows (pregnancy report)")
        ->check(CLI::ExistingFile);
    sim->add_option("--panels", sf.panels, "Comma-separated group:year panels");
    sim->add_flag("--expected", sf.expected, "Modal outcomes instead of random draws");
    sim->add_flag("--no-trajectories", sf.no_trajectories, "Skip the trajectory dump");
    sim->add_option("--boy-ratio", sf.boy_ratio, "Newborn boy probability (default: from --actual)");

    ReproFlags rf;
    auto* repro = app.add_subcommand("repro", "Generate, train, evaluate and simulate in one run");
    repro->add_option("--out", c.out, "Output directory")->required();
    repro->add_option("--seed", c.seed, "Master seed")->required();
    repro->add_option("--data", c.data, "Existing corpus directory instead of a synthetic one");
    repro->add_option("--households", rf.households, "Synthetic household count (0: default row targets)");
    repro->add_option("--cv-folds", rf.folds, "Cross-validation folds");
    repro->add_option("--learner", rf.learners, "Comma-separated learners (default: all)");
    repro->add_option("--resample", rf.resample, "Resampling for classification outcomes");
    repro->add_flag("--expected", rf.expected, "Modal outcomes instead of random draws");
    repro->add_option("--threads", c.threads, "Worker threads (0: all cores)");
    repro->add_option("--config", config, "key=value file mirroring the flags");

    Run run;
    try {
        args = merge_config(std::move(args));
        run.args = args;
        std::reverse(args.begin(), args.end());
        app.parse(args);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::CallForVersion&) {
        out << CCTML_VERSION << '\n';
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kInputError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kInputError;
    }

    auto* sub = app.get_subcommands().front();
    run.subcommand = sub->get_name();
    run.config["seed"] = c.seed;
    int code = kOk;
    try {
        if (sub == gen) code = cmd_generate(c, households, run, out);
        else if (sub == train) code = cmd_train(c, tf, run, out);
        else if (sub == eval) code = cmd_evaluate(c, model_paths, run, out);
        else if (sub == sim) code = cmd_simulate(c, sf, run, out);
        else code = cmd_repro(c, rf, run, out);
    } catch (const TrainingError& e) {
        err << "training error: " << e.what() << '\n';
        code = kTrainingError;
    } catch (const BindingError& e) {
        err << "binding error: " << e.what() << '\n';
        code = kTrainingError;
    } catch (const ParseError& e) {
        err << "input error: " << e.what() << '\n';
        code = kInputError;
    } catch (const InputError& e) {
        err << "input error: " << e.what() << '\n';
        code = kInputError;
    } catch (const SchemaError& e) {
        err << "schema error: " << e.what() << '\n';
        code = kInputError;
    } catch (const ContractError& e) {
        err << "error: " << e.what() << '\n';
        code = kInputError;
    } catch (const fs::filesystem_error& e) {
        err << "file error: " << e.what() << '\n';
        code = kInputError;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << '\n';
        code = kInternal;
    }
    if (!c.out.empty() && (code == kOk || code == kNotConverged)) write_manifest(c.out, run, code);
    return code;
}

}  // namespace cctml::app
