#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "cctml/error.hpp"
#include "cctml/eval.hpp"
#include "cctml/learners.hpp"
#include "cctml/simulate.hpp"
#include "cctml/synth.hpp"
#include "cli.hpp"
#include "pipeline.hpp"

namespace py = pybind11;
using namespace cctml;
namespace fs = std::filesystem;

namespace {

std::vector<std::string> default_features(const Dataset& data, std::string_view target) {
    try {
        return app::features_of(app::outcome_for_target(target));
    } catch (const ContractError&) {
        return data.schema().names_with_role(ColumnRole::feature);
    }
}

LearnerParams params_from(const py::kwargs& kw) {
    std::string text;
    for (const auto& [k, v] : kw) {
        if (!text.empty()) text += ' ';
        text += py::str(k).cast<std::string>() + '=' + py::str(v).cast<std::string>();
    }
    return LearnerParams::parse(text);
}

py::dict report_dict(const SubgroupReport& r) {
    py::dict d;
    d["label"] = r.label;
    d["mae"] = r.mae;
    d["rmse"] = r.rmse;
    d["errors"] = r.errors();
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Prediction and household simulation toolkit";

    py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
    py::register_exception<SchemaError>(m, "SchemaError", PyExc_ValueError);
    py::register_exception<ContractError>(m, "ContractError", PyExc_ValueError);
    py::register_exception<TrainingError>(m, "TrainingError", PyExc_RuntimeError);
    py::register_exception<BindingError>(m, "BindingError", PyExc_RuntimeError);
    py::register_exception<app::InputError>(m, "InputError", PyExc_OSError);

    py::class_<Dataset>(m, "Dataset")
        .def_property_readonly("rows", &Dataset::rows)
        .def_property_readonly("columns", [](const Dataset& d) { return d.schema().names(); })
        .def("column",
             [](const Dataset& d, const std::string& name) {
                 const auto c = d.column(name);
                 return std::vector<double>(c.begin(), c.end());
             })
        .def("__len__", &Dataset::rows);

    m.def(
        "load",
        [](const fs::path& data, std::optional<fs::path> schema) {
            const auto path = app::resolve_schema_path(data, schema);
            return app::load_rows(data, read_schema(path)).data;
        },
        py::arg("data"), py::arg("schema") = py::none(),
        "Reads a CSV table with its schema (default: the sidecar next to the file).");

    m.def(
        "generate",
        [](const fs::path& out, std::uint64_t seed, std::size_t households) {
            SynthSpec spec;
            spec.seed = seed;
            spec.n_households = households;
            const auto corpus = generate(spec);
            write_corpus(corpus, out);
            py::dict d;
            d["train"] = corpus.train.rows();
            d["test"] = corpus.test.rows();
            d["households_train"] = corpus.households_train.rows();
            d["households_test"] = corpus.households_test.rows();
            d["initial"] = corpus.initial.rows();
            return d;
        },
        py::arg("out"), py::arg("seed"), py::arg("households") = 0,
        "Writes a synthetic corpus to `out` and returns its table sizes.");

    py::class_<FittedModel>(m, "Model")
        .def_property_readonly("learner", [](const FittedModel& f) { return std::string(to_string(f.learner)); })
        .def_property_readonly("task", [](const FittedModel& f) { return std::string(to_string(f.task)); })
        .def_property_readonly("target", [](const FittedModel& f) { return f.target; })
        .def_property_readonly("features", &FittedModel::feature_names)
        .def_property_readonly("params", [](const FittedModel& f) { return f.params.describe(f.learner); })
        .def_property_readonly("converged", &FittedModel::converged)
        .def("predict", &FittedModel::predict, py::arg("data"))
        .def("score", &FittedModel::score, py::arg("data"))
        .def("save", [](const FittedModel& f, const fs::path& p) { app::save_model(f, p); }, py::arg("path"));

    m.def("load_model", &app::load_model, py::arg("path"));

    m.def(
        "fit",
        [](const Dataset& data, const std::string& learner, const std::string& target,
           std::optional<std::vector<std::string>> features, std::optional<std::string> task, std::uint64_t seed,
           const py::kwargs& kw) {
            const auto feats = features ? *features : default_features(data, target);
            Task t = Task::classification;
            if (task) t = parse_task(*task);
            else {
                try {
                    t = app::task_of(app::outcome_for_target(target));
                } catch (const ContractError&) {
                }
            }
            const auto params = params_from(kw);
            py::gil_scoped_release release;
            return fit_learner(parse_learner(learner), t, data, target, feats, params, FitOptions{seed, 0});
        },
        py::arg("data"), py::arg("learner"), py::arg("target"), py::arg("features") = py::none(),
        py::arg("task") = py::none(), py::arg("seed") = 0,
        "Fits one learner. Extra keyword arguments set parameters (max_depth, min_node, trees, ...).");

    m.def(
        "train",
        [](const Dataset& data, const std::string& learner, const std::string& outcome, std::uint64_t seed,
           std::size_t folds, const std::string& grid, const std::string& resample) {
            app::TrainOptions o;
            o.learner = parse_learner(learner);
            o.outcome = app::parse_outcome(outcome);
            o.seed = seed;
            o.folds = folds;
            if (!grid.empty()) o.grid = app::parse_grid(grid);
            o.resample = app::parse_resample(resample);
            app::TrainResult r;
            {
                py::gil_scoped_release release;
                r = app::train_model(data, o);
            }
            return py::make_tuple(std::move(r.model), r.cv.best_params().describe(o.learner));
        },
        py::arg("data"), py::arg("learner"), py::arg("outcome"), py::arg("seed") = 0, py::arg("folds") = 10,
        py::arg("grid") = "", py::arg("resample") = "none",
        "Cross-validates a grid and refits the best cell. Returns (model, best parameters).");

    m.def(
        "mae_rmse",
        [](const std::vector<double>& errors) {
            const auto s = mae_rmse(errors);
            return py::make_tuple(s.mae, s.rmse);
        },
        py::arg("errors"));
    m.def(
        "accuracy",
        [](std::size_t tp, std::size_t fp, std::size_t fn, std::size_t tn) {
            return accuracy(ConfusionMatrix{tp, fp, fn, tn});
        },
        py::arg("tp"), py::arg("fp"), py::arg("fn"), py::arg("tn"));

    m.def(
        "simulate",
        [](const std::map<std::string, std::string>& bindings, const Dataset& initial, const Dataset& actual,
           std::optional<Dataset> households, const fs::path& base, std::uint64_t seed, bool expected,
           std::optional<double> boy) {
            SimConfig cfg;
            cfg.bindings = app::make_bindings(bindings, base);
            cfg.seed = seed;
            cfg.boy_ratio = boy ? *boy : boy_ratio(actual);
            cfg.mode = expected ? Realization::expected : Realization::stochastic;
            app::SimulateInputs in;
            in.initial = initial;
            in.actual = actual;
            in.households = std::move(households);
            in.trajectories = false;
            app::SimulateResult res;
            {
                py::gil_scoped_release release;
                res = app::simulate_panels(in, cfg, "simulated", nullptr);
            }
            py::list out;
            for (const auto& p : res.panels) {
                py::dict d;
                d["panel"] = p.panel.label();
                d["households"] = p.households;
                d["skipped"] = p.skipped;
                d["attendance"] = report_dict(p.attendance);
                d["failure"] = report_dict(p.failure);
                out.append(d);
            }
            return out;
        },
        py::arg("bindings"), py::arg("initial"), py::arg("actual"), py::arg("households") = py::none(),
        py::arg("base") = fs::path("."), py::arg("seed") = 0, py::arg("expected") = false,
        py::arg("boy_ratio") = py::none(),
        "Runs the household simulator over the training panels. `bindings` maps income, pregnancy, attendance "
        "and failure to a model file or const:<value>.");

    m.def(
        "repro",
        [](const fs::path& out, std::uint64_t seed, std::size_t households, std::optional<fs::path> data,
           std::optional<std::vector<std::string>> learners, std::size_t folds, bool expected) {
            app::ReproOptions o;
            o.out = out;
            o.seed = seed;
            o.households = households;
            o.data = std::move(data);
            o.folds = folds;
            o.expected = expected;
            if (learners) {
                o.learners.clear();
                for (const auto& l : *learners) o.learners.push_back(parse_learner(l));
            }
            std::ostringstream log;
            app::ReproSummary s;
            {
                py::gil_scoped_release release;
                s = app::run_repro(o, log);
            }
            py::dict d;
            d["income"] = std::string(to_string(s.income));
            d["pregnancy"] = std::string(to_string(s.pregnancy));
            d["failure"] = std::string(to_string(s.failure));
            d["skipped"] = s.skipped;
            d["converged"] = s.converged;
            d["rf_train_seconds"] = s.rf_train_seconds;
            d["rf_predict_seconds"] = s.rf_predict_seconds;
            std::vector<std::string> outputs;
            for (const auto& p : s.outputs) outputs.push_back(p.string());
            d["outputs"] = outputs;
            d["log"] = log.str();
            return d;
        },
        py::arg("out"), py::arg("seed") = 0, py::arg("households") = 0, py::arg("data") = py::none(),
        py::arg("learners") = py::none(), py::arg("folds") = 10, py::arg("expected") = false,
        "Runs the full study and writes every table under `out`.");

    m.def(
        "cli",
        [](std::vector<std::string> args) {
            std::ostringstream out, err;
            const int code = app::run_cli(std::move(args), out, err);
            return py::make_tuple(code, out.str(), err.str());
        },
        py::arg("args"), "Runs the command-line tool in-process. Returns (exit code, stdout, stderr).");
}
