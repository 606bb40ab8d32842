// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero if any fails. Arguments select criteria by number ("3 5").

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include <fmt/format.h>

#include "cctml/covariates.hpp"
#include "cctml/ensemble.hpp"
#include "cctml/eval.hpp"
#include "cctml/learners.hpp"
#include "cctml/linear.hpp"
#include "cctml/reference.hpp"
#include "cctml/rng.hpp"
#include "cctml/simulate.hpp"
#include "cctml/synth.hpp"
#include "linear_oracles.hpp"
#include "oracles.hpp"
#include "pipeline.hpp"
#include "resample_props.hpp"
#include "sim_fixtures.hpp"

using namespace cctml;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Verdict {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (ok) return;
        if (pass) detail = what;
        pass = false;
    }
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

const SynthCorpus& default_corpus() {
    static const SynthCorpus corpus = generate(SynthSpec{});
    return corpus;
}

std::vector<std::size_t> school_age_rows(const Dataset& d) {
    std::vector<std::size_t> out;
    const auto age = d.column("childAge");
    const auto attend = d.column("attend");
    for (std::size_t r = 0; r < d.rows(); ++r)
        if (age[r] >= 6 && age[r] <= 15 && !std::isnan(attend[r])) out.push_back(r);
    return out;
}

Verdict metric_fidelity() {
    Verdict o;
    const auto t0 = Clock::now();
    const auto tw = mae_rmse(reference::kOneStepTw2006.error);
    const auto cart = mae_rmse(reference::kOneStepCartError);
    const double secs = seconds_since(t0);
    o.require(format_fixed(tw.mae, 2) == "2.76" && format_fixed(tw.rmse, 2) == "4.04",
              fmt::format("TW2006 {:.4f}/{:.4f}", tw.mae, tw.rmse));
    o.require(format_fixed(cart.mae, 2) == "2.53" && format_fixed(cart.rmse, 2) == "3.09",
              fmt::format("CART {:.4f}/{:.4f}", cart.mae, cart.rmse));
    o.require(secs < 1e-3, fmt::format("{:.6f} s", secs));
    if (o.pass)
        o.detail = fmt::format("TW2006 {}/{}, CART {}/{}, {:.1f} us", format_fixed(tw.mae, 2), format_fixed(tw.rmse, 2),
                               format_fixed(cart.mae, 2), format_fixed(cart.rmse, 2), secs * 1e6);
    return o;
}

Verdict accuracy_pathology() {
    Verdict o;
    const ConfusionMatrix cm{0, 50, 50, 0};  // tp fp fn tn
    o.require(cm.predicted_rate() == 50.0, fmt::format("predicted rate {}", cm.predicted_rate()));
    o.require(cm.actual_rate() == 50.0, fmt::format("actual rate {}", cm.actual_rate()));
    o.require(accuracy(cm) == 0.0, fmt::format("accuracy {}", accuracy(cm)));
    if (o.pass) o.detail = "predicted 50.0%, actual 50.0%, accuracy 0%";
    return o;
}

Verdict split_oracle() {
    Verdict o;
    const auto t0 = Clock::now();
    Rng rng(20240917);
    int bad = 0;
    for (int i = 0; i < 500; ++i) {
        const auto msg = oracle::compare_split(oracle::random_case(rng));
        if (!msg.empty()) {
            ++bad;
            o.require(false, fmt::format("case {}: {}", i, msg));
        }
    }
    const double secs = seconds_since(t0);
    o.require(secs < 10.0, fmt::format("{:.2f} s", secs));
    if (o.pass) o.detail = fmt::format("500 cases agree, {:.2f} s", secs);
    return o;
}

Verdict lasso_correctness() {
    Verdict o;
    const auto t0 = Clock::now();
    Rng rng(4242);
    double worst_kkt = 0.0, worst_ols = 0.0;
    std::size_t fits = 0;
    for (int rep = 0; rep < 100; ++rep) {
        const std::size_t k = 1 + rng.below(10);
        const std::size_t n = k + 5 + rng.below(36 - k);  // k + 5 .. 40
        const auto f = oracle::random_regression(rng, n, k);
        for (double lambda : lasso_lambda_grid(f.x, f.y, 10, 1e-3)) {
            LassoOptions opt;
            opt.lambda = lambda;
            const auto m = fit_lasso(f.x, f.y, opt);
            worst_kkt = std::max(worst_kkt, oracle::kkt_residual(f.x, f.y, m));
            ++fits;
        }
        LassoOptions zero;
        zero.lambda = 0.0;
        zero.tol = 1e-13;
        const auto m0 = fit_lasso(f.x, f.y, zero);
        const auto ls = oracle::least_squares(f.x, f.y);
        worst_ols = std::max(worst_ols, std::abs(m0.intercept - ls[0]));
        for (std::size_t j = 0; j < k; ++j) worst_ols = std::max(worst_ols, std::abs(m0.coef[j] - ls[j + 1]));

        LassoOptions top;
        top.lambda = lasso_lambda_max(f.x, f.y);
        o.require(fit_lasso(f.x, f.y, top).nonzero() == 0, fmt::format("instance {}: nonzero at lambda_max", rep));
        top.lambda *= 1.5;
        o.require(fit_lasso(f.x, f.y, top).nonzero() == 0, fmt::format("instance {}: nonzero above lambda_max", rep));
    }
    const double secs = seconds_since(t0);
    o.require(worst_kkt <= 1e-6, fmt::format("KKT residual {:.3g}", worst_kkt));
    o.require(worst_ols <= 1e-8, fmt::format("normal-equation gap {:.3g}", worst_ols));
    o.require(secs < 30.0, fmt::format("{:.2f} s", secs));
    if (o.pass)
        o.detail = fmt::format("{} fits, max KKT {:.2g}, OLS gap {:.2g}, {:.2f} s", fits, worst_kkt, worst_ols, secs);
    return o;
}

Verdict adaboost_identities() {
    Verdict o;
    double worst_update = 0.0;
    std::size_t stages = 0;
    for (std::uint64_t seed = 1; seed <= 8; ++seed) {
        Rng rng(seed);
        const std::size_t n = 150 + rng.below(250);
        DesignMatrix x({{"a", ColumnKind::continuous, 0},
                        {"b", ColumnKind::continuous, 0},
                        {"flag", ColumnKind::binary, 0},
                        {"g", ColumnKind::categorical, 5}},
                       n);
        std::vector<double> y(n);
        for (std::size_t r = 0; r < n; ++r) {
            x(r, 0) = rng.normal();
            x(r, 1) = rng.normal();
            x(r, 2) = double(rng.below(2));
            x(r, 3) = double(rng.below(5));
            const double eta = 1.5 * x(r, 0) - x(r, 1) * x(r, 0) + 0.5 * x(r, 2) + rng.normal();
            y[r] = eta > 0 ? 1.0 : -1.0;
        }
        BoostConfig cfg;
        cfg.stages = 10 + rng.below(40);
        cfg.tree.max_depth = 1 + rng.below(3);
        BoostTrace trace;
        const auto m = fit_adaboost(x, y, cfg, &trace);
        for (std::size_t s = 0; s < m.stages.size(); ++s) {
            ++stages;
            if (trace.error[s] > 0) worst_update = std::max(worst_update, std::abs(trace.updated_error[s] - 0.5));
            o.require(trace.training_error[s] <= trace.bound[s],
                      fmt::format("fixture {} stage {}: error {} above bound {}", seed, s, trace.training_error[s],
                                  trace.bound[s]));
        }
    }
    o.require(worst_update <= 1e-12, fmt::format("post-update error off by {:.3g}", worst_update));
    const double b = adaboost_beta(0.1);
    o.require(std::abs(b - 1.0986) <= 1e-4, fmt::format("beta(0.1) = {}", b));
    if (o.pass)
        o.detail = fmt::format("{} stages on 8 fixtures, max |err'-0.5| {:.2g}, beta(0.1) {:.4f}", stages, worst_update, b);
    return o;
}

std::string dump(const ForestModel& m) {
    std::ostringstream out;
    dump_forest(out, m);
    return out.str();
}

Verdict forest_contracts() {
    Verdict o;
    const auto t0 = Clock::now();
    {
        Rng rng(77);
        const std::size_t n = 400;
        DesignMatrix x({{"a", ColumnKind::continuous, 0}, {"b", ColumnKind::continuous, 0}}, n);
        std::vector<double> y(n);
        for (std::size_t r = 0; r < n; ++r) {
            x(r, 0) = rng.normal();
            x(r, 1) = rng.normal();
            y[r] = x(r, 0) + 0.5 * rng.normal() > 0 ? 1.0 : 0.0;
        }
        ForestConfig cfg;
        cfg.trees = 25;
        cfg.seed = 314;
        const auto a = dump(fit_forest(x, TreeTarget{y, 2, {}}, cfg));
        cfg.threads = 3;
        o.require(dump(fit_forest(x, TreeTarget{y, 2, {}}, cfg)) == a, "dump differs across thread counts");
        o.require(dump(fit_forest(x, TreeTarget{y, 2, {}}, cfg)) == a, "dump differs on rerun");

        // OOB share at N = 1000
        const std::size_t big = 1000;
        DesignMatrix x2({{"a", ColumnKind::continuous, 0}}, big);
        std::vector<double> y2(big);
        for (std::size_t r = 0; r < big; ++r) {
            x2(r, 0) = rng.normal();
            y2[r] = x2(r, 0) > 0 ? 1.0 : 0.0;
        }
        cfg.trees = 50;
        cfg.tree.max_depth = 1;
        const auto f = fit_forest(x2, TreeTarget{y2, 2, {}}, cfg);
        const double expected = 1.0 - std::pow(1.0 - 1.0 / double(big), double(big));
        for (std::size_t t = 0; t < f.trees.size(); ++t) {
            const double in_bag = 1.0 - double(f.oob[t].size()) / double(big);
            o.require(std::abs(in_bag - expected) <= 0.03,
                      fmt::format("tree {}: in-bag share {:.3f} vs {:.3f}", t, in_bag, expected));
        }
    }
    const auto& c = default_corpus();
    const auto features = names_of(attendance_covariates());
    const auto data = c.train.select_rows(school_age_rows(c.train));
    const auto x = Imputer::fit(data, features).transform(data);
    const auto col = data.column("attend");
    const std::vector<double> y(col.begin(), col.end());
    ForestConfig cfg;
    cfg.trees = 60;
    cfg.tree.min_node_size = 5;
    cfg.seed = 7;
    const auto forest = fit_forest(x, TreeTarget{y, 2, {}}, cfg);
    const auto imp = variable_importance(forest, x, y, 11);
    const auto top = [&](const std::vector<double>& v) {
        return features[static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin())];
    };
    o.require(top(imp.mean_decrease_accuracy) == c.truth.dominant_covariate,
              "MDA ranks " + top(imp.mean_decrease_accuracy) + " first");
    o.require(top(imp.mean_decrease_gini) == c.truth.dominant_covariate,
              "MDG ranks " + top(imp.mean_decrease_gini) + " first");
    const double secs = seconds_since(t0);
    o.require(secs < 120.0, fmt::format("{:.1f} s", secs));
    if (o.pass) o.detail = fmt::format("{} first in MDA and MDG, {:.1f} s", c.truth.dominant_covariate, secs);
    return o;
}

Verdict simulation_consistency() {
    Verdict o;
    const auto& c = default_corpus();
    const auto features = names_of(attendance_covariates());
    LearnerParams p;
    p.max_depth = 8;
    auto model = std::make_shared<const FittedModel>(
        fit_learner(LearnerId::cart, Task::classification, c.train, "attend", features, p));
    SimConfig cfg;
    cfg.bindings.income = constant_submodel("income", 10000, true);
    cfg.bindings.pregnancy = constant_submodel("pregnancy", 0.0);
    cfg.bindings.attendance = bind_model("attendance", model);
    cfg.bindings.failure = constant_submodel("failure", 0.0);
    cfg.mode = Realization::expected;
    const auto sim = one_step_attendance(c.test, cfg);
    const auto direct = model->predict(c.test);
    const auto age = c.test.column("childAge");
    std::size_t compared = 0, mismatched = 0;
    for (std::size_t r = 0; r < c.test.rows(); ++r) {
        if (age[r] < 6 || age[r] > 15) continue;
        ++compared;
        if (!(sim[r] == direct[r])) ++mismatched;
    }
    o.require(mismatched == 0, fmt::format("{} of {} one-step rows differ", mismatched, compared));

    for (auto mode : {Realization::expected, Realization::stochastic}) {
        auto stub = simfix::stub_config(simfix::first_year_pregnancy(), 1.0, 0.0);
        stub.mode = mode;
        o.require(simfix::trajectory(simfix::couple(7, 1980), stub, 1989) == simfix::kHandTraced,
                  "hand-traced trajectory differs");
    }

    std::size_t child_years = 0, broken = 0;
    const auto check = [&](const PeriodRecord& r) {
        for (const auto& obs : r.children) {
            const auto& ch = obs.child;
            ++child_years;
            const bool ok = ch.behind >= 0 && ch.hgc >= 0 && (ch.age < 6 ? ch.hgc == 0 && ch.behind == 0
                                                                          : ch.hgc + ch.behind + 6 == ch.age);
            if (!ok) ++broken;
        }
    };
    const auto truth = truth_config(c.truth, 19);
    const auto states = initial_states(c.initial);
    for (std::size_t i = 0; i < states.size(); i += 7) simulate_household(states[i], truth, 1998, check);
    auto noisy = simfix::stub_config(constant_submodel("pregnancy", 0.3), 0.8, 0.2);
    noisy.boy_ratio = 0.5;
    for (double id = 0; id < 200; ++id) simulate_household(simfix::couple(id, 1965), noisy, 1998, check);
    o.require(broken == 0, fmt::format("{} of {} child-years break the accounting identity", broken, child_years));
    if (o.pass)
        o.detail = fmt::format("{} one-step rows equal, trajectory exact, {} child-years balanced", compared,
                               child_years);
    return o;
}

fs::path scratch_dir(const std::string& name) {
    const auto dir = fs::temp_directory_path() / fmt::format("cctml_accept_{}_{}", name, ::getpid());
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

Verdict scale_and_runtime() {
    Verdict o;
    const auto dir = scratch_dir("repro");
    app::ReproOptions opt;
    opt.out = dir;
    opt.seed = 1;
    std::ostringstream log;
    const auto t0 = Clock::now();
    const auto sum = app::run_repro(opt, log);
    const double total = seconds_since(t0);
    o.require(sum.rf_train_seconds < 1800.0, fmt::format("forest training {:.1f} s", sum.rf_train_seconds));
    o.require(sum.rf_predict_seconds < 60.0, fmt::format("forest prediction {:.2f} s", sum.rf_predict_seconds));
    o.detail = fmt::format("forest training {:.1f} s, prediction {:.2f} s, whole study {:.0f} s", sum.rf_train_seconds,
                           sum.rf_predict_seconds, total);
    fs::remove_all(dir);
    return o;
}

Verdict resampling_properties() {
    Verdict o;
    const auto t0 = Clock::now();
    Rng rng(90210);
    for (int i = 0; i < 100; ++i) {
        const auto msg = oracle::resample_case(rng);
        o.require(msg.empty(), fmt::format("case {}: {}", i, msg));
    }
    const double secs = seconds_since(t0);
    o.require(secs < 5.0, fmt::format("{:.2f} s", secs));
    if (o.pass) o.detail = fmt::format("100 cases, {:.2f} s", secs);
    return o;
}

Verdict data_path() {
    Verdict o;
    const auto dir = scratch_dir("data");
    SynthSpec spec;
    spec.seed = 3;
    spec.n_households = 400;
    write_corpus(generate(spec), dir / "corpus");
    app::ReproOptions opt;
    opt.out = dir / "out";
    opt.seed = 3;
    opt.data = dir / "corpus";
    opt.folds = 3;
    opt.learners = {LearnerId::cart, LearnerId::lasso, LearnerId::logit};
    std::ostringstream log;
    const auto sum = app::run_repro(opt, log);
    o.require(!fs::exists(opt.out / "data"), "corpus was regenerated instead of read");
    const auto tables = opt.out / "tables";
    for (const char* name :
         {"one_step_attendance.csv", "one_step_attendance.md", "one_step_accuracy.md", "one_step_comparison.csv",
          "one_step_comparison.md", "within_sample_attendance.csv", "within_sample_attendance.md",
          "within_sample_comparison.csv", "within_sample_comparison.md", "income_models.csv", "income_models.md",
          "pregnancy_models.csv", "pregnancy_models.md", "failure_models.csv", "failure_models.md",
          "nstep_attendance.csv", "nstep_attendance.md", "nstep_comparison.csv", "nstep_comparison.md",
          "trajectories.csv", "summary.md"})
        o.require(fs::exists(tables / name) && fs::file_size(tables / name) > 0, std::string("missing ") + name);
    for (const auto& p : sum.outputs) o.require(fs::exists(p), "missing " + p.string());

    std::ifstream readme(fs::path(CCTML_SOURCE_DIR) / "README.md");
    std::stringstream text;
    text << readme.rdbuf();
    o.require(text.str().find("--data") != std::string::npos, "README does not document --data");
    if (o.pass) o.detail = fmt::format("{} table files from a supplied corpus directory", sum.outputs.size());
    fs::remove_all(dir);
    return o;
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
        {"metric fidelity", metric_fidelity},
        {"accuracy pathology", accuracy_pathology},
        {"split oracle", split_oracle},
        {"LASSO correctness", lasso_correctness},
        {"AdaBoost identities", adaboost_identities},
        {"forest contracts", forest_contracts},
        {"simulation consistency", simulation_consistency},
        {"end-to-end scale and runtime", scale_and_runtime},
        {"resampling properties", resampling_properties},
        {"real-data path", data_path},
    };
    std::set<std::size_t> only;
    for (int i = 1; i < argc; ++i) only.insert(std::stoul(argv[i]));

    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        if (!only.empty() && !only.count(i + 1)) continue;
        Verdict r;
        try {
            r = criteria[i].second();
        } catch (const std::exception& e) {
            r.pass = false;
            r.detail = std::string("exception: ") + e.what();
        }
        if (!r.pass) ++failed;
        std::cout << (r.pass ? "PASS" : "FAIL") << " criterion " << i + 1 << " (" << criteria[i].first
                  << "): " << r.detail << std::endl;
    }
    return failed == 0 ? 0 : 1;
}
