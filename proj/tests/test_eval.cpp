#include <cmath>
#include <set>
#include <sstream>

#include "cctml/error.hpp"
#include "cctml/eval.hpp"
#include "cctml/reference.hpp"
#include "cctml/rng.hpp"
#include "doctest.h"

using namespace cctml;

namespace {

Dataset toy(std::size_t n, std::uint64_t seed) {
    std::istringstream schema(
        "hh continuous id\n"
        "a continuous feature\n"
        "b continuous feature\n"
        "label binary target\n"
        "value continuous target\n");
    Dataset d(parse_schema(schema));
    Rng rng(seed);
    for (std::size_t i = 0; i < n; ++i) {
        const double a = rng.uniform() * 10.0;
        const double b = rng.normal();
        const double label = rng.uniform() < 1.0 / (1.0 + std::exp(-(a - 5.0))) ? 1.0 : 0.0;
        d.append_row(std::vector<double>{double(i / 3), a, b, label, 2.0 * a + b});
    }
    return d;
}

const std::vector<std::string> kFeatures = {"a", "b"};

}  // namespace

TEST_CASE("accuracy of worked confusion matrices") {
    CHECK(accuracy({0, 50, 50, 0}) == doctest::Approx(0.0));
    CHECK(accuracy({30, 0, 0, 70}) == doctest::Approx(100.0));
    CHECK(accuracy({40, 10, 10, 40}) == doctest::Approx(80.0));
    const ConfusionMatrix bad{0, 50, 50, 0};
    CHECK(bad.predicted_rate() == doctest::Approx(50.0));
    CHECK(bad.actual_rate() == doctest::Approx(50.0));
    CHECK_THROWS_AS(accuracy({}), ContractError);

    const std::vector<double> a = {1, 0, 1, 1, 0, NAN};
    const std::vector<double> p = {1, 1, 0, 1, 0, 1};
    const auto cm = confusion(a, p);
    CHECK(cm == ConfusionMatrix{2, 1, 1, 1});
    CHECK(accuracy(cm.relabeled()) == accuracy(cm));
}

TEST_CASE("relabeling never changes accuracy") {
    Rng rng(3);
    for (int t = 0; t < 200; ++t) {
        ConfusionMatrix cm{rng.below(20), rng.below(20), rng.below(20), 1 + rng.below(20)};
        CHECK(accuracy(cm.relabeled()) == doctest::Approx(accuracy(cm)));
        CHECK(cm.relabeled().relabeled() == cm);
    }
}

TEST_CASE("published error rows render to the published summaries") {
    const auto tw = mae_rmse(reference::kOneStepTw2006.error);
    CHECK(format_fixed(tw.mae, 2) == "2.76");
    CHECK(format_fixed(tw.rmse, 2) == "4.04");
    const auto cart = mae_rmse(reference::kOneStepCartError);
    CHECK(format_fixed(cart.mae, 2) == "2.53");
    CHECK(format_fixed(cart.rmse, 2) == "3.09");

    std::vector<double> pooled;
    for (const auto& panel : reference::kWithinSampleTw2006) pooled.insert(pooled.end(), panel.error.begin(), panel.error.end());
    const auto w = mae_rmse(pooled);
    CHECK(format_fixed(w.mae, 2) == "2.03");
    CHECK(format_fixed(w.rmse, 2) == "2.71");

    for (const auto& panel : reference::kWithinSampleTw2006)
        for (std::size_t i = 0; i < 8; ++i)
            CHECK(round_half_away(panel.predicted[i] - panel.actual[i], 1) == doctest::Approx(panel.error[i]));
}

TEST_CASE("rounding and formatting") {
    CHECK(format_fixed(2.525, 2) == "2.53");
    CHECK(format_fixed(-2.525, 2) == "-2.53");
    CHECK(format_fixed(0.125, 2) == "0.13");
    CHECK(format_fixed(-0.001, 1) == "0.0");
    CHECK(format_fixed(7121.4, 0) == "7121");
    CHECK(format_fixed(NAN, 2).empty());
}

TEST_CASE("MAE never exceeds RMSE") {
    Rng rng(11);
    for (int t = 0; t < 300; ++t) {
        std::vector<double> e(1 + rng.below(30));
        for (auto& v : e) v = rng.normal() * 5.0;
        const auto s = mae_rmse(e);
        CHECK(s.mae <= s.rmse + 1e-12);
    }
    CHECK_THROWS_AS(mae_rmse({}), ContractError);
}

TEST_CASE("folds partition the rows evenly") {
    for (std::size_t n : {10u, 37u, 100u})
        for (std::size_t k : {2u, 5u, 10u}) {
            const auto f = make_folds(n, k, 4);
            std::vector<std::size_t> size(k);
            for (auto v : f) {
                REQUIRE(v < k);
                ++size[v];
            }
            const auto [lo, hi] = std::minmax_element(size.begin(), size.end());
            CHECK(*hi - *lo <= 1);
            CHECK(make_folds(n, k, 4) == f);
        }
    CHECK_THROWS_AS(make_folds(3, 5, 0), ContractError);
    CHECK_THROWS_AS(make_folds(10, 1, 0), ContractError);

    const std::vector<double> g = {1, 1, 2, 2, 2, 3, 4, 4, 5, 6};
    const auto gf = make_group_folds(g, 3, 7);
    for (std::size_t i = 0; i < g.size(); ++i)
        for (std::size_t j = 0; j < g.size(); ++j)
            if (g[i] == g[j]) CHECK(gf[i] == gf[j]);
    CHECK(std::set<std::size_t>(gf.begin(), gf.end()).size() == 3);
}

TEST_CASE("cross-validation selects the best non-failed cell") {
    const auto data = toy(120, 1);
    CvPlan plan;
    plan.folds = 5;
    plan.seed = 2;
    LearnerParams p;
    p.max_depth = 2;
    plan.grid = {p};
    auto one = cross_validate(data, "label", kFeatures, LearnerId::cart, Task::classification, plan);
    CHECK(one.best == 0);
    CHECK(one.cells[0].fold_scores.size() == 5);

    for (int depth : {1, 4, 8}) {
        p.max_depth = depth;
        plan.grid.push_back(p);
    }
    const auto res = cross_validate(data, "label", kFeatures, LearnerId::cart, Task::classification, plan);
    for (const auto& cell : res.cells) CHECK(res.cells[res.best].score <= cell.score);
    CHECK(cross_validate(data, "label", kFeatures, LearnerId::cart, Task::classification, plan).best == res.best);

    std::ostringstream csv;
    write_cv_csv(csv, res);
    CHECK(csv.str().find("fold5") != std::string::npos);
}

TEST_CASE("leave-one-out on ten rows") {
    const auto data = toy(10, 5);
    CvPlan plan;
    plan.folds = 10;
    plan.metric = CvMetric::mae;
    LearnerParams p;
    p.lambda_ratio = 0.1;
    plan.grid = {p};
    const auto res = cross_validate(data, "value", kFeatures, LearnerId::lasso, Task::regression, plan);
    CHECK(std::set<std::size_t>(res.fold_of.begin(), res.fold_of.end()).size() == 10);
    CHECK(res.cells[0].fold_scores.size() == 10);
    plan.folds = 11;
    CHECK_THROWS_AS(cross_validate(data, "value", kFeatures, LearnerId::lasso, Task::regression, plan), ContractError);
}

TEST_CASE("failed cells are excluded and all-failed raises") {
    const auto data = toy(60, 8);
    CvPlan plan;
    plan.folds = 3;
    LearnerParams good, bad;
    bad.trees = 0;  // forest with no trees cannot be fitted
    plan.grid = {bad, good};
    good.trees = 10;
    plan.grid[1] = good;
    const auto res = cross_validate(data, "label", kFeatures, LearnerId::rf, Task::classification, plan);
    CHECK(res.cells[0].failed);
    CHECK_FALSE(res.cells[0].message.empty());
    CHECK(res.best == 1);
    plan.grid = {bad};
    CHECK_THROWS_AS(cross_validate(data, "label", kFeatures, LearnerId::rf, Task::classification, plan),
                    TrainingError);
}

TEST_CASE("grouped folds and resampled training folds") {
    const auto data = toy(90, 9);
    CvPlan plan;
    plan.folds = 3;
    plan.cluster_column = "hh";
    plan.resample.method = ResampleMethod::under;
    LearnerParams p;
    p.max_depth = 3;
    plan.grid = {p};
    const auto res = cross_validate(data, "label", kFeatures, LearnerId::cart, Task::classification, plan);
    const auto hh = data.column("hh");
    for (std::size_t i = 1; i < hh.size(); ++i)
        if (hh[i] == hh[i - 1]) CHECK(res.fold_of[i] == res.fold_of[i - 1]);
    CHECK_FALSE(res.cells[0].failed);
}

TEST_CASE("subgroup reports use predicted minus actual") {
    SubgroupMap groups;
    std::vector<double> actual, predicted;
    Rng rng(12);
    for (std::size_t g = 0; g < 8; ++g)
        for (int i = 0; i < 20; ++i) {
            groups[g].push_back(actual.size());
            actual.push_back(rng.bernoulli(0.6) ? 1.0 : 0.0);
            predicted.push_back(rng.bernoulli(0.6) ? 1.0 : 0.0);
        }
    const auto rep = subgroup_report(actual, predicted, groups, "m");
    double acc = 0;
    for (const auto& row : rep.rows) {
        CHECK(row.error == doctest::Approx(row.predicted - row.actual));
        CHECK(row.n == 20);
        acc += row.accuracy / 8.0;
    }
    const auto s = mae_rmse(rep.errors());
    CHECK(rep.mae == doctest::Approx(s.mae));
    CHECK(rep.rmse == doctest::Approx(s.rmse));
    CHECK(rep.mean_accuracy == doctest::Approx(acc));

    const auto cmp = compare_subgroup_rates(actual, groups, predicted, groups, "m");
    for (std::size_t i = 0; i < 8; ++i) CHECK(cmp.rows[i].predicted == doctest::Approx(rep.rows[i].predicted));

    SubgroupMap empty_one = groups;
    empty_one[3].clear();
    const auto partial = subgroup_report(actual, predicted, empty_one);
    CHECK(std::isnan(partial.rows[3].actual));
    CHECK(partial.errors().size() == 7);

    const auto tw = fixed_report("TW2006", reference::kOneStepTw2006.actual, reference::kOneStepTw2006.predicted,
                                 reference::kOneStepTw2006.error);
    std::ostringstream md;
    const SubgroupReport reps[] = {tw};
    write_reports_markdown(md, "One-step", reps);
    CHECK(md.str().find("| 2.76 | 4.04 |") != std::string::npos);
    CHECK(md.str().find("Age 6-11 Girls") != std::string::npos);
    std::ostringstream csv;
    write_reports_csv(csv, reps);
    CHECK(csv.str().find("TW2006,age6_11,girl,0,0,98.5000,97.1000,-1.4000,") != std::string::npos);
}

TEST_CASE("value reports average a continuous outcome per subgroup") {
    SubgroupMap groups;
    groups[0] = {0, 1};
    const std::vector<double> actual = {100, 200};
    const std::vector<double> predicted = {110, 180};
    const auto rep = value_report(actual, predicted, groups, "income");
    CHECK(rep.rows[0].actual == doctest::Approx(150));
    CHECK(rep.rows[0].predicted == doctest::Approx(145));
    CHECK(rep.rows[0].mae == doctest::Approx(15));
    CHECK(rep.rows[0].rmse == doctest::Approx(std::sqrt(250.0)));
    CHECK(rep.rows[1].n == 0);
}

TEST_CASE("model selection by MAE then RMSE") {
    std::vector<Candidate> income;
    const LearnerId ids[] = {LearnerId::cart, LearnerId::lasso, LearnerId::rf, LearnerId::adaboost};
    for (std::size_t i = 0; i < 4; ++i)
        income.push_back({ids[i], reference::kIncome[i + 1].test_mae, reference::kIncome[i + 1].test_rmse});
    CHECK(model_select(income) == LearnerId::rf);

    std::vector<Candidate> preg;
    for (std::size_t i = 0; i < kAllLearners.size(); ++i)
        preg.push_back({kAllLearners[i], reference::kPregnancy[i].test_mae, reference::kPregnancy[i].test_rmse});
    CHECK(model_select(preg) == LearnerId::logit);

    const std::vector<Candidate> single = {{LearnerId::c45, 9.0, 9.0}};
    CHECK(model_select(single) == LearnerId::c45);
    const std::vector<Candidate> tie = {{LearnerId::rf, 1.0, 2.0}, {LearnerId::cart, 1.0, 1.5}};
    CHECK(model_select(tie) == LearnerId::cart);
    CHECK_THROWS_AS(model_select({}), ContractError);

    std::ostringstream md;
    const ModelScore rows[] = {{"TW2006", 2.7625, 4.0359, NAN}};
    write_comparison_markdown(md, "t", rows);
    CHECK(md.str().find("| TW2006 | 2.76 | 4.04 | NA |") != std::string::npos);
}
