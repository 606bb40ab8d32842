#include <cmath>
#include <sstream>

#include "cctml/error.hpp"
#include "cctml/learners.hpp"
#include "cctml/rng.hpp"
#include "doctest.h"

using namespace cctml;

namespace {

Dataset toy(std::size_t n, std::uint64_t seed) {
    std::istringstream schema(
        "a continuous feature\n"
        "b continuous feature\n"
        "flag binary feature\n"
        "kind categorical feature x,y,z\n"
        "label binary target\n"
        "value continuous target\n");
    Dataset d(parse_schema(schema));
    Rng rng(seed);
    for (std::size_t i = 0; i < n; ++i) {
        const double a = rng.uniform() * 10.0;
        const double b = rng.normal();
        const double flag = double(rng.below(2));
        const double kind = double(rng.below(3));
        const double eta = 1.5 * (a - 5.0) + 1.0 * flag - (kind == 2 ? 2.0 : 0.0);
        const double label = rng.uniform() < 1.0 / (1.0 + std::exp(-eta)) ? 1.0 : 0.0;
        const double value = 3.0 * a + 5.0 * flag + b;
        d.append_row(std::vector<double>{a, b, flag, kind, label, value});
    }
    return d;
}

const std::vector<std::string> kFeatures = {"a", "b", "flag", "kind"};

LearnerParams small() {
    LearnerParams p;
    p.max_depth = 4;
    p.trees = 30;
    p.stages = 20;
    return p;
}

double accuracy(const std::vector<double>& pred, std::span<const double> y) {
    double hit = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) hit += pred[i] == y[i];
    return hit / double(pred.size());
}

std::string text(const FittedModel& m) {
    std::ostringstream out;
    m.write(out);
    return out.str();
}

}  // namespace

TEST_CASE("learner names, tasks and parameter text") {
    for (auto id : kAllLearners) CHECK(parse_learner(to_string(id)) == id);
    CHECK_THROWS_AS(parse_learner("svm"), ContractError);
    CHECK_FALSE(supports(LearnerId::c45, Task::regression));
    CHECK_FALSE(supports(LearnerId::logit, Task::regression));
    CHECK(supports(LearnerId::adaboost, Task::regression));

    LearnerParams p;
    p.max_depth = 7;
    p.min_node_size = 3;
    p.lambda_ratio = 0.125;
    p.trees = 40;
    p.mtry = 2;
    p.stages = 9;
    p.boost_depth = 2;
    for (auto id : kAllLearners) {
        const auto back = LearnerParams::parse(p.describe(id));
        CHECK(back.describe(id) == p.describe(id));
    }
    CHECK(p.describe(LearnerId::logit) == "-");
    CHECK(p.describe(LearnerId::cart) == "max_depth=7 min_node=3");
    CHECK_THROWS_AS(LearnerParams::parse("depthx=3"), ContractError);
    CHECK_THROWS_AS(LearnerParams::parse("trees=2.5"), ContractError);
}

TEST_CASE("simplicity order prefers fewer trees, shallower depth and larger penalties") {
    LearnerParams a, b;
    a.max_depth = 3;
    b.max_depth = 5;
    CHECK(simplicity_key(LearnerId::cart, a) < simplicity_key(LearnerId::cart, b));
    a.lambda_ratio = 0.1;
    b.lambda_ratio = 0.01;
    CHECK(simplicity_key(LearnerId::lasso, a) < simplicity_key(LearnerId::lasso, b));
    a.trees = 100;
    b.trees = 300;
    CHECK(simplicity_key(LearnerId::rf, a) < simplicity_key(LearnerId::rf, b));
}

TEST_CASE("every classifier beats the majority class and survives a text round trip") {
    const auto train = toy(400, 1);
    const auto test = toy(400, 2);
    const auto y = test.column("label");
    double ones = 0;
    for (double v : y) ones += v;
    const double majority = std::max(ones, double(y.size()) - ones) / double(y.size());
    for (auto id : kAllLearners) {
        INFO(to_string(id));
        const auto m = fit_learner(id, Task::classification, train, "label", kFeatures, small(), {5, 1});
        const auto pred = m.predict(test);
        CHECK(accuracy(pred, y) > majority);
        const auto scores = m.score(test);
        for (double s : scores) {
            CHECK(s >= 0.0);
            CHECK(s <= 1.0);
        }
        std::istringstream in(text(m));
        const auto back = FittedModel::read(in);
        CHECK(text(back) == text(m));
        CHECK(back.predict(test) == pred);
        CHECK(back.score(test) == scores);
    }
}

TEST_CASE("regressors beat the mean predictor") {
    const auto train = toy(300, 3);
    const auto y = train.column("value");
    double mean = 0;
    for (double v : y) mean += v / double(y.size());
    double base = 0;
    for (double v : y) base += std::abs(v - mean);
    for (auto id : {LearnerId::cart, LearnerId::lasso, LearnerId::rf, LearnerId::adaboost}) {
        INFO(to_string(id));
        const auto m = fit_learner(id, Task::regression, train, "value", kFeatures, small(), {5, 1});
        const auto pred = m.predict(train);
        double err = 0;
        for (std::size_t r = 0; r < pred.size(); ++r) err += std::abs(pred[r] - y[r]);
        CHECK(err < 0.5 * base);
        std::istringstream in(text(m));
        CHECK(FittedModel::read(in).predict(train) == pred);
    }
    CHECK_THROWS_AS(fit_learner(LearnerId::c45, Task::regression, train, "value", kFeatures, small()),
                    ContractError);
    CHECK_THROWS_AS(fit_learner(LearnerId::logit, Task::regression, train, "value", kFeatures, small()),
                    ContractError);
}

TEST_CASE("fitting is seed-deterministic") {
    const auto train = toy(200, 4);
    const auto a = fit_learner(LearnerId::rf, Task::classification, train, "label", kFeatures, small(), {9, 1});
    const auto b = fit_learner(LearnerId::rf, Task::classification, train, "label", kFeatures, small(), {9, 0});
    CHECK(text(a) == text(b));
    const auto c = fit_learner(LearnerId::rf, Task::classification, train, "label", kFeatures, small(), {10, 1});
    CHECK(text(a) != text(c));
}

TEST_CASE("rows without a target are skipped and missing features are imputed") {
    auto train = toy(200, 6);
    const auto label = train.schema().index_of("label");
    const auto a = train.schema().index_of("a");
    train.set_missing(0, label);
    train.set_missing(1, a);
    const auto m = fit_learner(LearnerId::cart, Task::classification, train, "label", kFeatures, small());
    CHECK(std::get<TreeModel>(m.body).nodes()[0].count == 199);
    std::vector<double> row = {Dataset::missing_value(), 0.0, 1.0, 0.0};
    auto filled = row;
    filled[0] = m.imputer.fill_values()[0];
    CHECK(m.predict_row(row) == m.predict_row(filled));
    CHECK_THROWS_AS(m.predict_row(std::vector<double>{1.0}), ContractError);
}

TEST_CASE("classification targets must be 0/1 and the target cannot be a feature") {
    const auto train = toy(50, 7);
    CHECK_THROWS_AS(fit_learner(LearnerId::cart, Task::classification, train, "value", kFeatures, small()),
                    ContractError);
    const std::vector<std::string> bad = {"a", "label"};
    CHECK_THROWS_AS(fit_learner(LearnerId::cart, Task::classification, train, "label", bad, small()),
                    ContractError);
}

TEST_CASE("C4.5 bins continuous covariates into quartiles") {
    const auto train = toy(200, 8);
    const auto m = fit_learner(LearnerId::c45, Task::classification, train, "label", kFeatures, small());
    CHECK_FALSE(m.binner.empty());
    for (const auto& node : std::get<TreeModel>(m.body).nodes())
        if (!node.leaf && node.rule.feature <= 1) CHECK(node.rule.categorical);
}
