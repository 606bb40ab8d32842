#include <sstream>

#include "cctml/error.hpp"
#include "cctml/resample.hpp"
#include "doctest.h"
#include "resample_props.hpp"

using namespace cctml;

namespace {

struct Sample {
    DesignMatrix x;
    std::vector<double> y;
};

Sample imbalanced(std::size_t minor, std::size_t major) {
    Sample s{DesignMatrix({{"v", ColumnKind::continuous, 0}}, minor + major), {}};
    for (std::size_t r = 0; r < minor + major; ++r) {
        s.x(r, 0) = double(r);
        s.y.push_back(r < minor ? 1.0 : 0.0);
    }
    return s;
}

}  // namespace

TEST_CASE("undersampling the pregnancy-sized sample to parity") {
    const auto s = imbalanced(489, 3291);
    ResamplePlan plan;
    plan.method = ResampleMethod::under;
    plan.ratio = 1.0;
    plan.seed = 5;
    const auto r = apply_resample(s.x, s.y, plan);
    std::size_t ones = 0;
    for (double v : r.y) ones += v == 1.0;
    CHECK(ones == 489);
    CHECK(r.y.size() == 978);
}

TEST_CASE("plan none leaves the data unchanged") {
    const auto s = imbalanced(5, 20);
    const auto r = apply_resample(s.x, s.y, ResamplePlan{});
    CHECK(r.y == s.y);
    for (std::size_t i = 0; i < s.y.size(); ++i) CHECK(r.x(i, 0) == s.x(i, 0));
}

TEST_CASE("SMOTE on two 1-D minority points stays between them") {
    DesignMatrix x({{"v", ColumnKind::continuous, 0}}, 8);
    std::vector<double> y = {1, 1, 0, 0, 0, 0, 0, 0};
    x(0, 0) = 1.0;
    x(1, 0) = 3.0;
    for (std::size_t r = 2; r < 8; ++r) x(r, 0) = 10.0 + double(r);
    ResamplePlan plan;
    plan.method = ResampleMethod::smote;
    plan.smote_k = 1;
    plan.seed = 3;
    const auto r = apply_resample(x, y, plan);
    CHECK(r.y.size() == 12);
    for (std::size_t i = 8; i < r.y.size(); ++i) {
        CHECK(r.provenance[i].origin == RowOrigin::synthetic);
        CHECK(r.x(i, 0) >= 1.0);
        CHECK(r.x(i, 0) <= 3.0);
    }
}

TEST_CASE("SMOTE reports the minority deficit") {
    const auto s = imbalanced(3, 30);
    ResamplePlan plan;
    plan.method = ResampleMethod::smote;
    plan.smote_k = 5;
    try {
        apply_resample(s.x, s.y, plan);
        FAIL("expected ContractError");
    } catch (const ContractError& e) {
        CHECK(std::string(e.what()).find("short by 3") != std::string::npos);
    }
}

TEST_CASE("plan validation and method names") {
    ResamplePlan plan;
    plan.ratio = 0.0;
    CHECK_THROWS_AS(plan.validate(), ContractError);
    plan.ratio = 1.5;
    CHECK_THROWS_AS(plan.validate(), ContractError);
    CHECK(parse_resample_method("smote") == ResampleMethod::smote);
    CHECK_THROWS_AS(parse_resample_method("adasyn"), ContractError);
}

TEST_CASE("resampling property sweep") {
    Rng rng(777);
    for (int i = 0; i < 100; ++i) {
        const auto msg = oracle::resample_case(rng);
        INFO("case " << i);
        CHECK(msg.empty());
        if (!msg.empty()) MESSAGE(msg);
    }
}

TEST_CASE("dataset form copies non-feature columns and keeps the schema") {
    std::istringstream schema_text(
        "id continuous id\n"
        "x continuous feature\n"
        "g categorical feature a,b,c\n"
        "t binary target\n");
    const auto schema = parse_schema(schema_text);
    Dataset d(schema);
    for (int i = 0; i < 30; ++i)
        d.append_row(std::vector<double>{double(i), double(i) * 0.5, double(i % 3), i < 8 ? 1.0 : 0.0});
    ResamplePlan plan;
    plan.method = ResampleMethod::smote;
    plan.smote_k = 2;
    plan.seed = 1;
    std::vector<RowSource> prov;
    const auto out = apply_resample(d, "t", plan, &prov);
    CHECK(out.schema() == schema);
    CHECK(out.rows() == 30 + 14);
    for (std::size_t i = 30; i < out.rows(); ++i) {
        CHECK(out.at(i, "id") == d.at(prov[i].source, "id"));
        CHECK(out.at(i, "g") == d.at(prov[i].source, "g"));
        CHECK(out.at(i, "t") == 1.0);
    }
}
