#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "doctest.h"

namespace fs = std::filesystem;
using cctml::app::run_cli;

namespace {

struct Run {
    int code;
    std::string out, err;
};

Run cli(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = run_cli(std::move(args), out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

fs::path fresh(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("cctml_cli_" + name);
    fs::remove_all(dir);
    return dir;
}

// generated once, shared by the cases below
const fs::path& corpus() {
    static const fs::path dir = [] {
        auto d = fresh("corpus");
        REQUIRE(cli({"generate", "--out", d.string(), "--seed", "9", "--households", "150"}).code == 0);
        return d;
    }();
    return dir;
}

}  // namespace

TEST_CASE("generate is byte-identical for a seed and writes a manifest") {
    const auto b = fresh("corpus_b");
    REQUIRE(cli({"generate", "--out", b.string(), "--seed", "9", "--households", "150"}).code == 0);
    for (const char* f : {"train.csv", "test.csv", "initial_states.csv", "households_train.csv", "children.schema"})
        CHECK(slurp(corpus() / f) == slurp(b / f));
    CHECK(fs::exists(b / "manifest.json"));
    const auto c = fresh("corpus_c");
    REQUIRE(cli({"generate", "--out", c.string(), "--seed", "10", "--households", "150"}).code == 0);
    CHECK(slurp(corpus() / "train.csv") != slurp(c / "train.csv"));
}

TEST_CASE("train writes a reproducible model") {
    const auto a = fresh("train_a"), b = fresh("train_b");
    const auto data = (corpus() / "train.csv").string();
    for (const auto& out : {a, b})
        REQUIRE(cli({"train", "--data", data, "--learner", "cart", "--outcome", "attendance", "--cv-folds", "3",
                     "--grid", "max_depth=3,5", "--seed", "4", "--out", out.string()})
                    .code == 0);
    CHECK(slurp(a / "attendance_cart.model") == slurp(b / "attendance_cart.model"));
    CHECK(slurp(a / "cv_report.csv") == slurp(b / "cv_report.csv"));
}

TEST_CASE("input errors exit with code 2") {
    const auto out = fresh("bad").string();
    CHECK(cli({"train", "--data", "/nonexistent.csv", "--learner", "cart", "--seed", "1", "--out", out}).code == 2);
    CHECK(cli({"train", "--data", (corpus() / "train.csv").string(), "--learner", "svm", "--seed", "1", "--out", out})
              .code == 2);
    CHECK(cli({"frobnicate"}).code == 2);
    CHECK(cli({"repro", "--out", out, "--seed", "1", "--config", "/nonexistent.cfg"}).code == 2);
}

TEST_CASE("an unbound submodel exits with code 3 and names it") {
    const auto dir = fresh("bind");
    fs::create_directories(dir);
    std::ofstream(dir / "bind.txt") << "income=const:5000\nattendance=const:1\nfailure=const:0\n";
    const auto r = cli({"simulate", "--sim-bindings", (dir / "bind.txt").string(), "--data",
                        (corpus() / "initial_states.csv").string(), "--actual", (corpus() / "train.csv").string(),
                        "--seed", "1", "--out", (dir / "out").string()});
    CHECK(r.code == 3);
    CHECK(r.err.find("pregnancy") != std::string::npos);
}

TEST_CASE("config values fill flags that are not given") {
    const auto dir = fresh("cfg");
    fs::create_directories(dir);
    std::ofstream(dir / "gen.cfg") << "# synthetic corpus\nseed=9\nhouseholds=150\n";
    REQUIRE(cli({"generate", "--out", (dir / "c").string(), "--config", (dir / "gen.cfg").string()}).code == 0);
    CHECK(slurp(corpus() / "train.csv") == slurp(dir / "c" / "train.csv"));
}
