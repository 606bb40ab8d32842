#include "cctml/learners.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "cctml/error.hpp"
#include "text.hpp"

namespace cctml {

namespace {

constexpr std::array<std::string_view, 6> kNames = {"cart", "c45", "lasso", "rf", "adaboost", "logit"};
constexpr std::array<std::string_view, 6> kDisplay = {"CART",          "C4.5",     "LASSO",
                                                      "Random forest", "Adaboost", "Logit"};

std::size_t idx(LearnerId id) { return static_cast<std::size_t>(id); }

template <class Fn>
void for_each_param(LearnerId id, Fn&& fn) {
    switch (id) {
        case LearnerId::cart:
        case LearnerId::c45:
            fn("max_depth");
            fn("min_node");
            break;
        case LearnerId::lasso: fn("lambda_ratio"); break;
        case LearnerId::rf:
            fn("trees");
            fn("mtry");
            fn("min_node");
            break;
        case LearnerId::adaboost:
            fn("stages");
            fn("depth");
            break;
        case LearnerId::logit: break;
    }
}

}  // namespace

std::string_view to_string(LearnerId id) { return kNames[idx(id)]; }
std::string_view display_name(LearnerId id) { return kDisplay[idx(id)]; }

LearnerId parse_learner(std::string_view name) {
    for (std::size_t i = 0; i < kNames.size(); ++i)
        if (name == kNames[i]) return static_cast<LearnerId>(i);
    throw ContractError("unknown learner '" + std::string(name) + "' (expected cart, c45, lasso, rf, adaboost or logit)");
}

std::string_view to_string(Task task) { return task == Task::classification ? "classification" : "regression"; }

Task parse_task(std::string_view name) {
    if (name == "classification") return Task::classification;
    if (name == "regression") return Task::regression;
    throw ContractError("unknown task '" + std::string(name) + "'");
}

bool supports(LearnerId id, Task task) {
    return task == Task::classification || (id != LearnerId::c45 && id != LearnerId::logit);
}

std::string LearnerParams::describe(LearnerId id) const {
    std::string out;
    for_each_param(id, [&](std::string_view key) {
        if (!out.empty()) out += ' ';
        out += key;
        out += '=';
        if (key == "max_depth") out += std::to_string(max_depth);
        else if (key == "min_node") out += std::to_string(min_node_size);
        else if (key == "lambda_ratio") out += detail::format_double(lambda_ratio);
        else if (key == "trees") out += std::to_string(trees);
        else if (key == "mtry") out += std::to_string(mtry);
        else if (key == "stages") out += std::to_string(stages);
        else if (key == "depth") out += std::to_string(boost_depth);
    });
    return out.empty() ? "-" : out;
}

LearnerParams LearnerParams::parse(std::string_view text) {
    LearnerParams p;
    for (const auto& tok : detail::split_ws(text)) {
        if (tok == "-") continue;
        const auto eq = tok.find('=');
        if (eq == std::string::npos) throw ContractError("parameter '" + tok + "' is not key=value");
        const auto key = tok.substr(0, eq);
        const auto val = tok.substr(eq + 1);
        double v = 0;
        if (!detail::parse_double(val, v)) throw ContractError("parameter '" + key + "' has a bad value '" + val + "'");
        auto whole = [&] {
            if (v < 0 || v != std::floor(v)) throw ContractError("parameter '" + key + "' must be a whole number");
            return static_cast<std::size_t>(v);
        };
        if (key == "max_depth") p.max_depth = static_cast<int>(whole());
        else if (key == "min_node") p.min_node_size = whole();
        else if (key == "lambda_ratio") p.lambda_ratio = v;
        else if (key == "trees") p.trees = whole();
        else if (key == "mtry") p.mtry = whole();
        else if (key == "stages") p.stages = whole();
        else if (key == "depth") p.boost_depth = static_cast<int>(whole());
        else throw ContractError("unknown parameter '" + key + "'");
    }
    return p;
}

std::vector<double> simplicity_key(LearnerId id, const LearnerParams& p) {
    switch (id) {
        case LearnerId::cart:
        case LearnerId::c45: return {double(p.max_depth), -double(p.min_node_size)};
        case LearnerId::lasso: return {-p.lambda_ratio};
        case LearnerId::rf: return {double(p.trees), double(p.mtry), -double(p.min_node_size)};
        case LearnerId::adaboost: return {double(p.stages), double(p.boost_depth)};
        case LearnerId::logit: return {};
    }
    return {};
}

std::vector<std::size_t> rows_with_target(const Dataset& data, std::string_view target) {
    const auto col = data.column(target);
    std::vector<std::size_t> rows;
    for (std::size_t r = 0; r < col.size(); ++r)
        if (!std::isnan(col[r])) rows.push_back(r);
    return rows;
}

// ---------------------------------------------------------------------------
// Fitting

namespace {

TreeConfig tree_config(const LearnerParams& p, CostKind cost, GainKind gain) {
    TreeConfig c;
    c.cost = cost;
    c.gain = gain;
    c.max_depth = p.max_depth;
    c.min_node_size = std::max<std::size_t>(1, p.min_node_size);
    return c;
}

}  // namespace

FittedModel fit_learner(LearnerId id, Task task, const Dataset& data, std::string_view target,
                        std::span<const std::string> features, const LearnerParams& params,
                        const FitOptions& options) {
    if (!supports(id, task))
        throw ContractError(std::string(to_string(id)) + " does not support " + std::string(to_string(task)));
    if (features.empty()) throw ContractError("fit_learner: no features");
    for (const auto& f : features)
        if (f == target) throw ContractError("fit_learner: target '" + f + "' listed as a feature");

    const auto rows = rows_with_target(data, target);
    if (rows.empty()) throw TrainingError("no rows with a value for target '" + std::string(target) + "'");
    const Dataset train = rows.size() == data.rows() ? data : data.select_rows(rows);
    const auto ycol = train.column(target);
    std::vector<double> y(ycol.begin(), ycol.end());
    if (task == Task::classification)
        for (double v : y)
            if (v != 0.0 && v != 1.0)
                throw ContractError("classification target '" + std::string(target) + "' must hold 0/1 values");

    FittedModel m;
    m.learner = id;
    m.task = task;
    m.target = std::string(target);
    m.params = params;
    m.seed = options.seed;
    m.imputer = Imputer::fit(train, features);
    DesignMatrix x = m.imputer.transform(train);
    const bool cls = task == Task::classification;

    switch (id) {
        case LearnerId::cart: {
            const auto cfg = tree_config(params, cls ? CostKind::gini : CostKind::squared, GainKind::plain);
            m.body = fit_tree(x, TreeTarget{y, cls ? 2u : 0u, {}}, cfg);
            break;
        }
        case LearnerId::c45: {
            m.binner = QuartileBinner::fit(x);
            x = m.binner.transform(x);
            m.body = fit_tree(x, TreeTarget{y, 2, {}}, tree_config(params, CostKind::entropy, GainKind::gain_ratio));
            break;
        }
        case LearnerId::lasso: {
            if (!(params.lambda_ratio >= 0.0)) throw ContractError("lambda_ratio must be >= 0");
            LassoOptions opt;
            if (params.lambda_ratio > 0.0 && params.lambda_ratio < 1.0) {
                // warm-started path down to the target; collinear columns stall a cold start
                const auto grid = lasso_lambda_grid(x, y, 20, params.lambda_ratio);
                m.body = std::move(fit_lasso_path(x, y, grid, opt).back());
            } else {
                opt.lambda = params.lambda_ratio * lasso_lambda_max(x, y);
                m.body = fit_lasso(x, y, opt);
            }
            break;
        }
        case LearnerId::rf: {
            ForestConfig cfg;
            cfg.trees = params.trees;
            cfg.mtry = params.mtry;
            cfg.tree.cost = cls ? CostKind::gini : CostKind::squared;
            cfg.tree.min_node_size = params.min_node_size;
            cfg.seed = options.seed;
            cfg.threads = options.threads;
            auto forest = fit_forest(x, TreeTarget{y, cls ? 2u : 0u, {}}, cfg);
            forest.oob.clear();
            m.body = std::move(forest);
            break;
        }
        case LearnerId::adaboost: {
            BoostConfig cfg;
            cfg.stages = params.stages;
            cfg.tree.max_depth = params.boost_depth;
            if (cls) {
                std::vector<double> pm(y.size());
                for (std::size_t r = 0; r < y.size(); ++r) pm[r] = y[r] > 0 ? 1.0 : -1.0;
                m.body = fit_adaboost(x, pm, cfg);
            } else {
                m.body = fit_adaboost_r2(x, y, cfg);
            }
            break;
        }
        case LearnerId::logit: m.body = fit_logit(x, y); break;
    }
    return m;
}

// ---------------------------------------------------------------------------
// Prediction

std::vector<std::string> FittedModel::feature_names() const {
    std::vector<std::string> out;
    for (const auto& f : features()) out.push_back(f.name);
    return out;
}

std::vector<double> FittedModel::prepare(std::span<const double> row) const {
    if (row.size() != features().size())
        throw ContractError("row has " + std::to_string(row.size()) + " values, model expects " +
                            std::to_string(features().size()));
    std::vector<double> v(row.begin(), row.end());
    imputer.fill(v);
    if (!binner.empty()) binner.transform_row(v);
    return v;
}

double FittedModel::raw_score(std::span<const double> v) const {
    const bool cls = task == Task::classification;
    return std::visit(
        [&](const auto& b) -> double {
            using T = std::decay_t<decltype(b)>;
            if constexpr (std::is_same_v<T, TreeModel>) {
                if (!cls) return predict_tree(b, v);
                const auto d = predict_tree_distribution(b, v);
                const double total = d[0] + d[1];
                return total > 0 ? d[1] / total : 0.0;
            } else if constexpr (std::is_same_v<T, LinearModel>) {
                const double p = predict_linear(b, v);
                return cls && b.link == Link::identity ? std::clamp(p, 0.0, 1.0) : p;
            } else if constexpr (std::is_same_v<T, ForestModel>) {
                return cls ? forest_vote_shares(b, v)[1] : predict_forest(b, v);
            } else {
                if (b.regression) return predict_adaboost_r2(b, v);
                return 1.0 / (1.0 + std::exp(-2.0 * predict_adaboost(b, v).margin));
            }
        },
        body);
}

double FittedModel::raw_predict(std::span<const double> v) const {
    if (task == Task::regression) return raw_score(v);
    return std::visit(
        [&](const auto& b) -> double {
            using T = std::decay_t<decltype(b)>;
            if constexpr (std::is_same_v<T, TreeModel>) return predict_tree(b, v);
            else if constexpr (std::is_same_v<T, LinearModel>) return predict_linear(b, v) >= 0.5 ? 1.0 : 0.0;
            else if constexpr (std::is_same_v<T, ForestModel>) return predict_forest(b, v);
            else return predict_adaboost(b, v).label > 0 ? 1.0 : 0.0;
        },
        body);
}

double FittedModel::score_row(std::span<const double> row) const { return raw_score(prepare(row)); }
double FittedModel::predict_row(std::span<const double> row) const { return raw_predict(prepare(row)); }

namespace {

template <class Fn>
std::vector<double> over_rows(const FittedModel& m, const Dataset& data, Fn&& fn) {
    std::vector<std::span<const double>> cols;
    for (const auto& f : m.features()) cols.push_back(data.column(f.name));
    std::vector<double> out(data.rows()), row(cols.size());
    for (std::size_t r = 0; r < data.rows(); ++r) {
        for (std::size_t k = 0; k < cols.size(); ++k) row[k] = cols[k][r];
        out[r] = fn(row);
    }
    return out;
}

}  // namespace

std::vector<double> FittedModel::score(const Dataset& data) const {
    return over_rows(*this, data, [&](std::span<const double> r) { return score_row(r); });
}

std::vector<double> FittedModel::predict(const Dataset& data) const {
    return over_rows(*this, data, [&](std::span<const double> r) { return predict_row(r); });
}

bool FittedModel::converged() const {
    if (const auto* lin = std::get_if<LinearModel>(&body)) return lin->converged;
    return true;
}

// ---------------------------------------------------------------------------
// Text form

void FittedModel::write(std::ostream& out) const {
    out << "model learner=" << to_string(learner) << " task=" << to_string(task) << " target=" << target
        << " seed=" << seed << '\n';
    out << "params " << params.describe(learner) << '\n';
    imputer.write(out);
    out << "binned " << (binner.empty() ? 0 : 1) << '\n';
    if (!binner.empty()) binner.write(out);
    std::visit(
        [&](const auto& b) {
            using T = std::decay_t<decltype(b)>;
            if constexpr (std::is_same_v<T, TreeModel>) dump_tree(out, b);
            else if constexpr (std::is_same_v<T, LinearModel>) write_linear(out, b);
            else if constexpr (std::is_same_v<T, ForestModel>) dump_forest(out, b);
            else dump_boost(out, b);
        },
        body);
}

FittedModel FittedModel::read(std::istream& in) {
    FittedModel m;
    {
        detail::LineReader reader(in);
        const auto head = reader.expect("model", 5);
        try {
            m.learner = parse_learner(reader.value(head[1], "learner"));
            m.task = parse_task(reader.value(head[2], "task"));
        } catch (const ContractError& e) {
            reader.fail(e.what());
        }
        m.target = reader.value(head[3], "target");
        std::size_t seed = 0;
        if (!detail::parse_size(reader.value(head[4], "seed"), seed)) reader.fail("bad seed");
        m.seed = seed;
        auto tok = reader.expect("params", 0);
        std::string text;
        for (std::size_t i = 1; i < tok.size(); ++i) text += tok[i] + ' ';
        try {
            m.params = LearnerParams::parse(text);
        } catch (const ContractError& e) {
            reader.fail(e.what());
        }
    }
    m.imputer = Imputer::read(in);
    {
        detail::LineReader reader(in);
        const auto tok = reader.expect("binned", 2);
        if (tok[1] == "1") m.binner = QuartileBinner::read(in);
        else if (tok[1] != "0") reader.fail("binned must be 0 or 1");
    }
    switch (m.learner) {
        case LearnerId::cart:
        case LearnerId::c45: m.body = load_tree(in); break;
        case LearnerId::lasso:
        case LearnerId::logit: m.body = read_linear(in); break;
        case LearnerId::rf: m.body = load_forest(in); break;
        case LearnerId::adaboost: m.body = load_boost(in); break;
    }
    return m;
}

}  // namespace cctml
