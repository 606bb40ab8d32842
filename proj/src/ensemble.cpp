#include "cctml/ensemble.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <ostream>
#include <thread>

#include "cctml/error.hpp"
#include "cctml/rng.hpp"
#include "text.hpp"

namespace cctml {

namespace {

/// Runs job(i) for i in [0, count) on up to `threads` workers. Each job
/// writes only its own slot, so the outcome does not depend on scheduling.
template <class Job>
void parallel_for(std::size_t count, unsigned threads, Job&& job) {
    if (threads == 0) threads = std::max(1U, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, count));
    if (threads <= 1) {
        for (std::size_t i = 0; i < count; ++i) job(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t)
        pool.emplace_back([&] {
            for (std::size_t i; (i = next.fetch_add(1)) < count;) {
                try {
                    job(i);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                }
            }
        });
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
}

const char* cost_name(CostKind c) {
    switch (c) {
        case CostKind::gini: return "gini";
        case CostKind::entropy: return "entropy";
        case CostKind::squared: return "squared";
    }
    return "?";
}

CostKind parse_cost(detail::LineReader& reader, const std::string& s) {
    if (s == "gini") return CostKind::gini;
    if (s == "entropy") return CostKind::entropy;
    if (s == "squared") return CostKind::squared;
    reader.fail("unknown cost '" + s + "'");
}

std::string config_tokens(const TreeConfig& c) {
    return std::string("cost=") + cost_name(c.cost) + " ratio=" + (c.gain == GainKind::gain_ratio ? "1" : "0") +
           " depth=" + std::to_string(c.max_depth) + " minnode=" + std::to_string(c.min_node_size) +
           " mingain=" + detail::format_real(c.min_gain);
}

TreeConfig parse_config(detail::LineReader& reader, const std::vector<std::string>& tok, std::size_t at) {
    TreeConfig c;
    c.cost = parse_cost(reader, reader.value(tok[at], "cost"));
    c.gain = reader.value(tok[at + 1], "ratio") == "1" ? GainKind::gain_ratio : GainKind::plain;
    c.max_depth = static_cast<int>(reader.count(reader.value(tok[at + 2], "depth")));
    c.min_node_size = reader.count(reader.value(tok[at + 3], "minnode"));
    c.min_gain = reader.real(reader.value(tok[at + 4], "mingain"));
    return c;
}

}  // namespace

std::size_t default_mtry(std::size_t n_features, bool classification) {
    const auto k = static_cast<double>(n_features);
    const auto p = static_cast<std::size_t>(classification ? std::floor(std::sqrt(k)) : std::floor(k / 3.0));
    return std::clamp<std::size_t>(p, 1, std::max<std::size_t>(1, n_features));
}

ForestModel fit_forest(const DesignMatrix& x, const TreeTarget& target, const ForestConfig& config) {
    if (config.trees < 1) throw ContractError("fit_forest: need at least one tree");
    if (x.rows() == 0) throw ContractError("fit_forest: empty dataset");
    if (x.rows() > std::numeric_limits<std::uint32_t>::max()) throw ContractError("fit_forest: too many rows");
    const std::size_t k = x.cols();
    const std::size_t p = config.mtry ? config.mtry : default_mtry(k, target.classification());
    if (p < 1 || p > k) throw ContractError("fit_forest: mtry must lie in [1, K]");

    ForestModel model;
    model.n_rows = x.rows();
    model.n_features = k;
    model.n_classes = target.n_classes;
    model.mtry = p;
    model.seed = config.seed;
    model.tree_config = config.tree;
    model.tree_config.mtry = p;
    if (model.tree_config.min_node_size == 0) model.tree_config.min_node_size = target.classification() ? 1 : 5;
    model.tree_config.validate();
    model.trees.resize(config.trees);
    model.oob.resize(config.trees);

    const std::size_t n = x.rows();
    parallel_for(config.trees, config.threads, [&](std::size_t t) {
        Rng rng = stream(config.seed, t);
        std::vector<std::size_t> rows(n);
        std::vector<char> drawn(n, 0);
        if (config.identity_bootstrap) {
            std::iota(rows.begin(), rows.end(), 0);
            std::fill(drawn.begin(), drawn.end(), 1);
        } else {
            for (auto& r : rows) {
                r = static_cast<std::size_t>(rng.below(n));
                drawn[r] = 1;
            }
            std::sort(rows.begin(), rows.end());
        }
        auto& oob = model.oob[t];
        for (std::size_t r = 0; r < n; ++r)
            if (!drawn[r]) oob.push_back(static_cast<std::uint32_t>(r));
        model.trees[t] = fit_tree(x, target, model.tree_config, rows, p < k ? &rng : nullptr);
    });
    return model;
}

std::vector<double> forest_vote_shares(const ForestModel& model, std::span<const double> row) {
    std::vector<double> votes(std::max<std::size_t>(model.n_classes, 1), 0.0);
    for (const auto& tree : model.trees) votes[static_cast<std::size_t>(predict_tree(tree, row))] += 1.0;
    for (auto& v : votes) v /= static_cast<double>(model.trees.size());
    return votes;
}

namespace {

double vote(const ForestModel& model, std::span<const double> row, std::span<const std::size_t> members,
            std::vector<double>& counts) {
    if (model.classification()) {
        std::fill(counts.begin(), counts.end(), 0.0);
        for (auto t : members) counts[static_cast<std::size_t>(predict_tree(model.trees[t], row))] += 1.0;
        std::size_t best = 0;
        for (std::size_t c = 1; c < counts.size(); ++c)
            if (counts[c] > counts[best]) best = c;
        return static_cast<double>(best);
    }
    double sum = 0.0;
    for (auto t : members) sum += predict_tree(model.trees[t], row);
    return sum / static_cast<double>(members.size());
}

}  // namespace

double predict_forest(const ForestModel& model, std::span<const double> row) {
    std::vector<std::size_t> all(model.trees.size());
    std::iota(all.begin(), all.end(), 0);
    std::vector<double> counts(model.n_classes, 0.0);
    return vote(model, row, all, counts);
}

OobResult oob_error(const ForestModel& model, const DesignMatrix& x, std::span<const double> y) {
    if (x.rows() != model.n_rows || y.size() != model.n_rows)
        throw ContractError("oob_error: data does not match the fitted rows");
    std::vector<std::vector<std::size_t>> members(model.n_rows);
    for (std::size_t t = 0; t < model.oob.size(); ++t)
        for (auto r : model.oob[t]) members[r].push_back(t);
    OobResult out;
    std::vector<double> counts(model.n_classes, 0.0);
    double loss = 0.0;
    for (std::size_t r = 0; r < model.n_rows; ++r) {
        if (members[r].empty()) {
            ++out.skipped;
            continue;
        }
        const double pred = vote(model, x.row(r), members[r], counts);
        loss += model.classification() ? double(pred != y[r]) : (pred - y[r]) * (pred - y[r]);
        ++out.evaluated;
    }
    out.error = out.evaluated ? loss / static_cast<double>(out.evaluated) : std::numeric_limits<double>::quiet_NaN();
    return out;
}

Importance variable_importance(const ForestModel& model, const DesignMatrix& x, std::span<const double> y,
                               std::uint64_t seed) {
    if (x.rows() != model.n_rows || y.size() != model.n_rows)
        throw ContractError("variable_importance: data does not match the fitted rows");
    const std::size_t k = model.n_features;
    const std::size_t n_trees = model.trees.size();
    Importance imp;
    imp.mean_decrease_gini.assign(k, 0.0);
    for (const auto& tree : model.trees)
        for (const auto& node : tree.nodes())
            if (!node.leaf) imp.mean_decrease_gini[node.rule.feature] += node.weight * node.gain;
    for (auto& v : imp.mean_decrease_gini) v /= static_cast<double>(n_trees);

    // per tree, per covariate loss increase; reduced in tree order afterwards
    std::vector<std::vector<double>> delta(n_trees, std::vector<double>(k, 0.0));
    std::vector<char> used(n_trees, 0);
    parallel_for(n_trees, 0, [&](std::size_t t) {
        const auto& oob = model.oob[t];
        if (oob.empty()) return;
        used[t] = 1;
        const auto& tree = model.trees[t];
        auto loss = [&](double pred, double truth) {
            return model.classification() ? double(pred != truth) : (pred - truth) * (pred - truth);
        };
        std::vector<double> row(k);
        double base = 0.0;
        for (auto r : oob) {
            for (std::size_t j = 0; j < k; ++j) row[j] = x(r, j);
            base += loss(predict_tree(tree, row), y[r]);
        }
        std::vector<std::uint32_t> perm(oob.begin(), oob.end());
        for (std::size_t j = 0; j < k; ++j) {
            Rng rng = stream(seed, t * k + j);
            std::copy(oob.begin(), oob.end(), perm.begin());
            rng.shuffle(perm);
            double permuted = 0.0;
            for (std::size_t i = 0; i < oob.size(); ++i) {
                const auto r = oob[i];
                for (std::size_t c = 0; c < k; ++c) row[c] = x(r, c);
                row[j] = x(perm[i], j);
                permuted += loss(predict_tree(tree, row), y[r]);
            }
            // accuracy drop equals error-rate rise
            delta[t][j] = (permuted - base) / static_cast<double>(oob.size());
        }
    });
    imp.mean_decrease_accuracy.assign(k, 0.0);
    std::size_t counted = 0;
    for (std::size_t t = 0; t < n_trees; ++t) {
        if (!used[t]) continue;
        ++counted;
        for (std::size_t j = 0; j < k; ++j) imp.mean_decrease_accuracy[j] += delta[t][j];
    }
    for (auto& v : imp.mean_decrease_accuracy) v = counted ? v / static_cast<double>(counted) : 0.0;
    return imp;
}

void dump_forest(std::ostream& out, const ForestModel& model) {
    out << "forest trees=" << model.trees.size() << " mtry=" << model.mtry << " classes=" << model.n_classes
        << " features=" << model.n_features << " rows=" << model.n_rows << " seed=" << model.seed << ' '
        << config_tokens(model.tree_config) << '\n';
    for (const auto& t : model.trees) dump_tree(out, t);
}

ForestModel load_forest(std::istream& in) {
    detail::LineReader reader(in);
    const auto head = reader.expect("forest", 12);
    ForestModel m;
    const auto n = reader.count(reader.value(head[1], "trees"));
    m.mtry = reader.count(reader.value(head[2], "mtry"));
    m.n_classes = reader.count(reader.value(head[3], "classes"));
    m.n_features = reader.count(reader.value(head[4], "features"));
    m.n_rows = reader.count(reader.value(head[5], "rows"));
    m.seed = reader.count(reader.value(head[6], "seed"));
    m.tree_config = parse_config(reader, head, 7);
    m.tree_config.mtry = m.mtry;
    if (n == 0) reader.fail("forest has no trees");
    for (std::size_t t = 0; t < n; ++t) {
        m.trees.push_back(load_tree(in));
        if (m.trees.back().n_features() != m.n_features) reader.fail("member tree feature count mismatch");
    }
    m.oob.resize(n);
    return m;
}

// ---------------------------------------------------------------------------
// AdaBoost

double adaboost_beta(double error) { return 0.5 * std::log((1.0 - error) / error); }

BoostModel fit_adaboost(const DesignMatrix& x, std::span<const double> y, const BoostConfig& config,
                        BoostTrace* trace) {
    if (config.stages < 1) throw ContractError("fit_adaboost: need at least one stage");
    if (x.rows() == 0 || y.size() != x.rows()) throw ContractError("fit_adaboost: target does not match rows");
    config.tree.validate();
    const std::size_t n = x.rows();
    std::vector<double> cls(n);
    bool pos = false, neg = false;
    for (std::size_t r = 0; r < n; ++r) {
        if (y[r] == 1.0) pos = true;
        else if (y[r] == -1.0) neg = true;
        else throw ContractError("fit_adaboost: labels must be -1 or +1");
        cls[r] = y[r] > 0 ? 1.0 : 0.0;
    }
    if (!pos || !neg) throw ContractError("fit_adaboost: both classes must be present");

    BoostModel model;
    model.tree_config = config.tree;
    model.stop_reason = "stages";
    std::vector<double> w(n, 1.0 / static_cast<double>(n));
    std::vector<double> margin(n, 0.0), g(n);
    double bound = 1.0;
    for (std::size_t s = 0; s < config.stages; ++s) {
        auto tree = fit_tree(x, TreeTarget{cls, 2, w}, config.tree);
        double total = 0.0, wrong = 0.0;
        for (std::size_t r = 0; r < n; ++r) {
            g[r] = predict_tree(tree, x.row(r)) == 1.0 ? 1.0 : -1.0;
            total += w[r];
            if (g[r] != y[r]) wrong += w[r];
        }
        const double err = wrong / total;
        if (err >= 0.5) {
            model.stop_reason = "weak";
            break;
        }
        const bool perfect = err <= 0.0;
        const double used_err = std::max(err, config.epsilon);
        const double beta = adaboost_beta(used_err);
        bound *= 2.0 * std::sqrt(used_err * (1.0 - used_err));

        double z = 0.0;
        for (std::size_t r = 0; r < n; ++r) {
            if (g[r] != y[r]) w[r] *= std::exp(2.0 * beta);
            z += w[r];
        }
        double updated = 0.0;
        for (std::size_t r = 0; r < n; ++r) {
            w[r] /= z;
            if (g[r] != y[r]) updated += w[r];
        }
        for (std::size_t r = 0; r < n; ++r) margin[r] += beta * g[r];
        model.stages.push_back({std::move(tree), beta, err});

        if (trace) {
            std::size_t miss = 0;
            double loss = 0.0;
            for (std::size_t r = 0; r < n; ++r) {
                miss += (margin[r] >= 0 ? 1.0 : -1.0) != y[r];
                loss += std::exp(-y[r] * margin[r]);
            }
            trace->error.push_back(err);
            trace->beta.push_back(beta);
            trace->updated_error.push_back(updated);
            trace->training_error.push_back(static_cast<double>(miss) / static_cast<double>(n));
            trace->bound.push_back(bound);
            trace->exp_loss.push_back(loss);
        }
        if (perfect) {
            model.stop_reason = "perfect";
            break;
        }
    }
    if (model.stages.empty()) throw TrainingError("fit_adaboost: the first base learner is no better than chance");
    return model;
}

BoostPrediction predict_adaboost(const BoostModel& model, std::span<const double> row) {
    BoostPrediction p;
    for (const auto& s : model.stages) p.margin += s.beta * (predict_tree(s.tree, row) == 1.0 ? 1.0 : -1.0);
    p.label = p.margin >= 0.0 ? 1.0 : -1.0;
    return p;
}

BoostModel fit_adaboost_r2(const DesignMatrix& x, std::span<const double> y, const BoostConfig& config) {
    if (config.stages < 1) throw ContractError("fit_adaboost_r2: need at least one stage");
    if (x.rows() == 0 || y.size() != x.rows()) throw ContractError("fit_adaboost_r2: target does not match rows");
    auto tree_config = config.tree;
    tree_config.cost = CostKind::squared;
    tree_config.gain = GainKind::plain;
    tree_config.validate();
    const std::size_t n = x.rows();
    BoostModel model;
    model.regression = true;
    model.tree_config = tree_config;
    model.stop_reason = "stages";
    std::vector<double> w(n, 1.0 / static_cast<double>(n)), loss(n);
    for (std::size_t s = 0; s < config.stages; ++s) {
        auto tree = fit_tree(x, TreeTarget{y, 0, w}, tree_config);
        double worst = 0.0;
        for (std::size_t r = 0; r < n; ++r) {
            loss[r] = std::abs(y[r] - predict_tree(tree, x.row(r)));
            worst = std::max(worst, loss[r]);
        }
        double avg = 0.0;
        if (worst > 0.0)
            for (std::size_t r = 0; r < n; ++r) avg += w[r] * loss[r] / worst;
        if (avg >= 0.5) {
            model.stop_reason = "weak";
            break;
        }
        const bool perfect = avg <= 0.0;
        const double used = std::max(avg, config.epsilon);
        const double beta = used / (1.0 - used);
        double z = 0.0;
        for (std::size_t r = 0; r < n; ++r) {
            const double l = worst > 0.0 ? loss[r] / worst : 0.0;
            w[r] *= std::pow(beta, 1.0 - l);
            z += w[r];
        }
        for (auto& v : w) v /= z;
        model.stages.push_back({std::move(tree), std::log(1.0 / beta), avg});
        if (perfect) {
            model.stop_reason = "perfect";
            break;
        }
    }
    if (model.stages.empty()) throw TrainingError("fit_adaboost_r2: the first base learner has average loss >= 0.5");
    return model;
}

double predict_adaboost_r2(const BoostModel& model, std::span<const double> row) {
    std::vector<std::pair<double, double>> votes;
    double total = 0.0;
    for (const auto& s : model.stages) {
        votes.emplace_back(predict_tree(s.tree, row), s.beta);
        total += s.beta;
    }
    std::sort(votes.begin(), votes.end());
    double acc = 0.0;
    for (const auto& [v, wt] : votes) {
        acc += wt;
        if (acc >= 0.5 * total) return v;
    }
    return votes.back().first;
}

void dump_boost(std::ostream& out, const BoostModel& model) {
    out << (model.regression ? "adaboost_r2" : "adaboost") << " stages=" << model.stages.size() << " stop=" << model.stop_reason << ' '
        << config_tokens(model.tree_config) << '\n';
    for (const auto& s : model.stages) {
        out << "stage beta=" << detail::format_real(s.beta) << " error=" << detail::format_real(s.error) << '\n';
        dump_tree(out, s.tree);
    }
}

BoostModel load_boost(std::istream& in) {
    detail::LineReader reader(in);
    const auto head = reader.next();
    if ((head[0] != "adaboost" && head[0] != "adaboost_r2") || head.size() != 8)
        reader.fail("expected an 'adaboost' header");
    BoostModel m;
    m.regression = head[0] == "adaboost_r2";
    const auto n = reader.count(reader.value(head[1], "stages"));
    m.stop_reason = reader.value(head[2], "stop");
    m.tree_config = parse_config(reader, head, 3);
    for (std::size_t s = 0; s < n; ++s) {
        const auto tok = reader.expect("stage", 3);
        BoostStage st;
        st.beta = reader.real(reader.value(tok[1], "beta"));
        st.error = reader.real(reader.value(tok[2], "error"));
        st.tree = load_tree(in);
        m.stages.push_back(std::move(st));
    }
    return m;
}

}  // namespace cctml
