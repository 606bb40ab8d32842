#include "cctml/trees.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <string>

#include "cctml/error.hpp"
#include "text.hpp"

namespace cctml {

void TreeConfig::validate() const {
    if (max_depth < 1) throw ContractError("TreeConfig: max_depth must be >= 1");
    if (min_node_size < 1) throw ContractError("TreeConfig: min_node_size must be >= 1");
    if (!(min_gain >= 0.0)) throw ContractError("TreeConfig: min_gain must be >= 0");
}

double class_impurity(std::span<const double> class_weights, CostKind kind) {
    double total = 0.0;
    for (double w : class_weights) total += w;
    if (!(total > 0.0)) return 0.0;
    double acc = 0.0;
    for (double w : class_weights) {
        if (w <= 0.0) continue;  // 0 log 0 = 0
        const double p = w / total;
        acc += kind == CostKind::entropy ? -p * std::log(p) : p * (1.0 - p);
    }
    return acc;
}

double node_cost(std::span<const double> values, CostKind kind) {
    if (values.empty()) throw ContractError("node_cost: empty node");
    if (kind == CostKind::squared) {
        double mean = 0.0;
        for (double v : values) mean += v;
        mean /= static_cast<double>(values.size());
        double sse = 0.0;
        for (double v : values) sse += (v - mean) * (v - mean);
        return sse;
    }
    std::size_t classes = 0;
    for (double v : values) classes = std::max(classes, static_cast<std::size_t>(v) + 1);
    std::vector<double> counts(classes, 0.0);
    for (double v : values) counts[static_cast<std::size_t>(v)] += 1.0;
    return class_impurity(counts, kind);
}

bool SplitRule::goes_left(double x, bool& unseen) const noexcept {
    if (!categorical) return x <= threshold;
    const auto level = static_cast<std::int64_t>(x);
    if (level < 0 || level >= 64 || !((seen_levels >> level) & 1U)) {
        unseen = true;
        return true;
    }
    return (left_levels >> level) & 1U;
}

namespace {

constexpr std::size_t kExhaustiveLevels = 12;

/// Sufficient statistics of a set of rows.
struct Stats {
    std::vector<double> classes;  // classification: weight per class
    double weight = 0.0;
    double sum = 0.0;    // regression: weighted sum of centred responses
    double sumsq = 0.0;  // regression: weighted sum of squared centred responses
    std::size_t count = 0;

    explicit Stats(std::size_t n_classes = 0) : classes(n_classes, 0.0) {}

    void add(double y, double w, double centre) {
        ++count;
        weight += w;
        if (!classes.empty()) {
            classes[static_cast<std::size_t>(y)] += w;
        } else {
            const double d = y - centre;
            sum += w * d;
            sumsq += w * d * d;
        }
    }
    void add(const Stats& o) {
        count += o.count;
        weight += o.weight;
        sum += o.sum;
        sumsq += o.sumsq;
        for (std::size_t c = 0; c < classes.size(); ++c) classes[c] += o.classes[c];
    }
    Stats minus(const Stats& o) const {
        Stats r = *this;
        r.count -= o.count;
        r.weight -= o.weight;
        r.sum -= o.sum;
        r.sumsq -= o.sumsq;
        for (std::size_t c = 0; c < classes.size(); ++c) r.classes[c] -= o.classes[c];
        return r;
    }
    void clear() {
        std::fill(classes.begin(), classes.end(), 0.0);
        weight = sum = sumsq = 0.0;
        count = 0;
    }

    /// Per-unit-weight impurity: Gini, entropy, or weighted variance.
    double impurity(CostKind kind) const {
        if (!(weight > 0.0)) return 0.0;
        if (!classes.empty()) return class_impurity(classes, kind);
        const double mean = sum / weight;
        return std::max(0.0, sumsq / weight - mean * mean);
    }
};

double split_entropy(std::span<const double> branch_weights, double total) {
    double acc = 0.0;
    for (double w : branch_weights)
        if (w > 0.0) {
            const double p = w / total;
            acc -= p * std::log(p);
        }
    return acc;
}

struct Candidate {
    double criterion;
    double gain;
    SplitRule rule;
    std::size_t left_count;
    std::size_t right_count;
};

class SplitSearch {
public:
    SplitSearch(const DesignMatrix& x, const TreeTarget& t, std::span<const std::size_t> rows,
                const TreeConfig& config)
        : x_(x), t_(t), rows_(rows), config_(config), total_(t.n_classes) {
        if (!t.classification()) {
            double w = 0.0, s = 0.0;
            for (auto r : rows) {
                w += weight(r);
                s += weight(r) * t.y[r];
            }
            centre_ = w > 0.0 ? s / w : 0.0;
        }
        for (auto r : rows) total_.add(t.y[r], weight(r), centre_);
        parent_impurity_ = total_.impurity(config.cost);
    }

    bool pure() const {
        if (t_.classification()) {
            for (double w : total_.classes)
                if (w > 0.0) return w >= total_.weight;
            return true;
        }
        return !(parent_impurity_ > 0.0);
    }

    /// Visits every admissible candidate of feature k in (threshold or mask)
    /// order. `visit` returns true to stop early.
    template <class Visit>
    void sweep(std::size_t k, Visit&& visit) {
        if (x_.feature(k).kind == ColumnKind::categorical) sweep_categorical(k, visit);
        else sweep_ordered(k, visit);
    }

private:
    double weight(std::size_t r) const { return t_.weights.empty() ? 1.0 : t_.weights[r]; }

    bool admissible(std::size_t left, std::size_t right) const {
        return left >= config_.min_node_size && right >= config_.min_node_size && left > 0 && right > 0;
    }

    double gain_of(const Stats& left, const Stats& right) const {
        const double w = total_.weight;
        const double g = parent_impurity_ - (left.weight / w * left.impurity(config_.cost) +
                                             right.weight / w * right.impurity(config_.cost));
        return g;
    }

    template <class Visit>
    void sweep_ordered(std::size_t k, Visit& visit) {
        const auto col = x_.column(k);
        sorted_.clear();
        for (auto r : rows_) sorted_.emplace_back(col[r], r);
        std::sort(sorted_.begin(), sorted_.end());
        if (sorted_.front().first == sorted_.back().first) return;
        Stats left(t_.n_classes);
        const std::size_t n = sorted_.size();
        for (std::size_t i = 0; i + 1 < n; ++i) {
            const auto r = sorted_[i].second;
            left.add(t_.y[r], weight(r), centre_);
            if (sorted_[i].first == sorted_[i + 1].first) continue;
            if (!admissible(i + 1, n - i - 1)) continue;
            const Stats right = total_.minus(left);
            const double g = gain_of(left, right);
            double crit = g;
            if (config_.gain == GainKind::gain_ratio) {
                const double bw[2] = {left.weight, right.weight};
                crit = g / split_entropy(bw, total_.weight);
            }
            SplitRule rule;
            rule.feature = k;
            rule.threshold = sorted_[i].first;
            if (visit(Candidate{crit, g, rule, i + 1, n - i - 1})) return;
        }
    }

    template <class Visit>
    void sweep_categorical(std::size_t k, Visit& visit) {
        const auto col = x_.column(k);
        const auto n_levels = x_.feature(k).n_levels;
        if (n_levels > 64) throw ContractError("categorical feature '" + x_.feature(k).name + "' exceeds 64 levels");
        std::vector<Stats> per_level(n_levels, Stats(t_.n_classes));
        for (auto r : rows_) {
            const auto level = static_cast<std::size_t>(col[r]);
            if (level >= n_levels) throw ContractError("categorical value out of range in '" + x_.feature(k).name + "'");
            per_level[level].add(t_.y[r], weight(r), centre_);
        }
        std::vector<std::size_t> present;
        std::uint64_t seen = 0;
        for (std::size_t l = 0; l < n_levels; ++l)
            if (per_level[l].count > 0) {
                present.push_back(l);
                seen |= std::uint64_t{1} << l;
            }
        const std::size_t m = present.size();
        if (m < 2) return;

        double info = 1.0;
        if (config_.gain == GainKind::gain_ratio) {
            std::vector<double> bw;
            for (auto l : present) bw.push_back(per_level[l].weight);
            info = split_entropy(bw, total_.weight);
        }

        auto emit = [&](const Stats& left, std::uint64_t mask) {
            if (!admissible(left.count, total_.count - left.count)) return false;
            const Stats right = total_.minus(left);
            const double g = gain_of(left, right);
            SplitRule rule;
            rule.feature = k;
            rule.categorical = true;
            rule.left_levels = mask;
            rule.seen_levels = seen;
            return visit(Candidate{g / info, g, rule, left.count, right.count});
        };

        Stats left(t_.n_classes);
        if (m <= kExhaustiveLevels) {
            // the highest present level always goes right
            const std::uint64_t subsets = std::uint64_t{1} << (m - 1);
            for (std::uint64_t s = 1; s < subsets; ++s) {
                left.clear();
                std::uint64_t mask = 0;
                for (std::size_t j = 0; j + 1 < m; ++j)
                    if ((s >> j) & 1U) {
                        left.add(per_level[present[j]]);
                        mask |= std::uint64_t{1} << present[j];
                    }
                if (emit(left, mask)) return;
            }
            return;
        }
        auto key = [&](std::size_t l) {
            const auto& st = per_level[l];
            if (!st.classes.empty()) return st.classes.size() > 1 ? st.classes[1] / st.weight : 0.0;
            return st.sum / st.weight;
        };
        std::stable_sort(present.begin(), present.end(), [&](auto a, auto b) { return key(a) < key(b); });
        std::uint64_t mask = 0;
        for (std::size_t j = 0; j + 1 < m; ++j) {
            left.add(per_level[present[j]]);
            mask |= std::uint64_t{1} << present[j];
            if (emit(left, mask)) return;
        }
    }

    const DesignMatrix& x_;
    const TreeTarget& t_;
    std::span<const std::size_t> rows_;
    const TreeConfig& config_;
    Stats total_;
    double centre_ = 0.0;
    double parent_impurity_ = 0.0;
    std::vector<std::pair<double, std::size_t>> sorted_;
};

}  // namespace

std::optional<SplitChoice> best_split(const DesignMatrix& x, const TreeTarget& target,
                                      std::span<const std::size_t> rows, const TreeConfig& config,
                                      std::span<const std::size_t> features) {
    if (rows.size() < 2 * config.min_node_size || rows.size() < 2) return std::nullopt;
    SplitSearch search(x, target, rows, config);
    if (search.pure()) return std::nullopt;

    std::vector<std::size_t> all;
    if (features.empty()) {
        all.resize(x.cols());
        std::iota(all.begin(), all.end(), 0);
        features = all;
    }

    // Pass 1: best criterion per feature.
    const double lowest = -std::numeric_limits<double>::infinity();
    std::vector<double> feature_best(features.size(), lowest);
    double best = lowest;
    for (std::size_t i = 0; i < features.size(); ++i) {
        search.sweep(features[i], [&](const Candidate& c) {
            feature_best[i] = std::max(feature_best[i], c.criterion);
            return false;
        });
        best = std::max(best, feature_best[i]);
    }
    if (best == lowest || best < config.min_gain) return std::nullopt;

    // Pass 2: the first candidate in (feature, threshold) order within the
    // tie tolerance of the best.
    const double floor = best - kGainTieTolerance * std::max(1.0, std::abs(best));
    std::vector<std::size_t> order(features.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return features[a] < features[b]; });
    for (auto i : order) {
        if (feature_best[i] < floor) continue;
        std::optional<SplitChoice> choice;
        search.sweep(features[i], [&](const Candidate& c) {
            if (c.criterion < floor) return false;
            choice = SplitChoice{c.rule, c.criterion, c.gain, c.left_count, c.right_count};
            return true;
        });
        if (choice) return choice;
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// TreeModel

TreeModel::TreeModel(std::vector<TreeNode> nodes, std::size_t n_features, std::size_t n_classes)
    : nodes_(std::move(nodes)), n_features_(n_features), n_classes_(n_classes) {
    if (nodes_.empty()) throw ContractError("TreeModel: no nodes");
}

const TreeNode& TreeModel::leaf_for(std::span<const double> row, PredictDiagnostics* diag) const {
    std::size_t i = 0;
    while (!nodes_[i].leaf) {
        const auto& n = nodes_[i];
        bool unseen = false;
        const bool left = n.rule.goes_left(row[n.rule.feature], unseen);
        if (unseen && diag) ++diag->unseen_levels;
        i = static_cast<std::size_t>(left ? n.left : n.right);
    }
    return nodes_[i];
}

std::size_t TreeModel::leaf_count() const {
    return static_cast<std::size_t>(std::count_if(nodes_.begin(), nodes_.end(), [](auto& n) { return n.leaf; }));
}

int TreeModel::depth() const {
    int d = 0;
    for (const auto& n : nodes_) d = std::max(d, n.depth);
    return d;
}

namespace {

void set_leaf_statistic(TreeNode& node, const DesignMatrix&, const TreeTarget& t,
                        std::span<const std::size_t> rows) {
    node.count = rows.size();
    double w = 0.0;
    if (t.classification()) {
        std::vector<double> dist(t.n_classes, 0.0);
        for (auto r : rows) {
            const double wr = t.weights.empty() ? 1.0 : t.weights[r];
            dist[static_cast<std::size_t>(t.y[r])] += wr;
            w += wr;
        }
        std::size_t mode = 0;
        for (std::size_t c = 1; c < dist.size(); ++c)
            if (dist[c] > dist[mode]) mode = c;
        if (w > 0.0)
            for (auto& p : dist) p /= w;
        node.value = static_cast<double>(mode);
        node.distribution = std::move(dist);
    } else {
        double s = 0.0;
        for (auto r : rows) {
            const double wr = t.weights.empty() ? 1.0 : t.weights[r];
            s += wr * t.y[r];
            w += wr;
        }
        node.value = w > 0.0 ? s / w : 0.0;
    }
    node.weight = w;
}

}  // namespace

TreeModel fit_tree(const DesignMatrix& x, const TreeTarget& target, const TreeConfig& config,
                   std::span<const std::size_t> rows, Rng* rng) {
    config.validate();
    if (x.rows() == 0) throw ContractError("fit_tree: empty dataset");
    if (target.y.size() != x.rows()) throw ContractError("fit_tree: target length does not match rows");
    if (!target.weights.empty() && target.weights.size() != x.rows())
        throw ContractError("fit_tree: weight length does not match rows");
    if (config.mtry > 0 && config.mtry < x.cols() && rng == nullptr)
        throw ContractError("fit_tree: mtry requires a random stream");

    std::vector<std::size_t> work;
    if (rows.empty()) {
        work.resize(x.rows());
        std::iota(work.begin(), work.end(), 0);
    } else {
        work.assign(rows.begin(), rows.end());
    }
    if (work.empty()) throw ContractError("fit_tree: no rows");

    const std::size_t k_all = x.cols();
    const bool subsample = config.mtry > 0 && config.mtry < k_all;
    std::vector<std::size_t> pool(k_all), drawn;
    std::iota(pool.begin(), pool.end(), 0);

    struct Frame {
        std::size_t begin, end;
        int depth;
        std::int32_t parent;
        bool right;
    };
    std::vector<TreeNode> nodes;
    std::vector<Frame> stack{{0, work.size(), 0, -1, false}};
    while (!stack.empty()) {
        const Frame f = stack.back();
        stack.pop_back();
        const auto index = static_cast<std::int32_t>(nodes.size());
        if (f.parent >= 0) (f.right ? nodes[f.parent].right : nodes[f.parent].left) = index;

        std::span<const std::size_t> node_rows(work.data() + f.begin, f.end - f.begin);
        TreeNode node;
        node.depth = f.depth;
        set_leaf_statistic(node, x, target, node_rows);

        std::optional<SplitChoice> choice;
        if (f.depth < config.max_depth && node_rows.size() >= 2 * config.min_node_size) {
            std::span<const std::size_t> candidates;
            if (subsample) {
                for (std::size_t i = 0; i < config.mtry; ++i) {
                    const auto j = i + static_cast<std::size_t>(rng->below(k_all - i));
                    std::swap(pool[i], pool[j]);
                }
                drawn.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(config.mtry));
                std::sort(drawn.begin(), drawn.end());
                candidates = drawn;
            }
            choice = best_split(x, target, node_rows, config, candidates);
        }
        if (choice) {
            if (choice->gain < -1e-9)
                throw std::logic_error("fit_tree: negative impurity decrease " + std::to_string(choice->gain));
            node.leaf = false;
            node.rule = choice->rule;
            node.gain = std::max(0.0, choice->gain);
            node.distribution.clear();
            const auto col = x.column(choice->rule.feature);
            auto first = work.begin() + static_cast<std::ptrdiff_t>(f.begin);
            auto last = work.begin() + static_cast<std::ptrdiff_t>(f.end);
            auto mid = std::stable_partition(first, last, [&](std::size_t r) {
                bool unseen = false;
                return choice->rule.goes_left(col[r], unseen);
            });
            const auto m = static_cast<std::size_t>(mid - work.begin());
            nodes.push_back(std::move(node));
            stack.push_back({m, f.end, f.depth + 1, index, true});
            stack.push_back({f.begin, m, f.depth + 1, index, false});
        } else {
            nodes.push_back(std::move(node));
        }
    }
    return TreeModel(std::move(nodes), x.cols(), target.n_classes);
}

double predict_tree(const TreeModel& model, std::span<const double> row, PredictDiagnostics* diag) {
    return model.leaf_for(row, diag).value;
}

std::span<const double> predict_tree_distribution(const TreeModel& model, std::span<const double> row) {
    return model.leaf_for(row).distribution;
}

// ---------------------------------------------------------------------------
// Text form

void dump_tree(std::ostream& out, const TreeModel& model) {
    using detail::format_real;
    out << "tree features=" << model.n_features() << " classes=" << model.n_classes()
        << " nodes=" << model.nodes().size() << '\n';
    std::string line;
    for (const auto& n : model.nodes()) {
        line = "node " + std::to_string(n.depth) + ' ' + std::to_string(n.count) + ' ' + format_real(n.weight) +
               ' ' + format_real(n.value);
        if (n.leaf) {
            line += " leaf";
            for (double p : n.distribution) line += ' ' + format_real(p);
        } else if (n.rule.categorical) {
            line += " cat " + std::to_string(n.rule.feature) + ' ' + std::to_string(n.rule.left_levels) + ' ' +
                    std::to_string(n.rule.seen_levels) + ' ' + format_real(n.gain);
        } else {
            line += " num " + std::to_string(n.rule.feature) + ' ' + format_real(n.rule.threshold) + ' ' +
                    format_real(n.gain);
        }
        out << line << '\n';
    }
}

TreeModel load_tree(std::istream& in) {
    detail::LineReader reader(in);
    const auto head = reader.expect("tree", 4);
    const auto n_features = reader.count(reader.value(head[1], "features"));
    const auto n_classes = reader.count(reader.value(head[2], "classes"));
    const auto n_nodes = reader.count(reader.value(head[3], "nodes"));
    if (n_nodes == 0) reader.fail("tree has no nodes");

    std::vector<TreeNode> nodes;
    nodes.reserve(n_nodes);
    std::vector<std::int32_t> open;  // internal nodes still missing a child
    for (std::size_t i = 0; i < n_nodes; ++i) {
        const auto tok = reader.expect("node", 0);
        if (tok.size() < 6) reader.fail("short node line");
        TreeNode n;
        n.depth = static_cast<int>(reader.count(tok[1]));
        n.count = reader.count(tok[2]);
        n.weight = reader.real(tok[3]);
        n.value = reader.real(tok[4]);
        const auto& kind = tok[5];
        if (kind == "leaf") {
            for (std::size_t j = 6; j < tok.size(); ++j) n.distribution.push_back(reader.real(tok[j]));
            if (n_classes > 0 && n.distribution.size() != n_classes) reader.fail("leaf distribution size mismatch");
        } else if (kind == "num") {
            if (tok.size() != 9) reader.fail("num split needs feature, threshold, gain");
            n.leaf = false;
            n.rule.feature = reader.count(tok[6]);
            n.rule.threshold = reader.real(tok[7]);
            n.gain = reader.real(tok[8]);
        } else if (kind == "cat") {
            if (tok.size() != 10) reader.fail("cat split needs feature, masks, gain");
            n.leaf = false;
            n.rule.categorical = true;
            n.rule.feature = reader.count(tok[6]);
            n.rule.left_levels = reader.count(tok[7]);
            n.rule.seen_levels = reader.count(tok[8]);
            n.gain = reader.real(tok[9]);
        } else {
            reader.fail("unknown node kind '" + kind + "'");
        }
        if (!n.leaf && n.rule.feature >= n_features) reader.fail("split feature out of range");

        const auto index = static_cast<std::int32_t>(nodes.size());
        if (i > 0) {
            if (open.empty()) reader.fail("node has no parent");
            auto& parent = nodes[static_cast<std::size_t>(open.back())];
            if (n.depth != parent.depth + 1) reader.fail("node depth inconsistent with pre-order");
            if (parent.left < 0) {
                parent.left = index;
            } else {
                parent.right = index;
                open.pop_back();
            }
        } else if (n.depth != 0) {
            reader.fail("root must have depth 0");
        }
        const bool internal = !n.leaf;
        nodes.push_back(std::move(n));
        if (internal) open.push_back(index);
    }
    if (!open.empty()) reader.fail("tree ends with incomplete internal nodes");
    return TreeModel(std::move(nodes), n_features, n_classes);
}

}  // namespace cctml
