#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "cctml/design.hpp"
#include "cctml/rng.hpp"

namespace cctml {

enum class CostKind { gini, entropy, squared };
enum class GainKind { plain, gain_ratio };

/// Split candidates whose criterion is within this (relative) distance of the
/// best are treated as tied and resolved by (feature index, threshold).
inline constexpr double kGainTieTolerance = 1e-12;

struct TreeConfig {
    CostKind cost = CostKind::gini;
    GainKind gain = GainKind::plain;
    int max_depth = 30;
    std::size_t min_node_size = 5;
    double min_gain = 1e-12;
    /// Covariates drawn per node; 0 searches all of them.
    std::size_t mtry = 0;

    void validate() const;
};

/// Target column for tree growth. For classification `y` holds class indices
/// 0..n_classes-1; for regression (n_classes == 0) it holds the response.
/// `weights` may be empty for unit weights.
struct TreeTarget {
    std::span<const double> y;
    std::size_t n_classes = 0;
    std::span<const double> weights;

    bool classification() const noexcept { return n_classes > 0; }
};

/// Impurity of the values at a node. Gini and entropy read `values` as class
/// labels; squared loss returns the sum of squared deviations from the mean.
/// Entropy uses natural logs with 0 log 0 = 0. Throws ContractError on an
/// empty node.
double node_cost(std::span<const double> values, CostKind kind);

/// Gini or entropy of a (possibly weighted) class histogram.
double class_impurity(std::span<const double> class_weights, CostKind kind);

struct SplitRule {
    std::size_t feature = 0;
    bool categorical = false;
    double threshold = 0.0;          // x <= threshold goes left
    std::uint64_t left_levels = 0;   // categorical: level bitmask going left
    std::uint64_t seen_levels = 0;   // categorical: levels present in training

    /// Routing for value `x`. Categorical levels never seen at this node go
    /// left and set `unseen`.
    bool goes_left(double x, bool& unseen) const noexcept;

    bool operator==(const SplitRule&) const = default;
};

struct SplitChoice {
    SplitRule rule;
    double criterion = 0.0;  // the maximised quantity (gain or gain ratio)
    double gain = 0.0;       // impurity decrease
    std::size_t left_count = 0;
    std::size_t right_count = 0;
};

/// Best admissible split of `rows` over `features` (all features when empty).
///
/// Continuous and binary covariates are split at realised values v
/// (x <= v goes left). Categorical covariates use level subsets, searched
/// exhaustively up to 12 levels present at the node and by ordering levels
/// on their class-1 share (or mean) above that. Each child must keep
/// min_node_size rows. Returns nullopt for pure nodes or when the best
/// criterion is below min_gain.
std::optional<SplitChoice> best_split(const DesignMatrix& x, const TreeTarget& target,
                                      std::span<const std::size_t> rows, const TreeConfig& config,
                                      std::span<const std::size_t> features = {});

struct TreeNode {
    int depth = 0;
    std::size_t count = 0;
    double weight = 0.0;
    bool leaf = true;
    SplitRule rule;
    double gain = 0.0;  // impurity decrease at internal nodes
    std::int32_t left = -1;
    std::int32_t right = -1;
    double value = 0.0;                // class index (mode) or mean
    std::vector<double> distribution;  // classification leaves

    bool operator==(const TreeNode&) const = default;
};

struct PredictDiagnostics {
    std::size_t unseen_levels = 0;
};

/// Binary tree stored in pre-order; node 0 is the root.
class TreeModel {
public:
    TreeModel() = default;
    TreeModel(std::vector<TreeNode> nodes, std::size_t n_features, std::size_t n_classes);

    const std::vector<TreeNode>& nodes() const noexcept { return nodes_; }
    std::size_t n_features() const noexcept { return n_features_; }
    std::size_t n_classes() const noexcept { return n_classes_; }
    bool classification() const noexcept { return n_classes_ > 0; }

    const TreeNode& leaf_for(std::span<const double> row, PredictDiagnostics* diag = nullptr) const;
    std::size_t leaf_count() const;
    int depth() const;

    bool operator==(const TreeModel&) const = default;

private:
    std::vector<TreeNode> nodes_;
    std::size_t n_features_ = 0;
    std::size_t n_classes_ = 0;
};

/// Grows a tree greedily on `rows` (all rows when empty). When config.mtry is
/// set, `rng` supplies the per-node covariate draws and must be non-null.
TreeModel fit_tree(const DesignMatrix& x, const TreeTarget& target, const TreeConfig& config,
                   std::span<const std::size_t> rows = {}, Rng* rng = nullptr);

/// Leaf mode (classification) or mean (regression).
double predict_tree(const TreeModel& model, std::span<const double> row, PredictDiagnostics* diag = nullptr);
/// Leaf class distribution.
std::span<const double> predict_tree_distribution(const TreeModel& model, std::span<const double> row);

/// Pre-order text form, one node per line.
void dump_tree(std::ostream& out, const TreeModel& model);
TreeModel load_tree(std::istream& in);

}  // namespace cctml
