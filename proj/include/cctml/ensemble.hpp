#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "cctml/design.hpp"
#include "cctml/trees.hpp"

namespace cctml {

// ---------------------------------------------------------------------------
// Random forest

struct ForestConfig {
    std::size_t trees = 500;
    /// Covariates drawn per node; 0 picks floor(sqrt K) for classification
    /// and floor(K/3) for regression (at least 1).
    std::size_t mtry = 0;
    /// Member tree settings; mtry inside is ignored. Depth is unlimited by
    /// default (a large cap); min_node_size 0 picks 1 (classification) or 5.
    TreeConfig tree{CostKind::gini, GainKind::plain, 100000, 0, 1e-12, 0};
    std::uint64_t seed = 0;
    /// Test hook: every tree sees the training rows once, in order.
    bool identity_bootstrap = false;
    /// Worker threads; 0 uses the hardware concurrency.
    unsigned threads = 0;
};

struct ForestModel {
    std::vector<TreeModel> trees;
    /// Sorted out-of-bag row indices per tree. Not part of the text form.
    std::vector<std::vector<std::uint32_t>> oob;
    std::size_t n_rows = 0;
    std::size_t n_features = 0;
    std::size_t n_classes = 0;
    std::size_t mtry = 0;
    std::uint64_t seed = 0;
    TreeConfig tree_config;

    bool classification() const noexcept { return n_classes > 0; }
};

std::size_t default_mtry(std::size_t n_features, bool classification);

/// Trees on independent bootstrap samples (per-tree random streams derived
/// from the seed), grown in parallel into fixed slots.
ForestModel fit_forest(const DesignMatrix& x, const TreeTarget& target, const ForestConfig& config);

/// Plurality vote (ties to the lower class) or the mean of member predictions.
double predict_forest(const ForestModel& model, std::span<const double> row);
/// Share of trees voting for each class.
std::vector<double> forest_vote_shares(const ForestModel& model, std::span<const double> row);

struct OobResult {
    double error = 0.0;  // misclassification rate or mean squared error
    std::size_t evaluated = 0;
    std::size_t skipped = 0;  // rows in no tree's out-of-bag set
};

OobResult oob_error(const ForestModel& model, const DesignMatrix& x, std::span<const double> y);

struct Importance {
    std::vector<double> mean_decrease_accuracy;  // regression: mean increase in OOB MSE
    std::vector<double> mean_decrease_gini;      // impurity decrease, node size weighted
};

/// Permutation importance on each tree's out-of-bag rows plus impurity
/// importance from the recorded split gains, both averaged over trees.
Importance variable_importance(const ForestModel& model, const DesignMatrix& x, std::span<const double> y,
                               std::uint64_t seed);

void dump_forest(std::ostream& out, const ForestModel& model);
ForestModel load_forest(std::istream& in);

// ---------------------------------------------------------------------------
// AdaBoost

struct BoostConfig {
    std::size_t stages = 100;
    TreeConfig tree{CostKind::gini, GainKind::plain, 3, 1, 1e-12, 0};
    double epsilon = 1e-10;
};

struct BoostStage {
    TreeModel tree;
    double beta = 0.0;
    double error = 0.0;
};

struct BoostModel {
    std::vector<BoostStage> stages;
    TreeConfig tree_config;
    std::string stop_reason;  // "stages", "perfect" or "weak"
    /// AdaBoost.R2: stage `beta` holds the vote weight log(1/beta_s).
    bool regression = false;
};

/// Per-stage bookkeeping used by the property tests and reports.
struct BoostTrace {
    std::vector<double> error;
    std::vector<double> beta;
    std::vector<double> updated_error;   // error of g_s under the updated weights
    std::vector<double> training_error;  // ensemble misclassification after stage s
    std::vector<double> bound;           // running product of 2 sqrt(e(1-e))
    std::vector<double> exp_loss;        // sum exp(-y margin) after stage s
};

double adaboost_beta(double error);

/// Discrete AdaBoost with exponential loss. `y` holds -1/+1 labels.
BoostModel fit_adaboost(const DesignMatrix& x, std::span<const double> y, const BoostConfig& config,
                        BoostTrace* trace = nullptr);

struct BoostPrediction {
    double label = 1.0;
    double margin = 0.0;
};

BoostPrediction predict_adaboost(const BoostModel& model, std::span<const double> row);

/// AdaBoost.R2 with linear loss for a continuous response. Base trees use
/// config.tree with squared cost; prediction is the weighted median of the
/// stage predictions.
BoostModel fit_adaboost_r2(const DesignMatrix& x, std::span<const double> y, const BoostConfig& config);
double predict_adaboost_r2(const BoostModel& model, std::span<const double> row);

void dump_boost(std::ostream& out, const BoostModel& model);
BoostModel load_boost(std::istream& in);

}  // namespace cctml
