#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cctml/dataset.hpp"
#include "cctml/learners.hpp"
#include "cctml/resample.hpp"

namespace cctml {

// ---------------------------------------------------------------------------
// Metrics

struct ConfusionMatrix {
    std::size_t tp = 0, fp = 0, fn = 0, tn = 0;

    std::size_t total() const noexcept { return tp + fp + fn + tn; }
    /// Percentages of rows predicted / observed positive.
    double predicted_rate() const;
    double actual_rate() const;
    /// The same matrix with the class labels swapped.
    ConfusionMatrix relabeled() const noexcept { return {tn, fn, fp, tp}; }

    bool operator==(const ConfusionMatrix&) const = default;
};

/// Tallies 0/1 outcomes; rows where either value is NaN are skipped.
ConfusionMatrix confusion(std::span<const double> actual, std::span<const double> predicted);

/// 100 (tp + tn) / total. Throws ContractError on an empty matrix.
double accuracy(const ConfusionMatrix& cm);

struct ErrorSummary {
    double mae = 0.0;
    double rmse = 0.0;
};

/// Mean absolute and root mean squared value of `errors`. Throws
/// ContractError when empty.
ErrorSummary mae_rmse(std::span<const double> errors);

/// Rounds half away from zero at `decimals` places after absorbing binary
/// representation error (so 2.525 renders as 2.53).
double round_half_away(double value, int decimals);
/// Fixed-point text of round_half_away; NaN renders as an empty string.
std::string format_fixed(double value, int decimals);

// ---------------------------------------------------------------------------
// Folds and cross-validation

/// Seeded uniform fold labels 0..k-1 with sizes differing by at most one.
std::vector<std::size_t> make_folds(std::size_t n, std::size_t k, std::uint64_t seed);
/// Fold labels that keep every group (e.g. household) inside one fold.
std::vector<std::size_t> make_group_folds(std::span<const double> groups, std::size_t k, std::uint64_t seed);

enum class CvMetric { error_rate, mae, rmse };

std::string_view to_string(CvMetric metric);
/// Misclassification rate for classification, RMSE for regression.
CvMetric default_metric(Task task);

struct CvPlan {
    std::size_t folds = 10;
    std::vector<LearnerParams> grid;  // empty: default_grid
    std::optional<CvMetric> metric;   // empty: default_metric
    std::uint64_t seed = 0;
    ResamplePlan resample;            // applied to training folds only
    std::string cluster_column;       // non-empty: folds keep these groups together
    unsigned threads = 0;

    void validate() const;
};

struct CvCell {
    LearnerParams params;
    std::vector<double> fold_scores;
    double score = 0.0;  // mean over folds
    bool failed = false;
    std::string message;
};

struct CvResult {
    LearnerId learner = LearnerId::cart;
    CvMetric metric = CvMetric::error_rate;
    std::vector<CvCell> cells;
    std::size_t best = 0;
    std::vector<std::size_t> fold_of;  // fold label per row with a target

    const LearnerParams& best_params() const { return cells.at(best).params; }
};

/// Per-learner default grid. Kept small so that a full run stays within
/// the runtime budget on a desktop.
std::vector<LearnerParams> default_grid(LearnerId id, Task task);

/// Scores every grid cell by k-fold cross-validation on rows with a target.
/// The best cell has the lowest mean score; scores within 1e-12 (relative)
/// tie and go to the simpler cell (simplicity_key), then the earlier one.
/// A cell whose learner fails on any fold is marked failed and excluded;
/// TrainingError is thrown only if every cell fails.
CvResult cross_validate(const Dataset& data, std::string_view target, std::span<const std::string> features,
                        LearnerId learner, Task task, const CvPlan& plan);

void write_cv_csv(std::ostream& out, const CvResult& result);

// ---------------------------------------------------------------------------
// Subgroup reports

struct SubgroupRow {
    SubgroupKey key;
    std::size_t n = 0;            // rows behind the actual rate
    std::size_t n_predicted = 0;  // rows behind the predicted rate
    double actual = 0.0;          // percentages; NaN when unavailable
    double predicted = 0.0;
    double error = 0.0;           // predicted - actual
    double accuracy = 0.0;
};

struct SubgroupReport {
    std::string label;
    std::array<SubgroupRow, SubgroupKey::count> rows{};
    /// Over the subgroups that have an error.
    double mae = 0.0;
    double rmse = 0.0;
    /// Unweighted mean of the available subgroup accuracies (NaN if none).
    double mean_accuracy = 0.0;

    std::vector<double> errors() const;
};

/// Rates, errors and accuracies for predictions aligned 1:1 with rows
/// (0/1 values). Empty subgroups get n = 0 and NaN rates.
SubgroupReport subgroup_report(std::span<const double> actual, std::span<const double> predicted,
                               const SubgroupMap& groups, std::string label = {});

/// Rates from two different populations (e.g. observed children vs
/// simulated children). Accuracy is unavailable. Rates are means, so
/// probabilities give expected rates.
SubgroupReport compare_subgroup_rates(std::span<const double> actual, const SubgroupMap& actual_groups,
                                      std::span<const double> predicted, const SubgroupMap& predicted_groups,
                                      std::string label = {});

/// Report built from published rates (n unknown, accuracy unavailable).
SubgroupReport fixed_report(std::string label, const std::array<double, 8>& actual,
                            const std::array<double, 8>& predicted, const std::array<double, 8>& error);

/// Machine form: one line per (report, subgroup).
void write_reports_csv(std::ostream& out, std::span<const SubgroupReport> reports);
/// Human form: one Actual row when every report shares its actual rates
/// (else an actual row per report), then predicted/err rows per report,
/// subgroups as columns (girls before boys within each band).
void write_reports_markdown(std::ostream& out, std::string_view title, std::span<const SubgroupReport> reports);
/// Accuracy table: one row per report plus the mean.
void write_accuracy_markdown(std::ostream& out, std::string_view title, std::span<const SubgroupReport> reports);

/// Per-subgroup summary of a continuous quantity (e.g. household income).
struct ValueRow {
    SubgroupKey key;
    std::size_t n = 0;
    double actual = 0.0;  // means; NaN when empty
    double predicted = 0.0;
    double mae = 0.0;
    double rmse = 0.0;
};

struct ValueReport {
    std::string label;
    std::array<ValueRow, SubgroupKey::count> rows{};
};

/// `actual` and `predicted` aligned 1:1; rows with NaN in either are skipped.
ValueReport value_report(std::span<const double> actual, std::span<const double> predicted, const SubgroupMap& groups,
                         std::string label = {});

void write_value_csv(std::ostream& out, std::span<const ValueReport> reports);
void write_value_markdown(std::ostream& out, std::string_view title, std::span<const ValueReport> reports);

// ---------------------------------------------------------------------------
// Model comparison

struct ModelScore {
    std::string name;
    double mae = 0.0;
    double rmse = 0.0;
    double accuracy = 0.0;  // NaN when not applicable
};

struct Candidate {
    LearnerId learner = LearnerId::cart;
    double mae = 0.0;
    double rmse = 0.0;
};

/// Lowest MAE; ties by lowest RMSE, then learner order. Throws ContractError
/// when empty.
LearnerId model_select(std::span<const Candidate> candidates);

void write_comparison_csv(std::ostream& out, std::span<const ModelScore> rows);
void write_comparison_markdown(std::ostream& out, std::string_view title, std::span<const ModelScore> rows,
                               int decimals = 2);

}  // namespace cctml
