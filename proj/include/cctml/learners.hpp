#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "cctml/dataset.hpp"
#include "cctml/design.hpp"
#include "cctml/ensemble.hpp"
#include "cctml/linear.hpp"
#include "cctml/trees.hpp"

namespace cctml {

enum class LearnerId { cart, c45, lasso, rf, adaboost, logit };

inline constexpr std::array<LearnerId, 6> kAllLearners = {LearnerId::cart, LearnerId::c45,      LearnerId::lasso,
                                                          LearnerId::rf,   LearnerId::adaboost, LearnerId::logit};

std::string_view to_string(LearnerId id);
/// Display name used in report tables ("CART", "Random forest", ...).
std::string_view display_name(LearnerId id);
/// Throws ContractError for unknown names.
LearnerId parse_learner(std::string_view name);

enum class Task { classification, regression };

std::string_view to_string(Task task);
Task parse_task(std::string_view name);

/// C4.5 and the logit only handle binary targets.
bool supports(LearnerId id, Task task);

/// Tuning knobs for every learner; each learner reads its own subset.
struct LearnerParams {
    int max_depth = 30;              // cart, c45
    std::size_t min_node_size = 5;   // cart, c45, rf (0 = auto)
    double lambda_ratio = 1e-2;      // lasso: lambda = ratio * lambda_max of the training rows
    std::size_t trees = 500;         // rf
    std::size_t mtry = 0;            // rf (0 = default)
    std::size_t stages = 100;        // adaboost
    int boost_depth = 3;             // adaboost base tree depth

    /// Space-separated key=value list of the fields `id` reads.
    std::string describe(LearnerId id) const;
    /// Parses a key=value list produced by describe (unknown keys rejected).
    static LearnerParams parse(std::string_view text);

    bool operator==(const LearnerParams&) const = default;
};

/// Lexicographic complexity of a parameter cell; smaller is simpler. Fewer
/// trees or stages first, then shallower trees, larger node sizes and larger
/// penalties.
std::vector<double> simplicity_key(LearnerId id, const LearnerParams& params);

struct FitOptions {
    std::uint64_t seed = 0;
    unsigned threads = 0;
};

/// A fitted learner plus everything needed to score raw rows: the feature
/// list, the training-row imputer and (C4.5) the quartile binner.
class FittedModel {
public:
    using Body = std::variant<TreeModel, LinearModel, ForestModel, BoostModel>;

    LearnerId learner = LearnerId::cart;
    Task task = Task::classification;
    std::string target;
    LearnerParams params;
    std::uint64_t seed = 0;
    Imputer imputer;
    QuartileBinner binner;
    Body body;

    const std::vector<FeatureInfo>& features() const noexcept { return imputer.features(); }
    std::vector<std::string> feature_names() const;

    /// Regression value, or the class-1 probability, for a row in feature
    /// order. NaN cells are imputed.
    double score_row(std::span<const double> row) const;
    /// Regression value, or the predicted class (0 or 1).
    double predict_row(std::span<const double> row) const;

    std::vector<double> score(const Dataset& data) const;
    std::vector<double> predict(const Dataset& data) const;

    /// False for a LASSO or logit fit that hit its iteration limit.
    bool converged() const;

    void write(std::ostream& out) const;
    static FittedModel read(std::istream& in);

private:
    std::vector<double> prepare(std::span<const double> row) const;
    double raw_score(std::span<const double> prepared) const;
    double raw_predict(std::span<const double> prepared) const;
};

/// Fits `id` on the rows of `data` whose target is present. Classification
/// targets must be 0/1. Throws ContractError for unsupported (learner, task)
/// pairs and TrainingError when the learner cannot produce a model.
FittedModel fit_learner(LearnerId id, Task task, const Dataset& data, std::string_view target,
                        std::span<const std::string> features, const LearnerParams& params,
                        const FitOptions& options = {});

/// Rows of `data` whose `target` cell is present.
std::vector<std::size_t> rows_with_target(const Dataset& data, std::string_view target);

}  // namespace cctml
