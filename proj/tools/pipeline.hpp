#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "cctml/eval.hpp"
#include "cctml/learners.hpp"
#include "cctml/simulate.hpp"

namespace cctml::app {

namespace fs = std::filesystem;

/// A missing or unreadable input or output file.
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The four modelled outcomes.
enum class Outcome { attendance, income, pregnancy, failure };

inline constexpr std::array<Outcome, 4> kOutcomes = {Outcome::attendance, Outcome::income, Outcome::pregnancy,
                                                     Outcome::failure};

std::string_view to_string(Outcome o);
Outcome parse_outcome(std::string_view name);
std::string_view target_of(Outcome o);
Task task_of(Outcome o);
/// Income and pregnancy are fitted on household-year rows.
bool household_level(Outcome o);
std::vector<std::string> features_of(Outcome o);
Outcome outcome_for_target(std::string_view target);
/// Learners fitted for an outcome by repro (C4.5 and the logit need a binary target).
std::vector<LearnerId> learners_for(Outcome o, std::span<const LearnerId> requested);

/// `schema` if given, else `<data>.schema`, else children.schema or
/// households.schema next to the data file.
fs::path resolve_schema_path(const fs::path& data, const std::optional<fs::path>& schema);
/// Ingests with the row filter of the table: parInc and childAge for child
/// rows, parInc for household rows.
IngestResult load_rows(const fs::path& data, const FeatureSchema& schema);

/// "max_depth=3,6 min_node=5,20" -> every combination of the values.
std::vector<LearnerParams> parse_grid(std::string_view text);
/// "none", "under", "over:1.0", "smote:0.5:5"
ResamplePlan parse_resample(std::string_view text);

struct TrainOptions {
    LearnerId learner = LearnerId::cart;
    Outcome outcome = Outcome::attendance;
    std::uint64_t seed = 0;
    std::size_t folds = 10;
    std::vector<LearnerParams> grid;  // empty: default grid
    ResamplePlan resample;
    std::string cluster;  // fold-clustering column
    unsigned threads = 0;
};

struct TrainResult {
    FittedModel model;
    CvResult cv;
    double seconds = 0.0;  // cross-validation plus the final fit
};

/// Cross-validates the grid and refits the best cell on every training row
/// (resampled with the same plan).
TrainResult train_model(const Dataset& data, const TrainOptions& options);

void save_model(const FittedModel& model, const fs::path& path);
FittedModel load_model(const fs::path& path);

// ---------------------------------------------------------------------------
// Panels and scoring

struct Panel {
    std::string group;
    int year = 0;

    std::string label() const;  // "control 1997"
};

/// control 1997, control 1998, treatment 1997
const std::vector<Panel>& training_panels();
/// treatment 1998
Panel test_panel();
Panel parse_panel(std::string_view text);  // "control:1997"

Dataset panel_rows(const Dataset& data, const Panel& panel);
/// Rows of the initial-state table that belong to the panel's group.
std::vector<HouseholdState> panel_households(const Dataset& initial, const Panel& panel);

/// Attendance labels against observed attendance per subgroup.
SubgroupReport attendance_fit(const FittedModel& model, const Dataset& rows, std::string label);
/// Mean failure probability against observed failure per subgroup.
SubgroupReport failure_fit(const FittedModel& model, const Dataset& rows, std::string label);
/// Mean pregnancy probability against observed pregnancy per mother's age band.
PregnancyReport pregnancy_fit(const FittedModel& model, const Dataset& households, std::string label);
/// Row-level income residuals.
ErrorSummary income_fit(const FittedModel& model, const Dataset& households);

/// Training and test error of one model.
struct SplitScore {
    std::string model;
    double train_mae = 0.0;
    double train_rmse = 0.0;
    double test_mae = 0.0;
    double test_rmse = 0.0;
    bool selected = false;
    bool reference = false;  // published constant
};

void write_split_csv(std::ostream& out, std::span<const SplitScore> rows);
void write_split_markdown(std::ostream& out, std::string_view title, std::span<const SplitScore> rows, int decimals);

// ---------------------------------------------------------------------------
// Simulation

/// Binding specs map a submodel name (income, pregnancy, attendance,
/// failure) to a model file or `const:<value>`. Relative paths resolve
/// against `base`.
using BindingSpecs = std::map<std::string, std::string>;

BindingSpecs read_binding_specs(const fs::path& path);
Bindings make_bindings(const BindingSpecs& specs, const fs::path& base);

struct SimulateInputs {
    Dataset initial;                   // initial_state_schema rows
    Dataset actual;                    // observed child rows
    std::optional<Dataset> households;  // observed household rows
    std::vector<Panel> panels = training_panels();
    bool trajectories = true;
};

struct PanelResult {
    Panel panel;
    SubgroupReport attendance;
    SubgroupReport failure;
    ValueReport income;
    std::optional<PregnancyReport> pregnancy;
    std::size_t households = 0;
    std::size_t skipped = 0;
    std::vector<std::string> errors;
};

struct SimulateResult {
    std::vector<PanelResult> panels;
    std::size_t skipped = 0;
    double seconds = 0.0;
};

/// Runs each panel's households to its year and compares with the observed
/// rows. Trajectories (when requested) go to `trajectories`.
SimulateResult simulate_panels(const SimulateInputs& inputs, const SimConfig& config, const std::string& label,
                               std::ostream* trajectories);

/// CSV and Markdown for a simulation run into `dir` (file stem `stem`).
void write_simulation_tables(const fs::path& dir, const std::string& stem, const SimulateResult& result,
                             const std::string& label);

// ---------------------------------------------------------------------------
// Full study

struct ReproOptions {
    fs::path out;
    std::uint64_t seed = 0;
    std::size_t households = 0;           // 0: default row targets
    std::optional<fs::path> data;         // existing corpus directory instead of generating
    std::size_t folds = 10;
    std::vector<LearnerId> learners{kAllLearners.begin(), kAllLearners.end()};
    std::optional<ResamplePlan> resample;  // classification outcomes; default none
    bool expected = false;
    unsigned threads = 0;
};

struct Timing {
    std::string step;
    double seconds = 0.0;
};

struct ReproSummary {
    LearnerId income = LearnerId::rf;
    LearnerId pregnancy = LearnerId::logit;
    LearnerId failure = LearnerId::rf;
    std::size_t skipped = 0;
    bool converged = true;
    double rf_train_seconds = 0.0;    // every forest: cross-validation and final fits
    double rf_predict_seconds = 0.0;  // every forest on every row of its tables
    std::vector<Timing> timings;
    std::vector<fs::path> outputs;
};

ReproSummary run_repro(const ReproOptions& options, std::ostream& log);

}  // namespace cctml::app
