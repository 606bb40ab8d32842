#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "cctml/covariates.hpp"
#include "cctml/dataset.hpp"
#include "cctml/eval.hpp"
#include "cctml/learners.hpp"
#include "cctml/rng.hpp"

namespace cctml {

/// A model the simulation can call on a covariate vector.
struct Submodel {
    std::string name;
    std::vector<Covariate> inputs;
    /// Class-1 probability, or the regression value.
    std::function<double(std::span<const double>)> score;
    /// Modal class, or the regression value.
    std::function<double(std::span<const double>)> label;
    bool regression = false;
    /// Regression only: sd of Gaussian noise added in stochastic mode.
    double noise_sd = 0.0;

    bool bound() const noexcept { return static_cast<bool>(score) && static_cast<bool>(label); }
};

/// Wraps a fitted model; throws BindingError if one of its features is not
/// a known covariate.
Submodel bind_model(std::string name, std::shared_ptr<const FittedModel> model);
/// Always returns `value` (a probability or a regression value).
Submodel constant_submodel(std::string name, double value, bool regression = false);

struct Bindings {
    Submodel income;
    Submodel pregnancy;
    Submodel attendance;
    Submodel failure;
};

enum class Realization {
    stochastic,  // outcome = uniform draw < probability
    expected,    // modal outcome, no draws
};

struct SimConfig {
    Bindings bindings;
    double boy_ratio = 0.5;
    std::uint64_t seed = 0;
    Realization mode = Realization::stochastic;
    SubsidySchedule schedule = SubsidySchedule::progresa();
    int subsidy_start_year = 1998;
    int max_child_age = 17;  // older children leave the household

    /// Throws BindingError naming an unbound submodel, or a household-level
    /// submodel that reads child covariates; ContractError for a bad ratio.
    void validate() const;
};

struct ChildOutcome {
    ChildState child;  // before the update
    bool eligible = false;  // aged 6-15 this period
    bool attend = false;
    bool fail = false;
};

/// One simulated period: the state after income and pregnancy were drawn
/// and before children are updated.
struct PeriodRecord {
    HouseholdState state;
    double par_inc = 0.0;  // income plus any transfer
    bool subsidy_active = false;
    std::vector<ChildOutcome> children;  // parallel to state.children
};

using PeriodObserver = std::function<void(const PeriodRecord&)>;

/// Evolves `initial` (t = 0 in its wedding year) through `horizon_year`
/// inclusive and returns the state at the start of the following year.
/// Draws come from stream(config.seed, household id). Throws BindingError
/// when a covariate cannot be assembled.
HouseholdState simulate_household(HouseholdState initial, const SimConfig& config, int horizon_year,
                                  const PeriodObserver& observer = {});

/// Attendance and failure for every child of a household in the current
/// period, as the simulation decides them. `rng` may be null in expected
/// mode.
std::vector<ChildOutcome> decide_children(const HouseholdState& state, const CovariateVector& household,
                                          const SimConfig& config, Rng* rng);

struct CohortRun {
    std::vector<PeriodRecord> at_report;  // one per household alive in report_year
    std::size_t skipped = 0;
    std::vector<std::string> errors;  // "household <id>: <message>"
};

/// Simulates every household through `report_year` and keeps its record
/// for that year. Households fail independently and are counted as skipped.
CohortRun simulate_cohort(std::span<const HouseholdState> initial, const SimConfig& config, int report_year,
                          const PeriodObserver& observer = {});

// ---------------------------------------------------------------------------
// Initial states and reconstruction

/// Columns: hhid, group (control/treatment; treatment households are
/// treated), weddingYear, fAgeWed, mAgeWed, hgcParGe9, dist2sch, dist2city.
FeatureSchema initial_state_schema();
std::vector<HouseholdState> initial_states(const Dataset& data);
Dataset initial_state_table(std::span<const HouseholdState> states);

/// State at the start of a household-year rebuilt from its child rows.
/// Income is the observed parInc and the household is marked untreated, so
/// recomputed covariates equal the row values.
HouseholdState reconstruct_state(const Dataset& rows, std::span<const std::size_t> indices);

/// One-step attendance prediction by the simulation from the observed
/// states: per row, the modal outcome for children aged 6-15 and NaN for the
/// rest. Requires columns hhid, year and childId.
std::vector<double> one_step_attendance(const Dataset& rows, const SimConfig& config);

/// Share of boys among the rows' children.
double boy_ratio(const Dataset& rows);

// ---------------------------------------------------------------------------
// Reports

/// Observed attendance (`attend` column) against simulated attendance of
/// eligible children.
SubgroupReport attendance_report(const Dataset& actual, std::span<const PeriodRecord> simulated, std::string label);
/// Failure among attendees, observed against simulated.
SubgroupReport failure_report(const Dataset& actual, std::span<const PeriodRecord> simulated, std::string label);
/// Household income (`income` column) per child row against the simulated
/// income of the same household.
ValueReport income_report(const Dataset& actual, std::span<const PeriodRecord> simulated, std::string label);

struct AgeBandRate {
    std::string band;  // "20-24", ...
    int lo = 0, hi = 0;
    std::size_t n_actual = 0, n_predicted = 0;
    double actual = 0.0;  // percent; NaN when empty
    double predicted = 0.0;
    double error = 0.0;
};

struct PregnancyReport {
    std::string label;
    std::vector<AgeBandRate> bands;
};

/// Pregnancy rate by mother's age band: household rows (`mAge`, `preg`)
/// against simulated households.
PregnancyReport pregnancy_rate_report(const Dataset& actual, std::span<const PeriodRecord> simulated,
                                      std::string label);

void write_pregnancy_csv(std::ostream& out, std::span<const PregnancyReport> reports);
void write_pregnancy_markdown(std::ostream& out, std::string_view title, std::span<const PregnancyReport> reports);

/// household-id, year, income, pregnant, child-id, age, attend, fail, hgc,
/// behindYrs; one line per child-year (child fields blank when childless).
class TrajectoryWriter {
public:
    explicit TrajectoryWriter(std::ostream& out);
    void operator()(const PeriodRecord& record);

private:
    std::ostream* out_;
};

}  // namespace cctml
