#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "cctml/dataset.hpp"
#include "cctml/simulate.hpp"

namespace cctml {

/// Logistic index coefficients of the true attendance mechanism.
struct AttendanceMechanism {
    double intercept = 4.4;
    double behind = -1.6;           // per year behind
    double age_over_11 = -0.1;      // per year above 11
    double secondary = -1.9;        // next grade is secondary or later (hgc >= 6)
    double income = 4e-5;           // per peso of parInc
    double subsidy = 3e-4;          // per peso of household transfer
    double boy = 0.15;
    double dist2sch = -0.08;        // per km
};

struct SynthSpec {
    /// Non-zero: exactly this many households, half treated on average.
    /// Zero: households are added until the child-row targets are met.
    std::size_t n_households = 0;
    std::size_t train_rows = 14039;  // control 1997 + control 1998 + treatment 1997
    std::size_t test_rows = 5461;    // treatment 1998
    double train_missing = 1444.0 / 14039.0;  // share of rows in household-years with missing income
    double test_missing = 835.0 / 5461.0;
    double dist2city_missing = 0.02;  // share of households
    double boy_ratio = 0.51;
    double pregnancy_rate = 0.1294;   // share of training child rows with a pregnant mother
    double failure_rate = 0.10;       // among attendees
    AttendanceMechanism attendance;
    std::uint64_t seed = 20240101;

    void validate() const;
};

/// Everything needed to regenerate the data-generating process.
struct Mechanism {
    AttendanceMechanism attendance;
    double pregnancy_intercept = 0.0;  // calibrated
    double failure_intercept = 0.0;    // calibrated
    double boy_ratio = 0.5;
    double income_noise_sd = 4000.0;
    double realized_pregnancy_rate = 0.0;
    double realized_failure_rate = 0.0;
    std::string dominant_covariate = "behindYrs";

    void write(std::ostream& out) const;
};

/// The true mechanisms as simulation bindings.
SimConfig truth_config(const Mechanism& mechanism, std::uint64_t seed);

/// Child rows: ids, group, every covariate, income and the attend/fail
/// targets (attend is NA outside ages 6-15, fail is NA for non-attendees).
FeatureSchema child_schema();
/// Household-year rows: ids, group, household covariates and income.
FeatureSchema household_schema();

struct SynthCorpus {
    Dataset train;  // child rows before filtering
    Dataset test;
    Dataset households_train;
    Dataset households_test;
    Dataset initial;  // initial_state_schema
    Mechanism truth;
    std::size_t train_missing_rows = 0;
    std::size_t test_missing_rows = 0;
};

SynthCorpus generate(const SynthSpec& spec);

/// Writes train.csv, test.csv, households_train.csv, households_test.csv,
/// initial_states.csv, their .schema sidecars and mechanism.txt.
void write_corpus(const SynthCorpus& corpus, const std::filesystem::path& dir);

}  // namespace cctml
