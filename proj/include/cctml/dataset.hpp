#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace cctml {

enum class ColumnKind { continuous, binary, categorical };
enum class ColumnRole { feature, target, id, group_key };

std::string_view to_string(ColumnKind kind);
std::string_view to_string(ColumnRole role);

struct ColumnSpec {
    std::string name;
    ColumnKind kind = ColumnKind::continuous;
    ColumnRole role = ColumnRole::feature;
    std::vector<std::string> levels;  // categorical only, closed set

    bool operator==(const ColumnSpec&) const = default;
};

/// Ordered, name-unique column declarations.
///
/// The sidecar text form has one column per line:
///
///     name kind role [level,level,...]
///
/// with kind in {continuous, binary, categorical} and role in
/// {feature, target, id, group-key}. Blank lines and `#` comments are ignored.
class FeatureSchema {
public:
    FeatureSchema() = default;
    explicit FeatureSchema(std::vector<ColumnSpec> columns);

    void add(ColumnSpec column);

    std::size_t size() const noexcept { return columns_.size(); }
    const ColumnSpec& operator[](std::size_t i) const { return columns_[i]; }
    const std::vector<ColumnSpec>& columns() const noexcept { return columns_; }

    std::optional<std::size_t> find(std::string_view name) const;
    /// Throws SchemaError naming the column when absent.
    std::size_t index_of(std::string_view name) const;
    bool contains(std::string_view name) const { return find(name).has_value(); }

    std::vector<std::string> names() const;
    std::vector<std::string> names_with_role(ColumnRole role) const;

    /// Level index of `value` in a categorical column, or nullopt.
    std::optional<std::size_t> level_index(std::size_t column, std::string_view value) const;

    bool operator==(const FeatureSchema&) const = default;

private:
    static void check(const ColumnSpec& column);

    std::vector<ColumnSpec> columns_;
    std::map<std::string, std::size_t, std::less<>> index_;
};

FeatureSchema parse_schema(std::istream& in);
FeatureSchema read_schema(const std::filesystem::path& path);
void write_schema(std::ostream& out, const FeatureSchema& schema);

/// Column-major table of doubles conforming to a FeatureSchema.
///
/// Binary cells hold 0 or 1, categorical cells hold the level index, and
/// missing cells hold NaN.
class Dataset {
public:
    Dataset() = default;
    explicit Dataset(FeatureSchema schema, std::size_t rows = 0);

    const FeatureSchema& schema() const noexcept { return schema_; }
    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return schema_.size(); }

    double at(std::size_t row, std::size_t col) const { return data_[col][row]; }
    double at(std::size_t row, std::string_view col) const { return data_[schema_.index_of(col)][row]; }
    bool missing(std::size_t row, std::size_t col) const { return std::isnan(data_[col][row]); }
    void set(std::size_t row, std::size_t col, double value) { data_[col][row] = value; }
    void set_missing(std::size_t row, std::size_t col) { data_[col][row] = missing_value(); }

    std::span<const double> column(std::size_t col) const { return data_[col]; }
    std::span<const double> column(std::string_view name) const { return data_[schema_.index_of(name)]; }

    /// Appends one row given in schema order.
    void append_row(std::span<const double> values);
    std::vector<double> row(std::size_t r) const;

    /// Rows in the given order; indices may repeat.
    Dataset select_rows(std::span<const std::size_t> indices) const;
    /// Appends a column; throws SchemaError if the name exists.
    void add_column(ColumnSpec spec, std::vector<double> values);

    bool operator==(const Dataset& other) const;

    static constexpr double missing_value() noexcept { return std::numeric_limits<double>::quiet_NaN(); }

private:
    FeatureSchema schema_;
    std::size_t rows_ = 0;
    std::vector<std::vector<double>> data_;
};

struct IngestOptions {
    /// Rows missing any of these columns are dropped.
    std::vector<std::string> required = {"parInc", "childAge"};
    std::string missing_token = "NA";
};

struct IngestResult {
    Dataset data;
    std::size_t kept = 0;
    std::size_t dropped = 0;
};

/// Reads the canonical CSV dialect: comma separated, header row mandatory,
/// `NA` for missing. Header columns may appear in any order but must match
/// the schema's names exactly.
IngestResult ingest_csv(std::istream& in, const FeatureSchema& schema, const IngestOptions& options = {});
IngestResult ingest_csv(const std::filesystem::path& path, const FeatureSchema& schema,
                        const IngestOptions& options = {});

/// Writes the canonical CSV form. Numbers use the shortest representation
/// that round-trips, so ingesting the output reproduces the table exactly.
void write_csv(std::ostream& out, const Dataset& data);
void write_csv(const std::filesystem::path& path, const Dataset& data);

// ---------------------------------------------------------------------------
// Subgroups

enum class Gender : std::uint8_t { girl = 0, boy = 1 };

/// Reporting bands. The bands overlap: a behind 13-year-old with grade 6
/// completed belongs to the last three.
enum class AgeBand : std::uint8_t { age6_11 = 0, age12_15 = 1, age12_15_behind = 2, age13_15_behind_hgc6 = 3 };

struct SubgroupKey {
    AgeBand band = AgeBand::age6_11;
    Gender gender = Gender::girl;

    static constexpr std::size_t count = 8;

    /// Position in the reporting order: bands left to right, girls before boys.
    constexpr std::size_t index() const noexcept {
        return static_cast<std::size_t>(band) * 2 + static_cast<std::size_t>(gender);
    }
    static constexpr SubgroupKey from_index(std::size_t i) noexcept {
        return {static_cast<AgeBand>(i / 2), static_cast<Gender>(i % 2)};
    }
    std::string label() const;
    std::string band_label() const;

    auto operator<=>(const SubgroupKey&) const = default;
};

std::array<SubgroupKey, SubgroupKey::count> all_subgroups();

/// Subgroups a child belongs to; "behind" means behindYrs >= 1.
std::vector<SubgroupKey> subgroups_for(double age, Gender gender, double behind_years, double hgc);

using SubgroupMap = std::array<std::vector<std::size_t>, SubgroupKey::count>;

/// Row indices per subgroup, read from childAge, gender, behindYrs and hgc.
/// gender is 1 for boys. Rows outside every band are left unassigned.
SubgroupMap assign_subgroups(const Dataset& data);

// ---------------------------------------------------------------------------
// Subsidy schedule

enum class SchoolLevel { primary, secondary };

struct SubsidyLookup {
    double pesos = 0.0;
    bool in_domain = false;
};

/// Yearly payment per (level, grade, gender).
class SubsidySchedule {
public:
    struct Payment {
        double boy = 0.0;
        double girl = 0.0;
        bool operator==(const Payment&) const = default;
    };

    SubsidySchedule() = default;
    explicit SubsidySchedule(std::map<std::pair<SchoolLevel, int>, Payment> table);

    /// The Progresa 1997-1999 schedule (primary 3-6, secondary 1-3).
    static SubsidySchedule progresa();

    /// Three columns per line: level+grade (e.g. `primary3`, `secondary1`),
    /// boy pesos, girl pesos. Invariants are checked on load.
    static SubsidySchedule parse(std::istream& in);
    static SubsidySchedule load(const std::filesystem::path& path);
    void write(std::ostream& out) const;

    /// Throws SchemaError if payments are not monotone in grade within a
    /// gender, differ by gender in primary, or favour boys in secondary.
    void validate() const;

    SubsidyLookup lookup(SchoolLevel level, int grade, Gender gender) const;
    /// Grade counted from the start of primary: 1-6 primary, 7-9 secondary.
    SubsidyLookup lookup_overall(int grade, Gender gender) const;

    const std::map<std::pair<SchoolLevel, int>, Payment>& table() const noexcept { return table_; }

private:
    std::map<std::pair<SchoolLevel, int>, Payment> table_;
};

SubsidyLookup subsidy_for(const SubsidySchedule& schedule, SchoolLevel level, int grade, Gender gender);

}  // namespace cctml
