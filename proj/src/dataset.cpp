#include "cctml/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "cctml/error.hpp"
#include "text.hpp"

namespace cctml {

std::string_view to_string(ColumnKind kind) {
    switch (kind) {
        case ColumnKind::continuous: return "continuous";
        case ColumnKind::binary: return "binary";
        case ColumnKind::categorical: return "categorical";
    }
    return "?";
}

std::string_view to_string(ColumnRole role) {
    switch (role) {
        case ColumnRole::feature: return "feature";
        case ColumnRole::target: return "target";
        case ColumnRole::id: return "id";
        case ColumnRole::group_key: return "group-key";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// FeatureSchema

FeatureSchema::FeatureSchema(std::vector<ColumnSpec> columns) {
    for (auto& c : columns) add(std::move(c));
}

void FeatureSchema::check(const ColumnSpec& column) {
    if (column.name.empty()) throw SchemaError("empty column name");
    if (column.kind == ColumnKind::categorical) {
        if (column.levels.empty()) throw SchemaError("categorical column '" + column.name + "' has no levels");
        auto sorted = column.levels;
        std::sort(sorted.begin(), sorted.end());
        if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
            throw SchemaError("categorical column '" + column.name + "' repeats a level");
    } else if (!column.levels.empty()) {
        throw SchemaError("column '" + column.name + "' declares levels but is not categorical");
    }
}

void FeatureSchema::add(ColumnSpec column) {
    check(column);
    if (index_.contains(column.name)) throw SchemaError("duplicate column '" + column.name + "'");
    index_.emplace(column.name, columns_.size());
    columns_.push_back(std::move(column));
}

std::optional<std::size_t> FeatureSchema::find(std::string_view name) const {
    auto it = index_.find(name);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

std::size_t FeatureSchema::index_of(std::string_view name) const {
    auto i = find(name);
    if (!i) throw SchemaError("unknown column '" + std::string(name) + "'");
    return *i;
}

std::vector<std::string> FeatureSchema::names() const {
    std::vector<std::string> out;
    out.reserve(columns_.size());
    for (const auto& c : columns_) out.push_back(c.name);
    return out;
}

std::vector<std::string> FeatureSchema::names_with_role(ColumnRole role) const {
    std::vector<std::string> out;
    for (const auto& c : columns_)
        if (c.role == role) out.push_back(c.name);
    return out;
}

std::optional<std::size_t> FeatureSchema::level_index(std::size_t column, std::string_view value) const {
    const auto& levels = columns_[column].levels;
    auto it = std::find(levels.begin(), levels.end(), value);
    if (it == levels.end()) return std::nullopt;
    return static_cast<std::size_t>(it - levels.begin());
}

FeatureSchema parse_schema(std::istream& in) {
    FeatureSchema schema;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto body = detail::trim(line.substr(0, line.find('#')));
        if (body.empty()) continue;
        auto tok = detail::split_ws(body);
        if (tok.size() < 3 || tok.size() > 4) throw ParseError("expected 'name kind role [levels]'", line_no);
        ColumnSpec spec;
        spec.name = tok[0];
        if (tok[1] == "continuous") spec.kind = ColumnKind::continuous;
        else if (tok[1] == "binary") spec.kind = ColumnKind::binary;
        else if (tok[1] == "categorical") spec.kind = ColumnKind::categorical;
        else throw ParseError("unknown column kind '" + tok[1] + "'", line_no);
        if (tok[2] == "feature") spec.role = ColumnRole::feature;
        else if (tok[2] == "target") spec.role = ColumnRole::target;
        else if (tok[2] == "id") spec.role = ColumnRole::id;
        else if (tok[2] == "group-key") spec.role = ColumnRole::group_key;
        else throw ParseError("unknown column role '" + tok[2] + "'", line_no);
        if (tok.size() == 4) spec.levels = detail::split(tok[3], ',');
        try {
            schema.add(std::move(spec));
        } catch (const SchemaError& e) {
            throw ParseError(e.what(), line_no);
        }
    }
    return schema;
}

FeatureSchema read_schema(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw SchemaError("cannot open schema file " + path.string());
    return parse_schema(in);
}

void write_schema(std::ostream& out, const FeatureSchema& schema) {
    for (const auto& c : schema.columns()) {
        out << c.name << ' ' << to_string(c.kind) << ' ' << to_string(c.role);
        if (!c.levels.empty()) {
            out << ' ';
            for (std::size_t i = 0; i < c.levels.size(); ++i) out << (i ? "," : "") << c.levels[i];
        }
        out << '\n';
    }
}

// ---------------------------------------------------------------------------
// Dataset

Dataset::Dataset(FeatureSchema schema, std::size_t rows)
    : schema_(std::move(schema)), rows_(rows), data_(schema_.size(), std::vector<double>(rows, 0.0)) {}

void Dataset::append_row(std::span<const double> values) {
    if (values.size() != cols()) throw ContractError("append_row: row width does not match schema");
    for (std::size_t c = 0; c < values.size(); ++c) data_[c].push_back(values[c]);
    ++rows_;
}

std::vector<double> Dataset::row(std::size_t r) const {
    std::vector<double> out(cols());
    for (std::size_t c = 0; c < cols(); ++c) out[c] = data_[c][r];
    return out;
}

Dataset Dataset::select_rows(std::span<const std::size_t> indices) const {
    Dataset out;
    out.schema_ = schema_;
    out.rows_ = indices.size();
    out.data_.resize(cols());
    for (std::size_t c = 0; c < cols(); ++c) {
        auto& dst = out.data_[c];
        const auto& src = data_[c];
        dst.resize(indices.size());
        for (std::size_t i = 0; i < indices.size(); ++i) dst[i] = src[indices[i]];
    }
    return out;
}

void Dataset::add_column(ColumnSpec spec, std::vector<double> values) {
    if (values.size() != rows_) throw ContractError("add_column: length does not match row count");
    schema_.add(std::move(spec));
    data_.push_back(std::move(values));
}

bool Dataset::operator==(const Dataset& other) const {
    if (!(schema_ == other.schema_) || rows_ != other.rows_) return false;
    for (std::size_t c = 0; c < cols(); ++c)
        for (std::size_t r = 0; r < rows_; ++r) {
            const double a = data_[c][r];
            const double b = other.data_[c][r];
            if (std::isnan(a) != std::isnan(b)) return false;
            if (!std::isnan(a) && a != b) return false;
        }
    return true;
}

// ---------------------------------------------------------------------------
// CSV

namespace {

double parse_cell(const ColumnSpec& spec, const FeatureSchema& schema, std::size_t col, std::string_view cell,
                  std::size_t line_no) {
    switch (spec.kind) {
        case ColumnKind::continuous: {
            double v = 0.0;
            if (!detail::parse_double(cell, v))
                throw ParseError("column '" + spec.name + "': cannot parse '" + std::string(cell) + "' as a number",
                                 line_no);
            return v;
        }
        case ColumnKind::binary:
            if (cell == "0") return 0.0;
            if (cell == "1") return 1.0;
            throw SchemaError("line " + std::to_string(line_no) + ": binary column '" + spec.name +
                              "' has value '" + std::string(cell) + "'");
        case ColumnKind::categorical: {
            auto level = schema.level_index(col, cell);
            if (!level)
                throw SchemaError("line " + std::to_string(line_no) + ": column '" + spec.name +
                                  "' has unknown level '" + std::string(cell) + "'");
            return static_cast<double>(*level);
        }
    }
    return 0.0;
}

}  // namespace

IngestResult ingest_csv(std::istream& in, const FeatureSchema& schema, const IngestOptions& options) {
    std::string line;
    std::size_t line_no = 0;
    if (!std::getline(in, line)) throw ParseError("missing header row", 1);
    ++line_no;
    detail::strip_cr(line);
    const auto header = detail::split(line, ',');

    // header position -> schema column
    std::vector<std::size_t> position(header.size());
    std::vector<bool> seen(schema.size(), false);
    for (std::size_t h = 0; h < header.size(); ++h) {
        auto c = schema.find(header[h]);
        if (!c) throw SchemaError("header column '" + header[h] + "' is not in the schema");
        if (seen[*c]) throw SchemaError("header repeats column '" + header[h] + "'");
        seen[*c] = true;
        position[h] = *c;
    }
    for (std::size_t c = 0; c < schema.size(); ++c)
        if (!seen[c]) throw SchemaError("header is missing column '" + schema[c].name + "'");

    std::vector<std::size_t> required;
    for (const auto& name : options.required)
        if (auto c = schema.find(name)) required.push_back(*c);

    IngestResult result{Dataset(schema), 0, 0};
    std::vector<double> values(schema.size());
    std::vector<std::string_view> cells;
    while (std::getline(in, line)) {
        ++line_no;
        detail::strip_cr(line);
        if (line.empty()) continue;
        detail::split_view(line, ',', cells);
        if (cells.size() != header.size())
            throw ParseError("expected " + std::to_string(header.size()) + " fields, found " +
                                 std::to_string(cells.size()),
                             line_no);
        for (std::size_t h = 0; h < cells.size(); ++h) {
            const auto c = position[h];
            values[c] = cells[h] == options.missing_token ? Dataset::missing_value()
                                                         : parse_cell(schema[c], schema, c, cells[h], line_no);
        }
        const bool drop =
            std::any_of(required.begin(), required.end(), [&](std::size_t c) { return std::isnan(values[c]); });
        if (drop) {
            ++result.dropped;
            continue;
        }
        result.data.append_row(values);
        ++result.kept;
    }
    return result;
}

IngestResult ingest_csv(const std::filesystem::path& path, const FeatureSchema& schema,
                        const IngestOptions& options) {
    std::ifstream in(path);
    if (!in) throw SchemaError("cannot open data file " + path.string());
    return ingest_csv(in, schema, options);
}

void write_csv(std::ostream& out, const Dataset& data) {
    const auto& schema = data.schema();
    for (std::size_t c = 0; c < schema.size(); ++c) out << (c ? "," : "") << schema[c].name;
    out << '\n';
    std::string buf;
    for (std::size_t r = 0; r < data.rows(); ++r) {
        buf.clear();
        for (std::size_t c = 0; c < schema.size(); ++c) {
            if (c) buf.push_back(',');
            const double v = data.at(r, c);
            if (std::isnan(v)) {
                buf += "NA";
            } else if (schema[c].kind == ColumnKind::categorical) {
                buf += schema[c].levels.at(static_cast<std::size_t>(v));
            } else {
                detail::append_double(buf, v);
            }
        }
        buf.push_back('\n');
        out << buf;
    }
}

void write_csv(const std::filesystem::path& path, const Dataset& data) {
    std::ofstream out(path);
    if (!out) throw SchemaError("cannot write " + path.string());
    write_csv(out, data);
}

// ---------------------------------------------------------------------------
// Subgroups

std::string SubgroupKey::band_label() const {
    switch (band) {
        case AgeBand::age6_11: return "Age 6-11";
        case AgeBand::age12_15: return "Age 12-15";
        case AgeBand::age12_15_behind: return "Age 12-15, behind";
        case AgeBand::age13_15_behind_hgc6: return "Age 13-15, behind, HGC>=6";
    }
    return "?";
}

std::string SubgroupKey::label() const {
    return band_label() + (gender == Gender::girl ? " / Girls" : " / Boys");
}

std::array<SubgroupKey, SubgroupKey::count> all_subgroups() {
    std::array<SubgroupKey, SubgroupKey::count> keys{};
    for (std::size_t i = 0; i < keys.size(); ++i) keys[i] = SubgroupKey::from_index(i);
    return keys;
}

std::vector<SubgroupKey> subgroups_for(double age, Gender gender, double behind_years, double hgc) {
    std::vector<SubgroupKey> keys;
    if (std::isnan(age)) return keys;
    const bool behind = behind_years >= 1.0;
    if (age >= 6 && age <= 11) keys.push_back({AgeBand::age6_11, gender});
    if (age >= 12 && age <= 15) {
        keys.push_back({AgeBand::age12_15, gender});
        if (behind) keys.push_back({AgeBand::age12_15_behind, gender});
        if (behind && age >= 13 && hgc >= 6) keys.push_back({AgeBand::age13_15_behind_hgc6, gender});
    }
    return keys;
}

SubgroupMap assign_subgroups(const Dataset& data) {
    const auto age = data.column("childAge");
    const auto gender = data.column("gender");
    const auto behind = data.column("behindYrs");
    const auto hgc = data.column("hgc");
    SubgroupMap map;
    for (std::size_t r = 0; r < data.rows(); ++r) {
        if (std::isnan(gender[r])) continue;
        const auto g = gender[r] >= 0.5 ? Gender::boy : Gender::girl;
        for (const auto& key : subgroups_for(age[r], g, behind[r], hgc[r])) map[key.index()].push_back(r);
    }
    return map;
}

// ---------------------------------------------------------------------------
// Subsidy schedule

SubsidySchedule::SubsidySchedule(std::map<std::pair<SchoolLevel, int>, Payment> table) : table_(std::move(table)) {
    validate();
}

SubsidySchedule SubsidySchedule::progresa() {
    using L = SchoolLevel;
    return SubsidySchedule({
        {{L::primary, 3}, {630, 630}},
        {{L::primary, 4}, {720, 720}},
        {{L::primary, 5}, {945, 945}},
        {{L::primary, 6}, {1215, 1215}},
        {{L::secondary, 1}, {1800, 1890}},
        {{L::secondary, 2}, {1890, 2115}},
        {{L::secondary, 3}, {2025, 2295}},
    });
}

void SubsidySchedule::validate() const {
    const Payment* prev = nullptr;
    // std::map orders primary before secondary, then by grade
    for (const auto& [key, pay] : table_) {
        const auto where = std::string(key.first == SchoolLevel::primary ? "primary" : "secondary") +
                           std::to_string(key.second);
        if (pay.boy < 0 || pay.girl < 0) throw SchemaError("subsidy " + where + ": negative payment");
        if (key.first == SchoolLevel::primary && pay.boy != pay.girl)
            throw SchemaError("subsidy " + where + ": primary payments must not depend on gender");
        if (key.first == SchoolLevel::secondary && pay.girl < pay.boy)
            throw SchemaError("subsidy " + where + ": girls' secondary payment below boys'");
        if (prev && (pay.boy < prev->boy || pay.girl < prev->girl))
            throw SchemaError("subsidy " + where + ": payment decreases with grade");
        prev = &pay;
    }
}

SubsidySchedule SubsidySchedule::parse(std::istream& in) {
    std::map<std::pair<SchoolLevel, int>, Payment> table;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto body = detail::trim(line.substr(0, line.find('#')));
        if (body.empty()) continue;
        auto tok = detail::split_ws(body);
        if (tok.size() != 3) throw ParseError("expected 'level+grade boy girl'", line_no);
        SchoolLevel level{};
        std::string_view rest;
        std::string_view key = tok[0];
        if (key.starts_with("primary")) {
            level = SchoolLevel::primary;
            rest = key.substr(7);
        } else if (key.starts_with("secondary")) {
            level = SchoolLevel::secondary;
            rest = key.substr(9);
        } else {
            throw ParseError("unknown education level '" + tok[0] + "'", line_no);
        }
        int grade = 0;
        auto [p, ec] = std::from_chars(rest.data(), rest.data() + rest.size(), grade);
        if (ec != std::errc() || p != rest.data() + rest.size())
            throw ParseError("bad grade in '" + tok[0] + "'", line_no);
        Payment pay;
        if (!detail::parse_double(tok[1], pay.boy) || !detail::parse_double(tok[2], pay.girl))
            throw ParseError("bad payment amount", line_no);
        if (!table.emplace(std::pair{level, grade}, pay).second) throw ParseError("duplicate grade", line_no);
    }
    return SubsidySchedule(std::move(table));
}

SubsidySchedule SubsidySchedule::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw SchemaError("cannot open subsidy schedule " + path.string());
    return parse(in);
}

void SubsidySchedule::write(std::ostream& out) const {
    for (const auto& [key, pay] : table_) {
        std::string line = key.first == SchoolLevel::primary ? "primary" : "secondary";
        line += std::to_string(key.second);
        line.push_back(' ');
        detail::append_double(line, pay.boy);
        line.push_back(' ');
        detail::append_double(line, pay.girl);
        out << line << '\n';
    }
}

SubsidyLookup SubsidySchedule::lookup(SchoolLevel level, int grade, Gender gender) const {
    auto it = table_.find({level, grade});
    if (it == table_.end()) return {0.0, false};
    return {gender == Gender::boy ? it->second.boy : it->second.girl, true};
}

SubsidyLookup SubsidySchedule::lookup_overall(int grade, Gender gender) const {
    if (grade >= 1 && grade <= 6) return lookup(SchoolLevel::primary, grade, gender);
    if (grade >= 7 && grade <= 9) return lookup(SchoolLevel::secondary, grade - 6, gender);
    return {0.0, false};
}

SubsidyLookup subsidy_for(const SubsidySchedule& schedule, SchoolLevel level, int grade, Gender gender) {
    return schedule.lookup(level, grade, gender);
}

}  // namespace cctml
