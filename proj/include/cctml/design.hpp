#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "cctml/dataset.hpp"

namespace cctml {

struct FeatureInfo {
    std::string name;
    ColumnKind kind = ColumnKind::continuous;
    std::size_t n_levels = 0;  // categorical only

    bool operator==(const FeatureInfo&) const = default;
};

/// Dense column-major feature matrix consumed by the learners. No missing
/// values: those are filled by an Imputer before a matrix is built.
class DesignMatrix {
public:
    DesignMatrix() = default;
    DesignMatrix(std::vector<FeatureInfo> features, std::size_t rows);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return features_.size(); }

    double operator()(std::size_t r, std::size_t k) const { return values_[k * rows_ + r]; }
    double& operator()(std::size_t r, std::size_t k) { return values_[k * rows_ + r]; }

    std::span<const double> column(std::size_t k) const { return {values_.data() + k * rows_, rows_}; }
    std::span<double> column(std::size_t k) { return {values_.data() + k * rows_, rows_}; }
    std::vector<double> row(std::size_t r) const;

    const FeatureInfo& feature(std::size_t k) const { return features_[k]; }
    const std::vector<FeatureInfo>& features() const noexcept { return features_; }
    std::vector<std::string> names() const;

    DesignMatrix select_rows(std::span<const std::size_t> indices) const;

private:
    std::vector<FeatureInfo> features_;
    std::size_t rows_ = 0;
    std::vector<double> values_;
};

/// Feature descriptors for the named columns of a schema.
std::vector<FeatureInfo> feature_infos(const FeatureSchema& schema, std::span<const std::string> names);

/// Column medians (continuous) and modes (binary, categorical) learned on
/// training rows, used to fill missing cells at fit and predict time.
class Imputer {
public:
    Imputer() = default;
    Imputer(std::vector<FeatureInfo> features, std::vector<double> fill);

    static Imputer fit(const Dataset& data, std::span<const std::string> features);

    const std::vector<FeatureInfo>& features() const noexcept { return features_; }
    const std::vector<double>& fill_values() const noexcept { return fill_; }

    DesignMatrix transform(const Dataset& data) const;
    /// Fills NaN entries of a row given in feature order.
    void fill(std::span<double> row) const;

    void write(std::ostream& out) const;
    static Imputer read(std::istream& in);

private:
    std::vector<FeatureInfo> features_;
    std::vector<double> fill_;
};

/// Replaces every continuous column by a four-level categorical of its
/// training quartiles. Binary and categorical columns pass through.
class QuartileBinner {
public:
    QuartileBinner() = default;

    static QuartileBinner fit(const DesignMatrix& x);

    bool empty() const noexcept { return cuts_.empty(); }
    DesignMatrix transform(const DesignMatrix& x) const;
    void transform_row(std::span<double> row) const;
    std::vector<FeatureInfo> output_features(const std::vector<FeatureInfo>& in) const;

    void write(std::ostream& out) const;
    static QuartileBinner read(std::istream& in);

private:
    double bin(std::size_t k, double v) const;

    // per column: empty for pass-through, else three ascending cut points
    std::vector<std::vector<double>> cuts_;
};

}  // namespace cctml
