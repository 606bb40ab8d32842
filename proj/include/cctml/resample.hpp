#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cctml/dataset.hpp"
#include "cctml/design.hpp"

namespace cctml {

enum class ResampleMethod { none, under, over, smote };

std::string_view to_string(ResampleMethod method);
/// Throws ContractError for unknown names.
ResampleMethod parse_resample_method(std::string_view name);

struct ResamplePlan {
    ResampleMethod method = ResampleMethod::none;
    double ratio = 1.0;  // target minority:majority
    std::size_t smote_k = 5;
    std::uint64_t seed = 0;

    void validate() const;
};

enum class RowOrigin : std::uint8_t { original, duplicate, synthetic };

/// Where an output row came from. For synthetic rows `source` is the seed
/// row, `neighbor` the interpolation partner and `u` the mixing weight.
struct RowSource {
    RowOrigin origin = RowOrigin::original;
    std::size_t source = 0;
    std::size_t neighbor = 0;
    double u = 0.0;
};

struct ResampleResult {
    DesignMatrix x;
    std::vector<double> y;
    std::vector<RowSource> provenance;
    double minority_label = 1.0;
};

/// Rebalances a two-class sample. Undersampling keeps round(m / ratio)
/// majority rows; oversampling and SMOTE grow the minority to round(ratio * M)
/// rows. SMOTE interpolates continuous columns between a minority row and one
/// of its k nearest minority neighbours (Euclidean on standardized continuous
/// columns) and copies binary and categorical columns from the seed row.
ResampleResult apply_resample(const DesignMatrix& x, std::span<const double> y, const ResamplePlan& plan);

/// Dataset form: the target column is named, every other column is carried
/// along (continuous feature columns interpolated by SMOTE, the rest copied
/// from the seed row).
Dataset apply_resample(const Dataset& data, std::string_view target, const ResamplePlan& plan,
                       std::vector<RowSource>* provenance = nullptr);

}  // namespace cctml
