#pragma once

// Randomized property check for the resampling plans, shared by the unit
// and acceptance suites.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "cctml/resample.hpp"
#include "cctml/rng.hpp"

namespace oracle {

/// Builds a random imbalanced sample, applies a random plan twice and checks
/// betweenness, untouched classes, the ratio target and determinism.
/// Returns an empty string on success.
inline std::string resample_case(cctml::Rng& rng) {
    using namespace cctml;
    const std::size_t minor = 6 + rng.below(60);
    const std::size_t major = minor + 1 + rng.below(400);
    const std::size_t n = minor + major;
    DesignMatrix x({{"a", ColumnKind::continuous, 0},
                    {"b", ColumnKind::continuous, 0},
                    {"flag", ColumnKind::binary, 0},
                    {"cat", ColumnKind::categorical, 4}},
                   n);
    std::vector<double> y(n);
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    rng.shuffle(order);
    for (std::size_t i = 0; i < n; ++i) {
        const auto r = order[i];
        y[r] = i < minor ? 1.0 : 0.0;
        x(r, 0) = rng.normal() * 5.0 + (y[r] > 0 ? 2.0 : 0.0);
        x(r, 1) = std::round(rng.uniform() * 100.0);
        x(r, 2) = double(rng.below(2));
        x(r, 3) = double(rng.below(4));
    }
    ResamplePlan plan;
    plan.method = static_cast<ResampleMethod>(1 + rng.below(3));
    plan.ratio = 0.2 + 0.8 * rng.uniform();
    plan.smote_k = 1 + rng.below(5);
    plan.seed = rng();

    const auto a = apply_resample(x, y, plan);
    const auto b = apply_resample(x, y, plan);
    if (a.y != b.y || a.provenance.size() != b.provenance.size()) return "not deterministic";
    for (std::size_t k = 0; k < x.cols(); ++k)
        for (std::size_t i = 0; i < a.x.rows(); ++i)
            if (a.x(i, k) != b.x(i, k)) return "not deterministic";

    std::size_t out_minor = 0, out_major = 0;
    for (double v : a.y) (v == 1.0 ? out_minor : out_major)++;

    if (plan.method == ResampleMethod::under) {
        if (out_minor != minor) return "undersampling touched minority rows";
        const double want = double(minor) / plan.ratio;
        const double expect = std::min(double(major), want);
        if (std::abs(double(out_major) - expect) > 1.0) return "undersampled majority count off target";
        std::vector<char> seen(n, 0);
        for (const auto& p : a.provenance) {
            if (p.origin != RowOrigin::original) return "undersampling created rows";
            if (seen[p.source]++) return "undersampling repeated a row";
        }
    } else {
        if (out_major != major) return "oversampling touched majority rows";
        const double want = std::max(double(minor), plan.ratio * double(major));
        if (std::abs(double(out_minor) - want) > 1.0) return "minority count off target";
        for (std::size_t i = 0; i < a.provenance.size(); ++i) {
            const auto& p = a.provenance[i];
            if (p.origin == RowOrigin::original) {
                for (std::size_t k = 0; k < x.cols(); ++k)
                    if (a.x(i, k) != x(p.source, k)) return "original row altered";
                continue;
            }
            if (y[p.source] != 1.0) return "majority row used as a seed";
            if (p.origin == RowOrigin::duplicate) {
                for (std::size_t k = 0; k < x.cols(); ++k)
                    if (a.x(i, k) != x(p.source, k)) return "duplicate differs from its source";
                continue;
            }
            if (y[p.neighbor] != 1.0 || p.neighbor == p.source) return "bad SMOTE neighbour";
            if (!(p.u >= 0.0 && p.u < 1.0)) return "mixing weight outside [0,1)";
            for (std::size_t k = 0; k < 2; ++k) {
                const double lo = std::min(x(p.source, k), x(p.neighbor, k));
                const double hi = std::max(x(p.source, k), x(p.neighbor, k));
                if (a.x(i, k) < lo || a.x(i, k) > hi) return "synthetic point off the segment";
            }
            for (std::size_t k = 2; k < 4; ++k)
                if (a.x(i, k) != x(p.source, k)) return "discrete column not copied from the seed";
        }
    }
    return {};
}

}  // namespace oracle
