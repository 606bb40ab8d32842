#include "cctml/resample.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "cctml/error.hpp"
#include "cctml/rng.hpp"

namespace cctml {

std::string_view to_string(ResampleMethod method) {
    switch (method) {
        case ResampleMethod::none: return "none";
        case ResampleMethod::under: return "under";
        case ResampleMethod::over: return "over";
        case ResampleMethod::smote: return "smote";
    }
    return "?";
}

ResampleMethod parse_resample_method(std::string_view name) {
    for (auto m : {ResampleMethod::none, ResampleMethod::under, ResampleMethod::over, ResampleMethod::smote})
        if (name == to_string(m)) return m;
    throw ContractError("unknown resampling method '" + std::string(name) + "'");
}

void ResamplePlan::validate() const {
    if (!(ratio > 0.0 && ratio <= 1.0)) throw ContractError("resample ratio must lie in (0, 1]");
    if (smote_k < 1) throw ContractError("smote_k must be >= 1");
}

namespace {

struct Classes {
    double minority = 1.0;
    double majority = 0.0;
    std::vector<std::size_t> minor;
    std::vector<std::size_t> major;
};

Classes split_classes(std::span<const double> y) {
    std::map<double, std::vector<std::size_t>> by;
    for (std::size_t r = 0; r < y.size(); ++r) by[y[r]].push_back(r);
    if (by.size() != 2) throw ContractError("resampling needs exactly two classes in the target");
    auto a = by.begin();
    auto b = std::next(a);
    Classes c;
    // equal sizes: the larger label counts as the minority
    if (a->second.size() < b->second.size()) std::swap(a, b);
    c.minority = b->first;
    c.majority = a->first;
    c.minor = b->second;
    c.major = a->second;
    return c;
}

/// Row plan over a column-major table. `interpolate[k]` marks the columns
/// SMOTE interpolates and measures distance on.
std::vector<RowSource> resample_rows(std::size_t n, std::span<const double> y, const ResamplePlan& plan,
                                     const std::vector<std::span<const double>>& columns,
                                     const std::vector<bool>& interpolate, double& minority_label) {
    plan.validate();
    std::vector<RowSource> out;
    if (plan.method == ResampleMethod::none) {
        for (std::size_t r = 0; r < n; ++r) out.push_back({RowOrigin::original, r, 0, 0.0});
        return out;
    }
    const auto cls = split_classes(y);
    minority_label = cls.minority;
    const auto m = cls.minor.size();
    const auto big = cls.major.size();
    Rng rng(plan.seed);

    if (plan.method == ResampleMethod::under) {
        const auto keep = std::min<std::size_t>(big, static_cast<std::size_t>(std::llround(double(m) / plan.ratio)));
        auto major = cls.major;
        // partial Fisher-Yates selects `keep` rows uniformly
        for (std::size_t i = 0; i < keep; ++i) std::swap(major[i], major[i + rng.below(big - i)]);
        std::vector<char> kept(n, 0);
        for (auto r : cls.minor) kept[r] = 1;
        for (std::size_t i = 0; i < keep; ++i) kept[major[i]] = 1;
        for (std::size_t r = 0; r < n; ++r)
            if (kept[r]) out.push_back({RowOrigin::original, r, 0, 0.0});
        return out;
    }

    for (std::size_t r = 0; r < n; ++r) out.push_back({RowOrigin::original, r, 0, 0.0});
    const auto target = static_cast<std::size_t>(std::llround(plan.ratio * double(big)));
    if (target <= m) return out;
    const std::size_t extra = target - m;

    if (plan.method == ResampleMethod::over) {
        for (std::size_t i = 0; i < extra; ++i)
            out.push_back({RowOrigin::duplicate, cls.minor[rng.below(m)], 0, 0.0});
        return out;
    }

    if (m < plan.smote_k + 1)
        throw ContractError("SMOTE needs at least " + std::to_string(plan.smote_k + 1) + " minority rows, found " +
                            std::to_string(m) + " (short by " + std::to_string(plan.smote_k + 1 - m) + ")");
    // standardized distance columns
    std::vector<std::vector<double>> z;
    for (std::size_t k = 0; k < columns.size(); ++k) {
        if (!interpolate[k]) continue;
        const auto col = columns[k];
        double mean = 0.0, cnt = 0.0;
        for (double v : col)
            if (!std::isnan(v)) {
                mean += v;
                cnt += 1.0;
            }
        mean = cnt > 0 ? mean / cnt : 0.0;
        double ss = 0.0;
        for (double v : col)
            if (!std::isnan(v)) ss += (v - mean) * (v - mean);
        const double sd = cnt > 0 ? std::sqrt(ss / cnt) : 0.0;
        if (!(sd > 0.0)) continue;
        std::vector<double> zc(m);
        for (std::size_t i = 0; i < m; ++i) {
            const double v = col[cls.minor[i]];
            zc[i] = std::isnan(v) ? 0.0 : (v - mean) / sd;
        }
        z.push_back(std::move(zc));
    }
    std::vector<std::vector<std::size_t>> neighbours(m);
    std::vector<std::pair<double, std::size_t>> dist;
    auto knn = [&](std::size_t i) -> const std::vector<std::size_t>& {
        auto& nb = neighbours[i];
        if (!nb.empty()) return nb;
        dist.clear();
        for (std::size_t j = 0; j < m; ++j) {
            if (j == i) continue;
            double d = 0.0;
            for (const auto& zc : z) d += (zc[i] - zc[j]) * (zc[i] - zc[j]);
            dist.emplace_back(d, j);
        }
        std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(plan.smote_k), dist.end());
        for (std::size_t q = 0; q < plan.smote_k; ++q) nb.push_back(dist[q].second);
        return nb;
    };
    for (std::size_t e = 0; e < extra; ++e) {
        const auto i = static_cast<std::size_t>(rng.below(m));
        const auto& nb = knn(i);
        const auto j = nb[rng.below(nb.size())];
        const double u = rng.uniform();
        out.push_back({RowOrigin::synthetic, cls.minor[i], cls.minor[j], u});
    }
    return out;
}

double materialize(const RowSource& src, std::span<const double> col, bool interpolate) {
    const double a = col[src.source];
    if (src.origin != RowOrigin::synthetic || !interpolate) return a;
    return a + src.u * (col[src.neighbor] - a);
}

}  // namespace

ResampleResult apply_resample(const DesignMatrix& x, std::span<const double> y, const ResamplePlan& plan) {
    if (y.size() != x.rows()) throw ContractError("apply_resample: target length does not match rows");
    std::vector<std::span<const double>> columns;
    std::vector<bool> interp;
    for (std::size_t k = 0; k < x.cols(); ++k) {
        columns.push_back(x.column(k));
        interp.push_back(x.feature(k).kind == ColumnKind::continuous);
    }
    ResampleResult res;
    res.provenance = resample_rows(x.rows(), y, plan, columns, interp, res.minority_label);
    res.x = DesignMatrix(x.features(), res.provenance.size());
    for (std::size_t k = 0; k < x.cols(); ++k) {
        auto dst = res.x.column(k);
        for (std::size_t i = 0; i < res.provenance.size(); ++i)
            dst[i] = materialize(res.provenance[i], columns[k], interp[k]);
    }
    res.y.reserve(res.provenance.size());
    for (const auto& p : res.provenance) res.y.push_back(y[p.source]);
    return res;
}

Dataset apply_resample(const Dataset& data, std::string_view target, const ResamplePlan& plan,
                       std::vector<RowSource>* provenance) {
    const auto t = data.schema().index_of(target);
    const auto y = data.column(t);
    for (double v : y)
        if (std::isnan(v)) throw ContractError("apply_resample: target column has missing values");
    std::vector<std::span<const double>> columns;
    std::vector<bool> interp;
    for (std::size_t k = 0; k < data.cols(); ++k) {
        const auto& spec = data.schema()[k];
        columns.push_back(data.column(k));
        interp.push_back(k != t && spec.kind == ColumnKind::continuous && spec.role == ColumnRole::feature);
    }
    double minority = 1.0;
    const auto rows = resample_rows(data.rows(), y, plan, columns, interp, minority);
    Dataset out(data.schema());
    std::vector<double> row(data.cols());
    for (const auto& src : rows) {
        for (std::size_t k = 0; k < data.cols(); ++k) row[k] = materialize(src, columns[k], interp[k]);
        out.append_row(row);
    }
    if (provenance) *provenance = rows;
    return out;
}

}  // namespace cctml
