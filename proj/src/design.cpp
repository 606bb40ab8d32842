#include "cctml/design.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>

#include "cctml/error.hpp"
#include "text.hpp"

namespace cctml {

DesignMatrix::DesignMatrix(std::vector<FeatureInfo> features, std::size_t rows)
    : features_(std::move(features)), rows_(rows), values_(features_.size() * rows, 0.0) {}

std::vector<double> DesignMatrix::row(std::size_t r) const {
    std::vector<double> out(cols());
    for (std::size_t k = 0; k < cols(); ++k) out[k] = (*this)(r, k);
    return out;
}

std::vector<std::string> DesignMatrix::names() const {
    std::vector<std::string> out;
    for (const auto& f : features_) out.push_back(f.name);
    return out;
}

DesignMatrix DesignMatrix::select_rows(std::span<const std::size_t> indices) const {
    DesignMatrix out(features_, indices.size());
    for (std::size_t k = 0; k < cols(); ++k) {
        auto src = column(k);
        auto dst = out.column(k);
        for (std::size_t i = 0; i < indices.size(); ++i) dst[i] = src[indices[i]];
    }
    return out;
}

std::vector<FeatureInfo> feature_infos(const FeatureSchema& schema, std::span<const std::string> names) {
    std::vector<FeatureInfo> out;
    out.reserve(names.size());
    for (const auto& name : names) {
        const auto& spec = schema[schema.index_of(name)];
        out.push_back({spec.name, spec.kind, spec.levels.size()});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Imputer

Imputer::Imputer(std::vector<FeatureInfo> features, std::vector<double> fill)
    : features_(std::move(features)), fill_(std::move(fill)) {
    if (features_.size() != fill_.size()) throw ContractError("Imputer: one fill value per feature required");
}

Imputer Imputer::fit(const Dataset& data, std::span<const std::string> features) {
    auto infos = feature_infos(data.schema(), features);
    std::vector<double> fill(infos.size(), 0.0);
    std::vector<double> present;
    for (std::size_t k = 0; k < infos.size(); ++k) {
        const auto col = data.column(infos[k].name);
        present.clear();
        for (double v : col)
            if (!std::isnan(v)) present.push_back(v);
        if (present.empty()) continue;
        if (infos[k].kind == ColumnKind::continuous) {
            std::sort(present.begin(), present.end());
            const auto n = present.size();
            fill[k] = n % 2 ? present[n / 2] : 0.5 * (present[n / 2 - 1] + present[n / 2]);
        } else {
            std::map<double, std::size_t> counts;
            for (double v : present) ++counts[v];
            // lowest level wins ties
            std::size_t best = 0;
            for (const auto& [v, c] : counts)
                if (c > best) {
                    best = c;
                    fill[k] = v;
                }
        }
    }
    return Imputer(std::move(infos), std::move(fill));
}

DesignMatrix Imputer::transform(const Dataset& data) const {
    DesignMatrix x(features_, data.rows());
    for (std::size_t k = 0; k < features_.size(); ++k) {
        const auto src = data.column(features_[k].name);
        auto dst = x.column(k);
        for (std::size_t r = 0; r < data.rows(); ++r) dst[r] = std::isnan(src[r]) ? fill_[k] : src[r];
    }
    return x;
}

void Imputer::fill(std::span<double> row) const {
    for (std::size_t k = 0; k < row.size() && k < fill_.size(); ++k)
        if (std::isnan(row[k])) row[k] = fill_[k];
}

void Imputer::write(std::ostream& out) const {
    out << "imputer " << features_.size() << '\n';
    for (std::size_t k = 0; k < features_.size(); ++k)
        out << features_[k].name << ' ' << to_string(features_[k].kind) << ' ' << features_[k].n_levels << ' '
            << detail::format_real(fill_[k]) << '\n';
}

Imputer Imputer::read(std::istream& in) {
    detail::LineReader reader(in);
    const auto head = reader.expect("imputer", 2);
    const auto n = reader.count(head[1]);
    std::vector<FeatureInfo> features;
    std::vector<double> fill;
    for (std::size_t k = 0; k < n; ++k) {
        const auto tok = reader.next();
        if (tok.size() != 4) reader.fail("imputer feature line needs 4 fields");
        FeatureInfo f;
        f.name = tok[0];
        if (tok[1] == "continuous") f.kind = ColumnKind::continuous;
        else if (tok[1] == "binary") f.kind = ColumnKind::binary;
        else if (tok[1] == "categorical") f.kind = ColumnKind::categorical;
        else reader.fail("unknown kind '" + tok[1] + "'");
        f.n_levels = reader.count(tok[2]);
        features.push_back(std::move(f));
        fill.push_back(reader.real(tok[3]));
    }
    return Imputer(std::move(features), std::move(fill));
}

// ---------------------------------------------------------------------------
// QuartileBinner

QuartileBinner QuartileBinner::fit(const DesignMatrix& x) {
    QuartileBinner b;
    b.cuts_.resize(x.cols());
    std::vector<double> v;
    for (std::size_t k = 0; k < x.cols(); ++k) {
        if (x.feature(k).kind != ColumnKind::continuous || x.rows() == 0) continue;
        auto col = x.column(k);
        v.assign(col.begin(), col.end());
        std::sort(v.begin(), v.end());
        auto& cuts = b.cuts_[k];
        for (double q : {0.25, 0.5, 0.75}) {
            // type-7 quantile
            const double h = q * static_cast<double>(v.size() - 1);
            const auto lo = static_cast<std::size_t>(std::floor(h));
            const auto hi = std::min(lo + 1, v.size() - 1);
            cuts.push_back(v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]));
        }
    }
    return b;
}

double QuartileBinner::bin(std::size_t k, double v) const {
    const auto& cuts = cuts_[k];
    std::size_t level = 0;
    while (level < cuts.size() && v > cuts[level]) ++level;
    return static_cast<double>(level);
}

std::vector<FeatureInfo> QuartileBinner::output_features(const std::vector<FeatureInfo>& in) const {
    auto out = in;
    for (std::size_t k = 0; k < out.size() && k < cuts_.size(); ++k)
        if (!cuts_[k].empty()) {
            out[k].kind = ColumnKind::categorical;
            out[k].n_levels = 4;
        }
    return out;
}

DesignMatrix QuartileBinner::transform(const DesignMatrix& x) const {
    DesignMatrix out(output_features(x.features()), x.rows());
    for (std::size_t k = 0; k < x.cols(); ++k) {
        auto src = x.column(k);
        auto dst = out.column(k);
        const bool binned = k < cuts_.size() && !cuts_[k].empty();
        for (std::size_t r = 0; r < x.rows(); ++r) dst[r] = binned ? bin(k, src[r]) : src[r];
    }
    return out;
}

void QuartileBinner::transform_row(std::span<double> row) const {
    for (std::size_t k = 0; k < row.size() && k < cuts_.size(); ++k)
        if (!cuts_[k].empty()) row[k] = bin(k, row[k]);
}

void QuartileBinner::write(std::ostream& out) const {
    out << "binner " << cuts_.size() << '\n';
    for (std::size_t k = 0; k < cuts_.size(); ++k) {
        out << "cuts";
        if (cuts_[k].empty()) out << " -";
        for (double c : cuts_[k]) out << ' ' << detail::format_real(c);
        out << '\n';
    }
}

QuartileBinner QuartileBinner::read(std::istream& in) {
    detail::LineReader reader(in);
    const auto head = reader.expect("binner", 2);
    QuartileBinner b;
    b.cuts_.resize(reader.count(head[1]));
    for (auto& cuts : b.cuts_) {
        const auto tok = reader.expect("cuts", 0);
        if (tok.size() == 2 && tok[1] == "-") continue;
        if (tok.size() != 4) reader.fail("cuts line needs three values or '-'");
        for (std::size_t i = 1; i < 4; ++i) cuts.push_back(reader.real(tok[i]));
    }
    return b;
}

}  // namespace cctml
