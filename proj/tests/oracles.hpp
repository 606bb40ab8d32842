#pragma once

// Independent reference implementations used by the unit and acceptance tests.
// They recompute everything from scratch with no shared code paths.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "cctml/design.hpp"
#include "cctml/rng.hpp"
#include "cctml/trees.hpp"

namespace oracle {

struct Split {
    std::size_t feature = 0;
    bool categorical = false;
    double threshold = 0.0;
    std::uint64_t mask = 0;
    double criterion = 0.0;
    double gain = 0.0;
};

/// Impurity of a list of (label-or-value, weight) pairs, per unit weight.
inline double impurity(const std::vector<double>& y, const std::vector<double>& w, std::size_t n_classes,
                       cctml::CostKind kind) {
    double total = 0.0;
    for (double v : w) total += v;
    if (n_classes == 0) {
        double mean = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) mean += w[i] * y[i];
        mean /= total;
        double ss = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) ss += w[i] * (y[i] - mean) * (y[i] - mean);
        return ss / total;
    }
    double acc = 0.0;
    for (std::size_t c = 0; c < n_classes; ++c) {
        double wc = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i)
            if (y[i] == double(c)) wc += w[i];
        const double p = wc / total;
        if (p == 0.0) continue;
        acc += kind == cctml::CostKind::entropy ? -p * std::log(p) : p * (1.0 - p);
    }
    return acc;
}

/// Exhaustive scan over every (feature, threshold) and every level subset
/// that keeps the highest present level on the right. First candidate within
/// the tie tolerance of the maximum wins, in (feature, threshold/mask) order.
inline std::optional<Split> brute_force_split(const cctml::DesignMatrix& x, const std::vector<double>& y,
                                              const std::vector<double>& w, std::size_t n_classes,
                                              const cctml::TreeConfig& cfg) {
    const std::size_t n = x.rows();
    std::vector<Split> all;
    const double parent = impurity(y, w, n_classes, cfg.cost);
    if (parent <= 0.0 || n < 2 * cfg.min_node_size) return std::nullopt;
    double wt = 0.0;
    for (double v : w) wt += v;

    auto evaluate = [&](std::size_t k, auto goes_left, Split s) {
        std::vector<double> yl, wl, yr, wr;
        for (std::size_t r = 0; r < n; ++r) {
            if (goes_left(x(r, k))) {
                yl.push_back(y[r]);
                wl.push_back(w[r]);
            } else {
                yr.push_back(y[r]);
                wr.push_back(w[r]);
            }
        }
        if (yl.size() < cfg.min_node_size || yr.size() < cfg.min_node_size || yl.empty() || yr.empty()) return;
        double sl = 0, sr = 0;
        for (double v : wl) sl += v;
        for (double v : wr) sr += v;
        s.gain = parent - (sl / wt * impurity(yl, wl, n_classes, cfg.cost) +
                           sr / wt * impurity(yr, wr, n_classes, cfg.cost));
        s.criterion = s.gain;
        if (cfg.gain == cctml::GainKind::gain_ratio) {
            double info = 0.0;
            if (s.categorical) {
                std::set<double> levels;
                for (std::size_t r = 0; r < n; ++r) levels.insert(x(r, k));
                for (double l : levels) {
                    double wlv = 0;
                    for (std::size_t r = 0; r < n; ++r)
                        if (x(r, k) == l) wlv += w[r];
                    info -= wlv / wt * std::log(wlv / wt);
                }
            } else {
                info = -(sl / wt * std::log(sl / wt) + sr / wt * std::log(sr / wt));
            }
            s.criterion = s.gain / info;
        }
        all.push_back(s);
    };

    for (std::size_t k = 0; k < x.cols(); ++k) {
        std::set<double> values;
        for (std::size_t r = 0; r < n; ++r) values.insert(x(r, k));
        if (x.feature(k).kind == cctml::ColumnKind::categorical) {
            std::vector<int> present;
            for (double v : values) present.push_back(int(v));
            const std::size_t m = present.size();
            if (m < 2) continue;
            std::vector<std::uint64_t> masks;
            for (std::uint64_t s = 1; s < (std::uint64_t{1} << m); ++s) {
                if ((s >> (m - 1)) & 1U) continue;
                std::uint64_t mask = 0;
                for (std::size_t j = 0; j < m; ++j)
                    if ((s >> j) & 1U) mask |= std::uint64_t{1} << present[j];
                masks.push_back(mask);
            }
            std::sort(masks.begin(), masks.end());
            for (auto mask : masks) {
                Split s;
                s.feature = k;
                s.categorical = true;
                s.mask = mask;
                evaluate(k, [mask](double v) { return ((mask >> int(v)) & 1U) != 0; }, s);
            }
        } else {
            for (double v : values) {
                Split s;
                s.feature = k;
                s.threshold = v;
                evaluate(k, [v](double xv) { return xv <= v; }, s);
            }
        }
    }
    if (all.empty()) return std::nullopt;
    double best = -INFINITY;
    for (const auto& s : all) best = std::max(best, s.criterion);
    if (best < cfg.min_gain) return std::nullopt;
    const double floor = best - cctml::kGainTieTolerance * std::max(1.0, std::abs(best));
    for (const auto& s : all)
        if (s.criterion >= floor) return s;
    return std::nullopt;
}

struct RandomCase {
    cctml::DesignMatrix x;
    std::vector<double> y;
    std::vector<double> w;
    std::size_t n_classes = 0;
    cctml::TreeConfig cfg;
};

/// Random small dataset of mixed column kinds with a random cost setting.
inline RandomCase random_case(cctml::Rng& rng) {
    RandomCase c;
    const std::size_t n = 2 + rng.below(49);
    const std::size_t k = 1 + rng.below(4);
    std::vector<cctml::FeatureInfo> feats;
    for (std::size_t j = 0; j < k; ++j) {
        const auto kind = rng.below(3);
        if (kind == 0) feats.push_back({"c" + std::to_string(j), cctml::ColumnKind::continuous, 0});
        else if (kind == 1) feats.push_back({"b" + std::to_string(j), cctml::ColumnKind::binary, 0});
        else feats.push_back({"g" + std::to_string(j), cctml::ColumnKind::categorical, 2 + rng.below(6)});
    }
    c.x = cctml::DesignMatrix(feats, n);
    for (std::size_t j = 0; j < k; ++j) {
        const bool coarse = rng.uniform() < 0.5;
        for (std::size_t r = 0; r < n; ++r) {
            double v;
            switch (feats[j].kind) {
                case cctml::ColumnKind::continuous:
                    v = coarse ? double(rng.below(6)) : std::round(rng.normal() * 1000.0) / 100.0;
                    break;
                case cctml::ColumnKind::binary: v = double(rng.below(2)); break;
                default: v = double(rng.below(feats[j].n_levels)); break;
            }
            c.x(r, j) = v;
        }
    }
    const auto mode = rng.below(5);
    c.cfg.min_node_size = 1 + rng.below(3);
    c.cfg.min_gain = 1e-9;
    if (mode == 4) {
        c.n_classes = 0;
        c.cfg.cost = cctml::CostKind::squared;
        for (std::size_t r = 0; r < n; ++r) c.y.push_back(std::round(rng.uniform() * 1000.0) / 100.0);
    } else {
        c.n_classes = 2 + rng.below(2);
        c.cfg.cost = mode == 0 ? cctml::CostKind::gini : cctml::CostKind::entropy;
        if (mode == 3) c.cfg.gain = cctml::GainKind::gain_ratio;
        for (std::size_t r = 0; r < n; ++r) c.y.push_back(double(rng.below(c.n_classes)));
    }
    const bool weighted = rng.uniform() < 0.3;
    for (std::size_t r = 0; r < n; ++r) c.w.push_back(weighted ? 0.1 + rng.uniform() : 1.0);
    return c;
}

/// Compares best_split with the brute-force scan. Returns an empty string on
/// agreement, otherwise a description of the mismatch.
inline std::string compare_split(const RandomCase& c) {
    cctml::TreeTarget t{c.y, c.n_classes, c.w};
    std::vector<std::size_t> rows(c.x.rows());
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
    const auto got = cctml::best_split(c.x, t, rows, c.cfg);
    const auto want = brute_force_split(c.x, c.y, c.w, c.n_classes, c.cfg);
    if (got.has_value() != want.has_value()) return "presence differs";
    if (!got) return {};
    if (std::abs(got->criterion - want->criterion) > 1e-12) return "criterion differs";
    if (std::abs(got->gain - want->gain) > 1e-12) return "gain differs";
    if (got->rule.feature != want->feature) return "feature differs";
    if (got->rule.categorical != want->categorical) return "kind differs";
    if (want->categorical ? got->rule.left_levels != want->mask : got->rule.threshold != want->threshold)
        return "threshold differs";
    return {};
}

}  // namespace oracle
