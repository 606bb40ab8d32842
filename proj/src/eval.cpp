#include "cctml/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <ostream>

#include "cctml/error.hpp"
#include "cctml/rng.hpp"

namespace cctml {

// ---------------------------------------------------------------------------
// Metrics

double ConfusionMatrix::predicted_rate() const {
    if (total() == 0) throw ContractError("confusion matrix is empty");
    return 100.0 * double(tp + fp) / double(total());
}

double ConfusionMatrix::actual_rate() const {
    if (total() == 0) throw ContractError("confusion matrix is empty");
    return 100.0 * double(tp + fn) / double(total());
}

ConfusionMatrix confusion(std::span<const double> actual, std::span<const double> predicted) {
    if (actual.size() != predicted.size()) throw ContractError("confusion: length mismatch");
    ConfusionMatrix cm;
    for (std::size_t i = 0; i < actual.size(); ++i) {
        if (std::isnan(actual[i]) || std::isnan(predicted[i])) continue;
        const bool a = actual[i] > 0.5, p = predicted[i] > 0.5;
        if (a && p) ++cm.tp;
        else if (!a && p) ++cm.fp;
        else if (a) ++cm.fn;
        else ++cm.tn;
    }
    return cm;
}

double accuracy(const ConfusionMatrix& cm) {
    if (cm.total() == 0) throw ContractError("accuracy of an empty confusion matrix");
    return 100.0 * double(cm.tp + cm.tn) / double(cm.total());
}

ErrorSummary mae_rmse(std::span<const double> errors) {
    if (errors.empty()) throw ContractError("mae_rmse: no errors");
    double a = 0.0, s = 0.0;
    for (double e : errors) {
        a += std::abs(e);
        s += e * e;
    }
    const double n = double(errors.size());
    return {a / n, std::sqrt(s / n)};
}

double round_half_away(double value, int decimals) {
    if (!std::isfinite(value)) return value;
    const double scale = std::pow(10.0, decimals);
    return std::round(value * scale * (1.0 + 1e-9)) / scale;
}

std::string format_fixed(double value, int decimals) {
    if (std::isnan(value)) return {};
    double r = round_half_away(value, decimals);
    if (r == 0.0) r = 0.0;  // no "-0.0"
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, r);
    return buf;
}

// ---------------------------------------------------------------------------
// Folds

std::vector<std::size_t> make_folds(std::size_t n, std::size_t k, std::uint64_t seed) {
    if (k < 2) throw ContractError("need at least 2 folds");
    if (n < k) throw ContractError("fewer rows (" + std::to_string(n) + ") than folds (" + std::to_string(k) + ")");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(seed);
    rng.shuffle(order);
    std::vector<std::size_t> fold(n);
    for (std::size_t i = 0; i < n; ++i) fold[order[i]] = i % k;
    return fold;
}

std::vector<std::size_t> make_group_folds(std::span<const double> groups, std::size_t k, std::uint64_t seed) {
    std::map<double, std::size_t> id;
    for (double g : groups) {
        if (std::isnan(g)) throw ContractError("cluster column has missing values");
        id.emplace(g, 0);
    }
    std::size_t next = 0;
    for (auto& [g, i] : id) i = next++;
    const auto label = make_folds(id.size(), k, seed);
    std::vector<std::size_t> fold(groups.size());
    for (std::size_t r = 0; r < groups.size(); ++r) fold[r] = label[id[groups[r]]];
    return fold;
}

// ---------------------------------------------------------------------------
// Cross-validation

std::string_view to_string(CvMetric metric) {
    switch (metric) {
        case CvMetric::error_rate: return "error_rate";
        case CvMetric::mae: return "mae";
        case CvMetric::rmse: return "rmse";
    }
    return "?";
}

CvMetric default_metric(Task task) { return task == Task::classification ? CvMetric::error_rate : CvMetric::rmse; }

void CvPlan::validate() const {
    if (folds < 2) throw ContractError("cross-validation needs at least 2 folds");
    resample.validate();
}

std::vector<LearnerParams> default_grid(LearnerId id, Task task) {
    std::vector<LearnerParams> grid;
    LearnerParams p;
    switch (id) {
        case LearnerId::cart:
        case LearnerId::c45:
            for (int depth : {3, 6, 10, 15})
                for (std::size_t node : {5, 20}) {
                    p.max_depth = depth;
                    p.min_node_size = node;
                    grid.push_back(p);
                }
            break;
        case LearnerId::lasso:
            for (double r : {0.1, 0.03, 0.01, 0.003, 0.001}) {
                p.lambda_ratio = r;
                grid.push_back(p);
            }
            break;
        case LearnerId::rf:
            p.trees = 100;
            p.min_node_size = 0;
            p.mtry = 0;
            grid.push_back(p);
            p.min_node_size = task == Task::classification ? 5 : 20;
            grid.push_back(p);
            break;
        case LearnerId::adaboost:
            for (std::size_t s : {20, 50}) {
                p.stages = s;
                p.boost_depth = 3;
                grid.push_back(p);
            }
            break;
        case LearnerId::logit: grid.push_back(p); break;
    }
    return grid;
}

namespace {

double fold_score(CvMetric metric, std::span<const double> actual, std::span<const double> predicted) {
    double s = 0.0;
    for (std::size_t i = 0; i < actual.size(); ++i) {
        const double e = predicted[i] - actual[i];
        switch (metric) {
            case CvMetric::error_rate: s += (predicted[i] != actual[i]) ? 1.0 : 0.0; break;
            case CvMetric::mae: s += std::abs(e); break;
            case CvMetric::rmse: s += e * e; break;
        }
    }
    s /= double(actual.size());
    return metric == CvMetric::rmse ? std::sqrt(s) : s;
}

}  // namespace

CvResult cross_validate(const Dataset& data, std::string_view target, std::span<const std::string> features,
                        LearnerId learner, Task task, const CvPlan& plan) {
    plan.validate();
    const auto rows = rows_with_target(data, target);
    const Dataset sub = rows.size() == data.rows() ? data : data.select_rows(rows);
    const std::size_t n = sub.rows();
    const std::size_t k = plan.folds;
    if (n < k) throw ContractError("fewer rows (" + std::to_string(n) + ") than folds (" + std::to_string(k) + ")");

    CvResult res;
    res.learner = learner;
    res.metric = plan.metric.value_or(default_metric(task));
    res.fold_of = plan.cluster_column.empty() ? make_folds(n, k, plan.seed)
                                              : make_group_folds(sub.column(plan.cluster_column), k, plan.seed);
    const auto grid = plan.grid.empty() ? default_grid(learner, task) : plan.grid;
    if (grid.empty()) throw ContractError("empty parameter grid");

    std::vector<std::vector<std::size_t>> train_rows(k), val_rows(k);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t f = 0; f < k; ++f) (res.fold_of[r] == f ? val_rows : train_rows)[f].push_back(r);
    std::vector<Dataset> train_sets(k), val_sets(k);
    for (std::size_t f = 0; f < k; ++f) {
        if (val_rows[f].empty() || train_rows[f].empty()) throw ContractError("a fold is empty");
        train_sets[f] = sub.select_rows(train_rows[f]);
        val_sets[f] = sub.select_rows(val_rows[f]);
        if (plan.resample.method != ResampleMethod::none) {
            auto rp = plan.resample;
            rp.seed = stream_seed(plan.resample.seed, f);
            train_sets[f] = apply_resample(train_sets[f], target, rp);
        }
    }

    for (std::size_t c = 0; c < grid.size(); ++c) {
        CvCell cell;
        cell.params = grid[c];
        try {
            for (std::size_t f = 0; f < k; ++f) {
                FitOptions opt{stream_seed(plan.seed, 1 + c * k + f), plan.threads};
                const auto model = fit_learner(learner, task, train_sets[f], target, features, grid[c], opt);
                const auto pred = model.predict(val_sets[f]);
                cell.fold_scores.push_back(fold_score(res.metric, val_sets[f].column(target), pred));
            }
            cell.score = std::accumulate(cell.fold_scores.begin(), cell.fold_scores.end(), 0.0) / double(k);
        } catch (const TrainingError& e) {
            cell.failed = true;
            cell.message = e.what();
        } catch (const ContractError& e) {
            cell.failed = true;
            cell.message = e.what();
        }
        res.cells.push_back(std::move(cell));
    }

    std::optional<std::size_t> best;
    for (std::size_t c = 0; c < res.cells.size(); ++c) {
        const auto& cell = res.cells[c];
        if (cell.failed) continue;
        if (!best) {
            best = c;
            continue;
        }
        const auto& b = res.cells[*best];
        const double tol = 1e-12 * std::max(1.0, std::abs(b.score));
        if (cell.score < b.score - tol) best = c;
        else if (std::abs(cell.score - b.score) <= tol &&
                 simplicity_key(learner, cell.params) < simplicity_key(learner, b.params))
            best = c;
    }
    if (!best) throw TrainingError(std::string(to_string(learner)) + ": every grid cell failed (" +
                                   res.cells.front().message + ")");
    res.best = *best;
    return res;
}

void write_cv_csv(std::ostream& out, const CvResult& result) {
    out << "learner,cell,params,metric,score,failed,selected";
    const std::size_t folds = result.fold_of.empty() ? 0 : *std::max_element(result.fold_of.begin(), result.fold_of.end()) + 1;
    for (std::size_t f = 0; f < folds; ++f) out << ",fold" << f + 1;
    out << ",message\n";
    for (std::size_t c = 0; c < result.cells.size(); ++c) {
        const auto& cell = result.cells[c];
        out << to_string(result.learner) << ',' << c << ',' << cell.params.describe(result.learner) << ','
            << to_string(result.metric) << ',' << (cell.failed ? "" : format_fixed(cell.score, 6)) << ','
            << (cell.failed ? 1 : 0) << ',' << (c == result.best ? 1 : 0);
        for (std::size_t f = 0; f < folds; ++f)
            out << ',' << (f < cell.fold_scores.size() ? format_fixed(cell.fold_scores[f], 6) : "");
        std::string msg = cell.message;
        std::replace(msg.begin(), msg.end(), ',', ';');
        std::replace(msg.begin(), msg.end(), '\n', ' ');
        out << ',' << msg << '\n';
    }
}

// ---------------------------------------------------------------------------
// Subgroup reports

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

const char* band_id(AgeBand b) {
    switch (b) {
        case AgeBand::age6_11: return "age6_11";
        case AgeBand::age12_15: return "age12_15";
        case AgeBand::age12_15_behind: return "age12_15_behind";
        case AgeBand::age13_15_behind_hgc6: return "age13_15_behind_hgcGe6";
    }
    return "?";
}

void summarize(SubgroupReport& rep) {
    const auto e = rep.errors();
    if (e.empty()) {
        rep.mae = rep.rmse = kNaN;
    } else {
        const auto s = mae_rmse(e);
        rep.mae = s.mae;
        rep.rmse = s.rmse;
    }
    double acc = 0.0;
    std::size_t m = 0;
    for (const auto& row : rep.rows)
        if (!std::isnan(row.accuracy)) {
            acc += row.accuracy;
            ++m;
        }
    rep.mean_accuracy = m ? acc / double(m) : kNaN;
}

double rate(std::span<const double> v, const std::vector<std::size_t>& rows, std::size_t& n) {
    double s = 0.0;
    n = 0;
    for (auto r : rows) {
        if (std::isnan(v[r])) continue;
        s += v[r];
        ++n;
    }
    return n ? 100.0 * s / double(n) : kNaN;
}

std::string column_header(SubgroupKey key) {
    return key.band_label() + (key.gender == Gender::girl ? " Girls" : " Boys");
}

}  // namespace

std::vector<double> SubgroupReport::errors() const {
    std::vector<double> e;
    for (const auto& row : rows)
        if (!std::isnan(row.error)) e.push_back(row.error);
    return e;
}

SubgroupReport subgroup_report(std::span<const double> actual, std::span<const double> predicted,
                               const SubgroupMap& groups, std::string label) {
    if (actual.size() != predicted.size()) throw ContractError("subgroup_report: predictions not aligned with rows");
    SubgroupReport rep;
    rep.label = std::move(label);
    std::vector<double> a, p;
    for (std::size_t i = 0; i < SubgroupKey::count; ++i) {
        auto& row = rep.rows[i];
        row.key = SubgroupKey::from_index(i);
        a.clear();
        p.clear();
        for (auto r : groups[i]) {
            if (r >= actual.size()) throw ContractError("subgroup_report: row index out of range");
            if (std::isnan(actual[r]) || std::isnan(predicted[r])) continue;
            a.push_back(actual[r]);
            p.push_back(predicted[r]);
        }
        row.n = row.n_predicted = a.size();
        if (a.empty()) {
            row.actual = row.predicted = row.error = row.accuracy = kNaN;
            continue;
        }
        const auto cm = confusion(a, p);
        row.actual = cm.actual_rate();
        row.predicted = cm.predicted_rate();
        row.error = row.predicted - row.actual;
        row.accuracy = accuracy(cm);
    }
    summarize(rep);
    return rep;
}

SubgroupReport compare_subgroup_rates(std::span<const double> actual, const SubgroupMap& actual_groups,
                                      std::span<const double> predicted, const SubgroupMap& predicted_groups,
                                      std::string label) {
    SubgroupReport rep;
    rep.label = std::move(label);
    for (std::size_t i = 0; i < SubgroupKey::count; ++i) {
        auto& row = rep.rows[i];
        row.key = SubgroupKey::from_index(i);
        row.actual = rate(actual, actual_groups[i], row.n);
        row.predicted = rate(predicted, predicted_groups[i], row.n_predicted);
        row.error = row.predicted - row.actual;  // NaN if either side is empty
        row.accuracy = kNaN;
    }
    summarize(rep);
    return rep;
}

SubgroupReport fixed_report(std::string label, const std::array<double, 8>& actual,
                            const std::array<double, 8>& predicted, const std::array<double, 8>& error) {
    SubgroupReport rep;
    rep.label = std::move(label);
    for (std::size_t i = 0; i < SubgroupKey::count; ++i) {
        rep.rows[i] = {SubgroupKey::from_index(i), 0, 0, actual[i], predicted[i], error[i], kNaN};
    }
    summarize(rep);
    return rep;
}

void write_reports_csv(std::ostream& out, std::span<const SubgroupReport> reports) {
    out << "model,band,gender,n,n_predicted,actual,predicted,error,accuracy\n";
    for (const auto& rep : reports)
        for (const auto& row : rep.rows)
            out << rep.label << ',' << band_id(row.key.band) << ','
                << (row.key.gender == Gender::girl ? "girl" : "boy") << ',' << row.n << ',' << row.n_predicted << ','
                << format_fixed(row.actual, 4) << ',' << format_fixed(row.predicted, 4) << ','
                << format_fixed(row.error, 4) << ',' << format_fixed(row.accuracy, 4) << '\n';
    for (const auto& rep : reports)
        out << rep.label << ",summary,,,,MAE=" << format_fixed(rep.mae, 4) << ",RMSE=" << format_fixed(rep.rmse, 4)
            << ",,mean_accuracy=" << format_fixed(rep.mean_accuracy, 4) << '\n';
}

namespace {

void md_header(std::ostream& out, std::string_view first) {
    out << "| " << first << " |";
    for (auto key : all_subgroups()) out << ' ' << column_header(key) << " |";
}

void md_rule(std::ostream& out, std::size_t extra) {
    out << "|---|";
    for (std::size_t i = 0; i < SubgroupKey::count + extra; ++i) out << "---:|";
    out << '\n';
}

}  // namespace

void write_reports_markdown(std::ostream& out, std::string_view title, std::span<const SubgroupReport> reports) {
    out << "### " << title << "\n\n";
    md_header(out, "Attendance rate (%)");
    out << " MAE | RMSE |\n";
    md_rule(out, 2);
    const auto actual_row = [&](const SubgroupReport& rep, std::string_view label) {
        out << "| " << label << " |";
        for (const auto& row : rep.rows) out << ' ' << format_fixed(row.actual, 1) << " |";
        out << "  |  |\n";
    };
    // one Actual row unless the reports were scored against different data
    bool shared = true;
    for (const auto& rep : reports)
        for (std::size_t i = 0; i < rep.rows.size(); ++i)
            shared = shared && format_fixed(rep.rows[i].actual, 1) == format_fixed(reports.front().rows[i].actual, 1);
    if (!reports.empty() && shared) actual_row(reports.front(), "Actual");
    for (const auto& rep : reports) {
        if (!shared) actual_row(rep, rep.label + " actual");
        out << "| " << rep.label << " predicted |";
        for (const auto& row : rep.rows) out << ' ' << format_fixed(row.predicted, 1) << " |";
        out << "  |  |\n| " << rep.label << " err |";
        for (const auto& row : rep.rows) out << ' ' << format_fixed(row.error, 1) << " |";
        out << ' ' << format_fixed(rep.mae, 2) << " | " << format_fixed(rep.rmse, 2) << " |\n";
    }
    out << '\n';
}

void write_accuracy_markdown(std::ostream& out, std::string_view title, std::span<const SubgroupReport> reports) {
    out << "### " << title << "\n\n";
    md_header(out, "Accuracy (%)");
    out << " Average |\n";
    md_rule(out, 1);
    for (const auto& rep : reports) {
        out << "| " << rep.label << " |";
        for (const auto& row : rep.rows) out << ' ' << format_fixed(row.accuracy, 2) << " |";
        out << ' ' << format_fixed(rep.mean_accuracy, 2) << " |\n";
    }
    out << '\n';
}

ValueReport value_report(std::span<const double> actual, std::span<const double> predicted, const SubgroupMap& groups,
                         std::string label) {
    if (actual.size() != predicted.size()) throw ContractError("value_report: predictions not aligned with rows");
    ValueReport rep;
    rep.label = std::move(label);
    for (std::size_t i = 0; i < SubgroupKey::count; ++i) {
        auto& row = rep.rows[i];
        row.key = SubgroupKey::from_index(i);
        double sa = 0, sp = 0, se = 0, ss = 0;
        for (auto r : groups[i]) {
            if (std::isnan(actual[r]) || std::isnan(predicted[r])) continue;
            const double e = predicted[r] - actual[r];
            sa += actual[r];
            sp += predicted[r];
            se += std::abs(e);
            ss += e * e;
            ++row.n;
        }
        if (row.n == 0) {
            row.actual = row.predicted = row.mae = row.rmse = kNaN;
            continue;
        }
        const double n = double(row.n);
        row.actual = sa / n;
        row.predicted = sp / n;
        row.mae = se / n;
        row.rmse = std::sqrt(ss / n);
    }
    return rep;
}

void write_value_csv(std::ostream& out, std::span<const ValueReport> reports) {
    out << "model,band,gender,n,actual,predicted,mae,rmse\n";
    for (const auto& rep : reports)
        for (const auto& row : rep.rows)
            out << rep.label << ',' << band_id(row.key.band) << ','
                << (row.key.gender == Gender::girl ? "girl" : "boy") << ',' << row.n << ','
                << format_fixed(row.actual, 2) << ',' << format_fixed(row.predicted, 2) << ','
                << format_fixed(row.mae, 2) << ',' << format_fixed(row.rmse, 2) << '\n';
}

void write_value_markdown(std::ostream& out, std::string_view title, std::span<const ValueReport> reports) {
    out << "### " << title << "\n\n";
    md_header(out, "");
    out << '\n';
    md_rule(out, 0);
    for (const auto& rep : reports) {
        const std::pair<const char*, double ValueRow::*> fields[] = {
            {"actual", &ValueRow::actual}, {"predicted", &ValueRow::predicted},
            {"MAE", &ValueRow::mae},       {"RMSE", &ValueRow::rmse}};
        for (const auto& [name, field] : fields) {
            out << "| " << rep.label << ' ' << name << " |";
            for (const auto& row : rep.rows) out << ' ' << format_fixed(row.*field, 0) << " |";
            out << '\n';
        }
    }
    out << '\n';
}

// ---------------------------------------------------------------------------
// Model comparison

LearnerId model_select(std::span<const Candidate> candidates) {
    if (candidates.empty()) throw ContractError("model_select: no candidates");
    const Candidate* best = &candidates[0];
    for (const auto& c : candidates) {
        if (std::tie(c.mae, c.rmse, c.learner) < std::tie(best->mae, best->rmse, best->learner)) best = &c;
    }
    return best->learner;
}

void write_comparison_csv(std::ostream& out, std::span<const ModelScore> rows) {
    out << "model,mae,rmse,accuracy\n";
    for (const auto& r : rows)
        out << r.name << ',' << format_fixed(r.mae, 4) << ',' << format_fixed(r.rmse, 4) << ','
            << format_fixed(r.accuracy, 4) << '\n';
}

void write_comparison_markdown(std::ostream& out, std::string_view title, std::span<const ModelScore> rows,
                               int decimals) {
    out << "### " << title << "\n\n| Model | MAE | RMSE | Accuracy |\n|---|---:|---:|---:|\n";
    for (const auto& r : rows) {
        const auto acc = format_fixed(r.accuracy, 2);
        out << "| " << r.name << " | " << format_fixed(r.mae, decimals) << " | " << format_fixed(r.rmse, decimals)
            << " | " << (acc.empty() ? "NA" : acc) << " |\n";
    }
    out << '\n';
}

}  // namespace cctml
