#include "cctml/linear.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <ostream>

#include "cctml/error.hpp"
#include "text.hpp"

namespace cctml {

double LinearModel::intercept_std() const {
    double b = intercept;
    for (std::size_t k = 0; k < coef.size(); ++k) b += coef[k] * mean[k];
    return b;
}

std::size_t LinearModel::nonzero() const {
    return static_cast<std::size_t>(std::count_if(coef.begin(), coef.end(), [](double c) { return c != 0.0; }));
}

namespace {

struct Standardized {
    std::vector<double> mean, sd;
    std::vector<std::size_t> kept;        // retained input columns
    std::vector<std::vector<double>> z;   // one vector per retained column
};

Standardized standardize(const DesignMatrix& x) {
    Standardized s;
    const auto n = static_cast<double>(x.rows());
    s.mean.assign(x.cols(), 0.0);
    s.sd.assign(x.cols(), 0.0);
    for (std::size_t k = 0; k < x.cols(); ++k) {
        const auto col = x.column(k);
        double m = 0.0;
        for (double v : col) m += v;
        m /= n;
        double ss = 0.0;
        for (double v : col) ss += (v - m) * (v - m);
        const double sd = std::sqrt(ss / n);
        s.mean[k] = m;
        if (!(sd > 1e-12 * std::max(1.0, std::abs(m)))) continue;
        s.sd[k] = sd;
        s.kept.push_back(k);
        std::vector<double> z(col.size());
        for (std::size_t r = 0; r < col.size(); ++r) z[r] = (col[r] - m) / sd;
        s.z.push_back(std::move(z));
    }
    return s;
}

void check_shape(const DesignMatrix& x, std::span<const double> y) {
    if (x.rows() == 0) throw ContractError("linear fit: no rows");
    if (y.size() != x.rows()) throw ContractError("linear fit: target length does not match rows");
    for (double v : y)
        if (!std::isfinite(v)) throw ContractError("linear fit: non-finite target value");
}

double soft(double v, double t) {
    if (v > t) return v - t;
    if (v < -t) return v + t;
    return 0.0;
}

double lasso_objective(const std::vector<double>& r, const std::vector<double>& beta, double lambda) {
    double rss = 0.0;
    for (double v : r) rss += v * v;
    double l1 = 0.0;
    for (double b : beta) l1 += std::abs(b);
    return rss / (2.0 * static_cast<double>(r.size())) + lambda * l1;
}

}  // namespace

double lasso_lambda_max(const DesignMatrix& x, std::span<const double> y) {
    check_shape(x, y);
    const auto s = standardize(x);
    double ybar = 0.0;
    for (double v : y) ybar += v;
    ybar /= static_cast<double>(y.size());
    double best = 0.0;
    for (const auto& z : s.z) {
        double d = 0.0;
        for (std::size_t r = 0; r < z.size(); ++r) d += z[r] * (y[r] - ybar);
        best = std::max(best, std::abs(d) / static_cast<double>(y.size()));
    }
    return best;
}

std::vector<double> lasso_lambda_grid(const DesignMatrix& x, std::span<const double> y, std::size_t count,
                                      double ratio) {
    if (count == 0) throw ContractError("lasso_lambda_grid: empty grid");
    const double top = lasso_lambda_max(x, y);
    std::vector<double> grid(count, top);
    if (count == 1 || top == 0.0) return grid;
    const double step = std::log(ratio) / static_cast<double>(count - 1);
    for (std::size_t i = 0; i < count; ++i) grid[i] = top * std::exp(step * static_cast<double>(i));
    return grid;
}

LinearModel fit_lasso(const DesignMatrix& x, std::span<const double> y, const LassoOptions& options,
                      std::vector<double>* objective, std::span<const double> warm) {
    check_shape(x, y);
    if (!(options.lambda >= 0.0)) throw ContractError("fit_lasso: lambda must be >= 0");
    if (options.max_iter < 1) throw ContractError("fit_lasso: max_iter must be >= 1");
    const auto s = standardize(x);
    const std::size_t n = x.rows();
    const auto nd = static_cast<double>(n);
    const std::size_t m = s.kept.size();

    double ybar = 0.0;
    for (double v : y) ybar += v;
    ybar /= nd;
    std::vector<double> r(n);
    for (std::size_t i = 0; i < n; ++i) r[i] = y[i] - ybar;

    std::vector<double> beta(m, 0.0), norm(m, 0.0);
    for (std::size_t j = 0; j < m; ++j) {
        for (double v : s.z[j]) norm[j] += v * v;
        norm[j] /= nd;
    }
    if (warm.size() == x.cols()) {
        for (std::size_t j = 0; j < m; ++j) {
            beta[j] = warm[s.kept[j]];
            if (beta[j] != 0.0)
                for (std::size_t i = 0; i < n; ++i) r[i] -= beta[j] * s.z[j][i];
        }
    }

    LinearModel model;
    model.link = Link::identity;
    model.lambda = options.lambda;
    model.converged = false;
    if (objective) objective->push_back(lasso_objective(r, beta, options.lambda));
    for (int it = 1; it <= options.max_iter; ++it) {
        double max_change = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
            const auto& z = s.z[j];
            double dot = 0.0;
            for (std::size_t i = 0; i < n; ++i) dot += z[i] * r[i];
            const double updated = soft(dot / nd + norm[j] * beta[j], options.lambda) / norm[j];
            const double delta = updated - beta[j];
            if (delta != 0.0) {
                for (std::size_t i = 0; i < n; ++i) r[i] -= delta * z[i];
                beta[j] = updated;
            }
            max_change = std::max(max_change, std::abs(delta));
        }
        model.iterations = it;
        if (objective) objective->push_back(lasso_objective(r, beta, options.lambda));
        if (max_change < options.tol) {
            model.converged = true;
            break;
        }
    }

    model.names = x.names();
    model.mean = s.mean;
    model.sd = s.sd;
    model.coef.assign(x.cols(), 0.0);
    model.intercept = ybar;
    for (std::size_t j = 0; j < m; ++j) {
        const auto k = s.kept[j];
        model.coef[k] = beta[j] / s.sd[k];
        model.intercept -= model.coef[k] * s.mean[k];
    }
    return model;
}

std::vector<LinearModel> fit_lasso_path(const DesignMatrix& x, std::span<const double> y,
                                        std::span<const double> lambdas, const LassoOptions& options) {
    std::vector<double> order(lambdas.begin(), lambdas.end());
    std::vector<std::size_t> idx(order.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return order[a] > order[b]; });
    std::vector<LinearModel> out(lambdas.size());
    std::vector<double> warm;
    for (auto i : idx) {
        auto opt = options;
        opt.lambda = lambdas[i];
        out[i] = fit_lasso(x, y, opt, nullptr, warm);
        warm.assign(x.cols(), 0.0);
        for (std::size_t k = 0; k < x.cols(); ++k) warm[k] = out[i].coef_std(k);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Logit

namespace {

double log1pexp(double eta) { return eta > 0 ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta)); }

double sigmoid(double eta) {
    if (eta >= 0) return 1.0 / (1.0 + std::exp(-eta));
    const double e = std::exp(eta);
    return e / (1.0 + e);
}

}  // namespace

double logit_loglik(const DesignMatrix& x, std::span<const double> y, std::span<const double> params) {
    if (params.size() != x.cols() + 1) throw ContractError("logit_loglik: need intercept plus one per column");
    double ll = 0.0;
    for (std::size_t r = 0; r < x.rows(); ++r) {
        double eta = params[0];
        for (std::size_t k = 0; k < x.cols(); ++k) eta += params[k + 1] * x(r, k);
        ll += y[r] * eta - log1pexp(eta);
    }
    return ll;
}

std::vector<double> logit_score(const DesignMatrix& x, std::span<const double> y, std::span<const double> params) {
    if (params.size() != x.cols() + 1) throw ContractError("logit_score: need intercept plus one per column");
    std::vector<double> g(params.size(), 0.0);
    for (std::size_t r = 0; r < x.rows(); ++r) {
        double eta = params[0];
        for (std::size_t k = 0; k < x.cols(); ++k) eta += params[k + 1] * x(r, k);
        const double res = y[r] - sigmoid(eta);
        g[0] += res;
        for (std::size_t k = 0; k < x.cols(); ++k) g[k + 1] += res * x(r, k);
    }
    return g;
}

LinearModel fit_logit(const DesignMatrix& x, std::span<const double> y, const LogitOptions& options,
                      std::vector<double>* loglik) {
    check_shape(x, y);
    std::size_t ones = 0;
    for (double v : y) {
        if (v != 0.0 && v != 1.0) throw ContractError("fit_logit: target must be 0/1");
        ones += v == 1.0;
    }
    if (ones == 0 || ones == y.size()) throw ContractError("fit_logit: both classes must be present");

    const auto s = standardize(x);
    const std::size_t n = x.rows();
    const std::size_t m = s.kept.size();
    Eigen::MatrixXd z(n, m + 1);
    z.col(0).setOnes();
    for (std::size_t j = 0; j < m; ++j)
        for (std::size_t i = 0; i < n; ++i) z(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j + 1)) = s.z[j][i];
    const Eigen::Map<const Eigen::VectorXd> yv(y.data(), static_cast<Eigen::Index>(n));

    const auto p = static_cast<Eigen::Index>(m + 1);
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
    const double rate = static_cast<double>(ones) / static_cast<double>(n);
    beta(0) = std::log(rate / (1.0 - rate));
    double ridge = options.ridge;

    auto objective = [&](const Eigen::VectorXd& b) {
        const Eigen::VectorXd eta = z * b;
        double ll = 0.0;
        for (Eigen::Index i = 0; i < eta.size(); ++i) ll += yv(i) * eta(i) - log1pexp(eta(i));
        return ll - 0.5 * ridge * b.tail(p - 1).squaredNorm();
    };
    auto hessian = [&](const Eigen::VectorXd& b, double penalty) {
        const Eigen::VectorXd eta = z * b;
        Eigen::VectorXd w(eta.size());
        for (Eigen::Index i = 0; i < eta.size(); ++i) {
            const double pi = sigmoid(eta(i));
            w(i) = pi * (1.0 - pi);
        }
        Eigen::MatrixXd h = z.transpose() * w.asDiagonal() * z;
        for (Eigen::Index k = 1; k < p; ++k) h(k, k) += penalty;
        return h;
    };

    LinearModel model;
    model.link = Link::logistic;
    model.converged = false;
    double obj = objective(beta);
    const auto nd = static_cast<double>(n);
    for (int it = 1; it <= options.max_iter; ++it) {
        const Eigen::VectorXd eta = z * beta;
        Eigen::VectorXd res(eta.size());
        for (Eigen::Index i = 0; i < eta.size(); ++i) res(i) = yv(i) - sigmoid(eta(i));
        Eigen::VectorXd g = z.transpose() * res;
        g.tail(p - 1) -= ridge * beta.tail(p - 1);
        if (g.cwiseAbs().maxCoeff() / nd < options.tol) {
            model.converged = true;
            break;
        }
        Eigen::MatrixXd h = hessian(beta, ridge);
        Eigen::LDLT<Eigen::MatrixXd> ldlt(h);
        Eigen::VectorXd step = ldlt.solve(g);
        if (ldlt.info() != Eigen::Success || !step.allFinite()) {
            h.diagonal().array() += 1e-10 * std::max(1.0, h.diagonal().maxCoeff());
            step = h.ldlt().solve(g);
        }
        double t = 1.0;
        bool accepted = false;
        for (int half = 0; half < 40; ++half, t *= 0.5) {
            const Eigen::VectorXd trial = beta + t * step;
            const double o = objective(trial);
            if (std::isfinite(o) && o >= obj) {
                beta = trial;
                obj = o;
                accepted = true;
                break;
            }
        }
        model.iterations = it;
        if (!accepted) {
            // no ascent direction left at machine precision
            model.converged = g.cwiseAbs().maxCoeff() / nd < 1e-6;
            break;
        }
        if (loglik) loglik->push_back(obj + 0.5 * ridge * beta.tail(p - 1).squaredNorm());
        if (!model.separated && p > 1 && beta.tail(p - 1).cwiseAbs().maxCoeff() > options.separation_bound) {
            model.separated = true;
            ridge = std::max(ridge, options.fallback_ridge);
            obj = objective(beta);
        }
    }

    model.names = x.names();
    model.mean = s.mean;
    model.sd = s.sd;
    model.coef.assign(x.cols(), 0.0);
    model.intercept = beta(0);
    // original-scale parameters are A * beta; covariance A H^-1 A'
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(x.cols() + 1), p);
    a(0, 0) = 1.0;
    for (std::size_t j = 0; j < m; ++j) {
        const auto k = s.kept[j];
        const auto col = static_cast<Eigen::Index>(j + 1);
        model.coef[k] = beta(col) / s.sd[k];
        model.intercept -= model.coef[k] * s.mean[k];
        a(0, col) = -s.mean[k] / s.sd[k];
        a(static_cast<Eigen::Index>(k + 1), col) = 1.0 / s.sd[k];
    }
    model.log_likelihood = objective(beta) + 0.5 * ridge * beta.tail(p - 1).squaredNorm();

    const Eigen::MatrixXd h = hessian(beta, ridge);
    const Eigen::MatrixXd cov = a * h.ldlt().solve(Eigen::MatrixXd::Identity(p, p)) * a.transpose();
    const std::size_t kk = x.cols();
    model.std_error.assign(kk + 1, 0.0);
    model.z_value.assign(kk + 1, 0.0);
    model.p_value.assign(kk + 1, 1.0);
    auto fill = [&](std::size_t slot, Eigen::Index row, double value, bool present) {
        if (!present) {
            model.std_error[slot] = std::numeric_limits<double>::quiet_NaN();
            model.z_value[slot] = std::numeric_limits<double>::quiet_NaN();
            model.p_value[slot] = std::numeric_limits<double>::quiet_NaN();
            return;
        }
        const double se = std::sqrt(std::max(0.0, cov(row, row)));
        model.std_error[slot] = se;
        model.z_value[slot] = value / se;
        model.p_value[slot] = std::erfc(std::abs(value / se) / std::sqrt(2.0));
    };
    for (std::size_t k = 0; k < kk; ++k) fill(k, static_cast<Eigen::Index>(k + 1), model.coef[k], s.sd[k] > 0.0);
    fill(kk, 0, model.intercept, true);
    return model;
}

double predict_linear(const LinearModel& model, std::span<const double> row) {
    double eta = model.intercept;
    for (std::size_t k = 0; k < model.coef.size(); ++k)
        if (model.coef[k] != 0.0) eta += model.coef[k] * row[k];
    return model.link == Link::identity ? eta : sigmoid(eta);
}

double predict_linear_standardized(const LinearModel& model, std::span<const double> row) {
    double eta = model.intercept_std();
    for (std::size_t k = 0; k < model.coef.size(); ++k)
        if (!model.dropped(k)) eta += model.coef_std(k) * (row[k] - model.mean[k]) / model.sd[k];
    return model.link == Link::identity ? eta : sigmoid(eta);
}

// ---------------------------------------------------------------------------
// Text form

void write_linear(std::ostream& out, const LinearModel& model) {
    using detail::format_real;
    const bool logit = model.link == Link::logistic;
    out << "linear " << (logit ? "logistic" : "identity") << " features=" << model.coef.size()
        << " lambda=" << format_real(model.lambda) << " converged=" << int(model.converged)
        << " separated=" << int(model.separated) << " iterations=" << model.iterations
        << " loglik=" << format_real(model.log_likelihood) << '\n';
    for (std::size_t k = 0; k <= model.coef.size(); ++k) {
        const bool icpt = k == model.coef.size();
        out << (icpt ? std::string("(intercept)") : model.names[k]) << ' '
            << format_real(icpt ? model.intercept : model.coef[k]);
        if (!icpt) out << ' ' << format_real(model.mean[k]) << ' ' << format_real(model.sd[k]);
        if (logit)
            out << ' ' << format_real(model.std_error[k]) << ' ' << format_real(model.z_value[k]) << ' '
                << format_real(model.p_value[k]);
        out << '\n';
    }
}

LinearModel read_linear(std::istream& in) {
    detail::LineReader reader(in);
    const auto head = reader.expect("linear", 8);
    LinearModel m;
    if (head[1] == "logistic") m.link = Link::logistic;
    else if (head[1] != "identity") reader.fail("unknown link '" + head[1] + "'");
    const auto k = reader.count(reader.value(head[2], "features"));
    m.lambda = reader.real(reader.value(head[3], "lambda"));
    m.converged = reader.value(head[4], "converged") == "1";
    m.separated = reader.value(head[5], "separated") == "1";
    m.iterations = static_cast<int>(reader.count(reader.value(head[6], "iterations")));
    m.log_likelihood = reader.real(reader.value(head[7], "loglik"));
    const bool logit = m.link == Link::logistic;
    for (std::size_t j = 0; j <= k; ++j) {
        const auto tok = reader.next();
        const bool icpt = j == k;
        const std::size_t want = (icpt ? 2 : 4) + (logit ? 3 : 0);
        if (tok.size() != want) reader.fail("coefficient line has wrong field count");
        if (icpt) {
            if (tok[0] != "(intercept)") reader.fail("expected the intercept last");
            m.intercept = reader.real(tok[1]);
        } else {
            m.names.push_back(tok[0]);
            m.coef.push_back(reader.real(tok[1]));
            m.mean.push_back(reader.real(tok[2]));
            m.sd.push_back(reader.real(tok[3]));
        }
        if (logit) {
            const std::size_t base = icpt ? 2 : 4;
            m.std_error.push_back(reader.real(tok[base]));
            m.z_value.push_back(reader.real(tok[base + 1]));
            m.p_value.push_back(reader.real(tok[base + 2]));
        }
    }
    return m;
}

}  // namespace cctml
