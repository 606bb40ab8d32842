#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "cctml/design.hpp"

namespace cctml {

enum class Link { identity, logistic };

/// Coefficients on the original scale plus the standardization record used
/// during fitting. Zero-variance columns are dropped (sd recorded as 0,
/// coefficient fixed at 0).
struct LinearModel {
    Link link = Link::identity;
    std::vector<std::string> names;
    std::vector<double> coef;  // original scale, one per input column
    double intercept = 0.0;
    std::vector<double> mean;
    std::vector<double> sd;  // 0 marks a dropped column
    double lambda = 0.0;
    bool converged = true;
    bool separated = false;
    int iterations = 0;
    /// Logit only: standard errors, z statistics and two-sided p-values,
    /// one per coefficient with the intercept last. Empty otherwise.
    std::vector<double> std_error;
    std::vector<double> z_value;
    std::vector<double> p_value;
    double log_likelihood = 0.0;

    std::size_t n_features() const noexcept { return coef.size(); }
    bool dropped(std::size_t k) const { return sd[k] == 0.0; }
    /// Coefficient on the standardized scale.
    double coef_std(std::size_t k) const { return coef[k] * sd[k]; }
    /// Intercept on the standardized scale.
    double intercept_std() const;
    std::size_t nonzero() const;

    bool operator==(const LinearModel&) const = default;
};

struct LassoOptions {
    double lambda = 0.0;
    double tol = 1e-7;  // on the largest standardized coefficient change per sweep
    int max_iter = 10000;
};

/// Minimizes (1/2N)||y - b0 - Z beta||^2 + lambda ||beta||_1 on standardized
/// columns Z (population sd) by cyclic coordinate descent. `objective`, when
/// given, receives the objective after every sweep. `warm` may hold
/// standardized starting coefficients.
LinearModel fit_lasso(const DesignMatrix& x, std::span<const double> y, const LassoOptions& options,
                      std::vector<double>* objective = nullptr, std::span<const double> warm = {});

/// Smallest lambda at which every coefficient is zero: max_k |z_k'(y - ybar)| / N.
double lasso_lambda_max(const DesignMatrix& x, std::span<const double> y);

/// `count` log-spaced values from lambda_max down to lambda_max * ratio.
std::vector<double> lasso_lambda_grid(const DesignMatrix& x, std::span<const double> y, std::size_t count = 50,
                                      double ratio = 1e-4);

/// Fits the whole path with warm starts, largest lambda first.
std::vector<LinearModel> fit_lasso_path(const DesignMatrix& x, std::span<const double> y,
                                        std::span<const double> lambdas, const LassoOptions& options);

struct LogitOptions {
    double tol = 1e-9;  // on the max-norm of the mean score
    int max_iter = 50;
    double ridge = 0.0;
    /// Standardized coefficient size taken as evidence of separation.
    double separation_bound = 15.0;
    double fallback_ridge = 1e-8;
};

/// Bernoulli maximum likelihood by Newton steps with step halving on
/// standardized columns. `loglik`, when given, receives the log-likelihood
/// after every accepted step. Throws ContractError unless both classes occur.
LinearModel fit_logit(const DesignMatrix& x, std::span<const double> y, const LogitOptions& options = {},
                      std::vector<double>* loglik = nullptr);

/// Bernoulli log-likelihood and score (intercept first, then the columns) of
/// original-scale parameters.
double logit_loglik(const DesignMatrix& x, std::span<const double> y, std::span<const double> params);
std::vector<double> logit_score(const DesignMatrix& x, std::span<const double> y, std::span<const double> params);

/// Identity: intercept + coef'x. Logistic: 1 / (1 + exp(-eta)).
double predict_linear(const LinearModel& model, std::span<const double> row);
/// Same prediction computed from the standardized coefficients.
double predict_linear_standardized(const LinearModel& model, std::span<const double> row);

/// One coefficient per line (name, value, mean, sd and, for the logit, se z p),
/// the intercept last.
void write_linear(std::ostream& out, const LinearModel& model);
LinearModel read_linear(std::istream& in);

}  // namespace cctml
