#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "volterra/core.hpp"
#include "volterra/covariance.hpp"

namespace volterra {

// Regularized least squares in the Bayesian form: theta ~ N(0, P), Y = phi^T theta + E,
// E ~ N(0, sigma2 I). Everything below works in the dual (data-space) form
// Sigma = phi^T P phi + sigma2 I, so P is never inverted and may be singular.
//
// Factorizations of Sigma that fail are retried with eps * trace(Sigma)/M added
// to the diagonal, eps = 1e-12, 1e-11, ..., 1e-6; after that a NumericalError is thrown.
//
// The dense-prior overloads and least_squares only look at phi and y, so they also
// serve plain linear regressions; the BlockPrior overloads need the Volterra layout.

/// Minimizer of |Y - phi^T theta|^2 + sigma2 theta^T P^-1 theta,
/// computed as P phi (phi^T P phi + sigma2 I)^-1 Y.
Vector regularized_ls(const RegressionProblem& problem, const Matrix& prior, double sigma2);
Vector regularized_ls(const RegressionProblem& problem, const BlockPrior& prior, double sigma2);

/// log N(Y; 0, phi^T P phi + sigma2 I).
double log_marginal_likelihood(const RegressionProblem& problem, const Matrix& prior, double sigma2);
double log_marginal_likelihood(const RegressionProblem& problem, const BlockPrior& prior, double sigma2);

/// P - P phi Sigma^-1 phi^T P.
Matrix posterior_covariance(const RegressionProblem& problem, const Matrix& prior, double sigma2);
Matrix posterior_covariance(const RegressionProblem& problem, const BlockPrior& prior, double sigma2);

/// Gradient of the log evidence with respect to log(h) for every entry of
/// HyperParams::names, via 0.5 tr((a a^T - Sigma^-1) dSigma).
std::array<double, HyperParams::count> log_marginal_likelihood_gradient(const RegressionProblem& problem,
                                                                        const HyperParams& hyper);

/// Unregularized (minimum-norm) least squares; the ML estimate when phi has full row rank.
Vector least_squares(const RegressionProblem& problem);

/// Box in log space for every hyperparameter, indexed like HyperParams::names.
struct HyperBounds {
    std::array<double, HyperParams::count> lo{};
    std::array<double, HyperParams::count> hi{};

    /// Scales (p0, c1, c2) in [1e-6, 1e3] * var_y, decay/smoothness in [1e-6, 1e3],
    /// sigma2 in [1e-8, 1] * var_y.
    static HyperBounds defaults(double var_y);

    void validate() const;
};

struct OptimizerOptions {
    std::size_t n_starts = 10;
    std::uint64_t seed = 0;
    std::size_t max_evaluations = 2000;  // per start
    double tolerance = 1e-6;             // simplex diameter in log space
    std::size_t threads = 1;
};

struct StartDiagnostics {
    std::size_t start = 0;
    std::size_t evaluations = 0;
    std::size_t iterations = 0;
    bool converged = false;
    double log_evidence = 0.0;
    std::array<double, HyperParams::count> initial{};
    std::string error;  // empty when the start produced a finite optimum
};

struct EstimationResult {
    Vector theta_hat;
    HyperParams hyper;
    double log_evidence = 0.0;

    // Diagnostics of the winning start plus the per-start log.
    std::size_t best_start = 0;
    std::size_t evaluations = 0;
    std::size_t iterations = 0;
    std::size_t restarts = 0;
    bool converged = false;
    std::vector<StartDiagnostics> starts;
};

/// Multi-start Nelder-Mead maximization of the log evidence over all ten
/// hyperparameters in log space. Start points are log-uniform in the bounds,
/// drawn from derive_seed(seed, {start}); the result is bit-identical for a
/// given seed regardless of `threads`.
EstimationResult optimize_hyperparameters(const RegressionProblem& problem, const HyperBounds& bounds,
                                          const OptimizerOptions& options);

/// Fixed-hyperparameter estimate packaged like an optimization result.
EstimationResult estimate_fixed(const RegressionProblem& problem, const HyperParams& hyper);

/// Population variance mean((x - mean(x))^2).
double variance(const Vector& x);

}  // namespace volterra
