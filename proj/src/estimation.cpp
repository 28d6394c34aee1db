#include "volterra/estimation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <Eigen/Cholesky>
#include <Eigen/QR>

#include "volterra/errors.hpp"
#include "volterra/nelder_mead.hpp"
#include "volterra/random.hpp"

namespace volterra {

namespace {

constexpr double jitter_first = 1e-12;
constexpr double jitter_last = 1e-6;

/// Cholesky factor of Sigma = phi^T P phi + sigma2 I together with P phi.
struct DualFactor {
    Matrix p_phi;
    Eigen::LLT<Matrix> llt;
    double jitter = 0.0;
};

// Dense priors accept any linear-regression problem; block priors need the Volterra layout.
void check_inputs(const RegressionProblem& problem, std::size_t prior_size, double sigma2, bool structured = true)
{
    if (structured) {
        problem.validate();
    } else if (problem.y.size() != problem.phi.cols()) {
        throw std::invalid_argument("RegressionProblem: y and phi disagree in the number of rows");
    }
    if (prior_size != static_cast<std::size_t>(problem.phi.rows())) {
        throw std::invalid_argument("prior has size " + std::to_string(prior_size) + " but the problem has " +
                                    std::to_string(problem.phi.rows()) + " parameters");
    }
    if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) {
        throw std::invalid_argument("sigma2 must be finite and > 0");
    }
}

Matrix prior_times_phi(const RegressionProblem& problem, const Matrix& prior)
{
    if (prior.rows() != prior.cols()) {
        throw std::invalid_argument("prior must be square");
    }
    return prior * problem.phi;
}

Matrix prior_times_phi(const RegressionProblem& problem, const BlockPrior& prior)
{
    const auto n1 = static_cast<Eigen::Index>(problem.n_theta1);
    const auto n2 = static_cast<Eigen::Index>(problem.n_theta2);
    if (prior.p1.rows() != n1 || prior.p2.rows() != n2) {
        throw std::invalid_argument("block prior does not match the problem's block sizes");
    }
    Matrix out(problem.phi.rows(), problem.phi.cols());
    out.topRows(1) = prior.p0 * problem.phi0();
    out.middleRows(1, n1).noalias() = prior.p1 * problem.phi1();
    out.bottomRows(n2).noalias() = prior.p2 * problem.phi2();
    return out;
}

template <class Prior>
DualFactor factorize(const RegressionProblem& problem, const Prior& prior, double sigma2)
{
    DualFactor f;
    f.p_phi = prior_times_phi(problem, prior);

    const Eigen::Index m = problem.phi.cols();
    Matrix sigma = Matrix::Zero(m, m);
    sigma.triangularView<Eigen::Lower>() = problem.phi.transpose() * f.p_phi;
    sigma.diagonal().array() += sigma2;

    for (Eigen::Index j = 0; j < m; ++j) {
        if (!sigma.col(j).tail(m - j).allFinite()) {
            throw NumericalError("data covariance has non-finite entries");
        }
    }

    f.llt.compute(sigma);
    if (f.llt.info() == Eigen::Success) {
        return f;
    }
    const double scale = sigma.diagonal().sum() / static_cast<double>(m);
    for (double eps = jitter_first; eps <= jitter_last * 1.0001; eps *= 10.0) {
        Matrix jittered = sigma;
        jittered.diagonal().array() += eps * scale;
        f.llt.compute(jittered);
        if (f.llt.info() == Eigen::Success) {
            f.jitter = eps * scale;
            return f;
        }
    }
    std::ostringstream msg;
    msg << "Cholesky factorization of the " << m << "x" << m << " data covariance failed after jitter up to "
        << jitter_last * scale << " (trace/M = " << scale << ", sigma2 = " << sigma2 << ")";
    throw NumericalError(msg.str());
}

double log_density(const DualFactor& f, const Vector& y)
{
    const Vector white = f.llt.matrixL().solve(y);
    const double log_det_half = f.llt.matrixLLT().diagonal().array().log().sum();
    const auto m = static_cast<double>(y.size());
    return -0.5 * white.squaredNorm() - log_det_half - 0.5 * m * std::log(2.0 * std::numbers::pi);
}

Matrix posterior_from(const DualFactor& f, Matrix prior)
{
    const Matrix w = f.llt.matrixL().solve(f.p_phi.transpose());
    prior.noalias() -= w.transpose() * w;
    return 0.5 * (prior + prior.transpose());
}

}  // namespace

double variance(const Vector& x)
{
    if (x.size() == 0) {
        throw std::invalid_argument("variance of an empty sequence");
    }
    const double mean = x.mean();
    return (x.array() - mean).square().mean();
}

Vector regularized_ls(const RegressionProblem& problem, const Matrix& prior, double sigma2)
{
    check_inputs(problem, static_cast<std::size_t>(prior.rows()), sigma2, false);
    const DualFactor f = factorize(problem, prior, sigma2);
    return f.p_phi * f.llt.solve(problem.y);
}

Vector regularized_ls(const RegressionProblem& problem, const BlockPrior& prior, double sigma2)
{
    check_inputs(problem, prior.size(), sigma2);
    const DualFactor f = factorize(problem, prior, sigma2);
    return f.p_phi * f.llt.solve(problem.y);
}

double log_marginal_likelihood(const RegressionProblem& problem, const Matrix& prior, double sigma2)
{
    check_inputs(problem, static_cast<std::size_t>(prior.rows()), sigma2, false);
    return log_density(factorize(problem, prior, sigma2), problem.y);
}

double log_marginal_likelihood(const RegressionProblem& problem, const BlockPrior& prior, double sigma2)
{
    check_inputs(problem, prior.size(), sigma2);
    return log_density(factorize(problem, prior, sigma2), problem.y);
}

Matrix posterior_covariance(const RegressionProblem& problem, const Matrix& prior, double sigma2)
{
    check_inputs(problem, static_cast<std::size_t>(prior.rows()), sigma2, false);
    return posterior_from(factorize(problem, prior, sigma2), prior);
}

Matrix posterior_covariance(const RegressionProblem& problem, const BlockPrior& prior, double sigma2)
{
    check_inputs(problem, prior.size(), sigma2);
    return posterior_from(factorize(problem, prior, sigma2), prior.dense());
}

std::array<double, HyperParams::count> log_marginal_likelihood_gradient(const RegressionProblem& problem,
                                                                        const HyperParams& h)
{
    const BlockPrior prior = assemble_prior(problem.memory, h);
    check_inputs(problem, prior.size(), h.sigma2);
    const DualFactor f = factorize(problem, prior, h.sigma2);

    const Eigen::Index m = problem.phi.cols();
    const Vector a = f.llt.solve(problem.y);
    const Matrix sigma_inv = f.llt.solve(Matrix::Identity(m, m));
    // dL/dtheta_k = 0.5 tr(Q dSigma_k), Q = a a^T - Sigma^-1, dSigma_k = phi^T dP_k phi
    const Vector phi_a = problem.phi * a;
    const Matrix b = phi_a * phi_a.transpose() - problem.phi * sigma_inv * problem.phi.transpose();

    std::array<double, HyperParams::count> g{};
    g[0] = 0.5 * b(0, 0) * h.p0;

    const auto n = problem.memory;
    const auto n1 = static_cast<Eigen::Index>(n);
    const auto b1 = b.block(1, 1, n1, n1);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const double w = 0.5 * b1(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) *
                             prior.p1(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
            const double di = static_cast<double>(i);
            const double dj = static_cast<double>(j);
            g[1] += w;
            g[2] += -h.alpha1 * std::abs(di - dj) * w;
            g[3] += -h.beta1 * 0.5 * (di + dj) * w;
        }
    }

    const TriangularIndexMap map(n);
    const auto n2 = static_cast<Eigen::Index>(map.size());
    const auto b2 = b.block(1 + n1, 1 + n1, n2, n2);
    std::vector<double> absV(map.size());
    std::vector<double> absU(map.size());
    for (std::size_t i = 0; i < map.size(); ++i) {
        const auto [ta, tb] = map.pair(i);
        const RotatedCoord rc = rotated_coords(ta, tb);
        absV[i] = static_cast<double>(std::labs(rc.v));
        absU[i] = static_cast<double>(std::labs(rc.u));
    }
    for (Eigen::Index i = 0; i < n2; ++i) {
        for (Eigen::Index j = 0; j < n2; ++j) {
            const double w = 0.5 * b2(i, j) * prior.p2(i, j);
            const auto ui = static_cast<std::size_t>(i);
            const auto uj = static_cast<std::size_t>(j);
            g[4] += w;
            g[5] += -h.alphaV * std::abs(absV[ui] - absV[uj]) * w;
            g[6] += -h.betaV * 0.5 * (absV[ui] + absV[uj]) * w;
            g[7] += -h.alphaU * std::abs(absU[ui] - absU[uj]) * w;
            g[8] += -h.betaU * 0.5 * (absU[ui] + absU[uj]) * w;
        }
    }
    g[9] = 0.5 * h.sigma2 * (a.squaredNorm() - sigma_inv.trace());
    return g;
}

Vector least_squares(const RegressionProblem& problem)
{
    if (problem.y.size() != problem.phi.cols()) {
        throw std::invalid_argument("least_squares: y and phi disagree in the number of rows");
    }
    const Matrix design = problem.phi.transpose();
    return design.completeOrthogonalDecomposition().solve(problem.y);
}

HyperBounds HyperBounds::defaults(double var_y)
{
    if (!(var_y > 0.0) || !std::isfinite(var_y)) {
        throw std::invalid_argument("HyperBounds::defaults: output variance must be positive");
    }
    HyperBounds b;
    for (std::size_t i = 0; i < HyperParams::count; ++i) {
        b.lo[i] = 1e-6;
        b.hi[i] = 1e3;
    }
    for (const std::size_t scale : {0, 1, 4}) {
        b.lo[scale] *= var_y;
        b.hi[scale] *= var_y;
    }
    b.lo[9] = 1e-8 * var_y;
    b.hi[9] = var_y;
    return b;
}

void HyperBounds::validate() const
{
    for (std::size_t i = 0; i < HyperParams::count; ++i) {
        if (!(lo[i] > 0.0) || !(hi[i] >= lo[i]) || !std::isfinite(hi[i])) {
            throw std::invalid_argument("HyperBounds: invalid interval for " + std::string(HyperParams::names[i]));
        }
    }
}

EstimationResult estimate_fixed(const RegressionProblem& problem, const HyperParams& hyper)
{
    const BlockPrior prior = assemble_prior(problem.memory, hyper);
    check_inputs(problem, prior.size(), hyper.sigma2);
    const DualFactor f = factorize(problem, prior, hyper.sigma2);

    EstimationResult r;
    r.theta_hat = f.p_phi * f.llt.solve(problem.y);
    r.hyper = hyper;
    r.log_evidence = log_density(f, problem.y);
    r.converged = true;
    return r;
}

EstimationResult optimize_hyperparameters(const RegressionProblem& problem, const HyperBounds& bounds,
                                          const OptimizerOptions& options)
{
    problem.validate();
    bounds.validate();
    if (options.n_starts == 0) {
        throw std::invalid_argument("optimize_hyperparameters: n_starts must be >= 1");
    }
    constexpr auto dim = static_cast<Eigen::Index>(HyperParams::count);
    Vector lo(dim);
    Vector hi(dim);
    for (Eigen::Index i = 0; i < dim; ++i) {
        lo(i) = std::log(bounds.lo[static_cast<std::size_t>(i)]);
        hi(i) = std::log(bounds.hi[static_cast<std::size_t>(i)]);
    }

    auto to_hyper = [](const Vector& x) {
        std::array<double, HyperParams::count> v{};
        for (std::size_t i = 0; i < v.size(); ++i) {
            v[i] = std::exp(x(static_cast<Eigen::Index>(i)));
        }
        return HyperParams::from_array(v);
    };
    auto negative_evidence = [&](const Vector& x) {
        try {
            const HyperParams h = to_hyper(x);
            return -log_marginal_likelihood(problem, assemble_prior(problem.memory, h), h.sigma2);
        } catch (const NumericalError&) {
            return std::numeric_limits<double>::infinity();
        }
    };

    NelderMeadOptions nm;
    nm.max_evaluations = options.max_evaluations;
    nm.tolerance = options.tolerance;

    std::vector<StartDiagnostics> diag(options.n_starts);
    std::vector<Vector> optima(options.n_starts);
    auto run_start = [&](std::size_t s) {
        CounterRng rng(derive_seed(options.seed, {s}));
        Vector x0(dim);
        for (Eigen::Index i = 0; i < dim; ++i) {
            x0(i) = rng.uniform(lo(i), hi(i));
            diag[s].initial[static_cast<std::size_t>(i)] = std::exp(x0(i));
        }
        diag[s].start = s;
        try {
            const NelderMeadResult r = nelder_mead(negative_evidence, x0, lo, hi, nm);
            diag[s].evaluations = r.evaluations;
            diag[s].iterations = r.iterations;
            diag[s].converged = r.converged;
            diag[s].log_evidence = -r.value;
            optima[s] = r.x;
            if (!std::isfinite(r.value)) {
                diag[s].error = "no finite evidence value reached";
            }
        } catch (const std::exception& e) {
            diag[s].error = e.what();
        }
    };

    const std::size_t workers = std::max<std::size_t>(1, std::min(options.threads, options.n_starts));
    if (workers == 1) {
        for (std::size_t s = 0; s < options.n_starts; ++s) {
            run_start(s);
        }
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t s = next++; s < options.n_starts; s = next++) {
                    run_start(s);
                }
            });
        }
    }

    std::size_t best = options.n_starts;
    for (std::size_t s = 0; s < options.n_starts; ++s) {
        if (diag[s].error.empty() && (best == options.n_starts || diag[s].log_evidence > diag[best].log_evidence)) {
            best = s;
        }
    }
    if (best == options.n_starts) {
        std::ostringstream msg;
        msg << "hyperparameter optimization failed in all " << options.n_starts << " starts:";
        for (const auto& d : diag) {
            msg << "\n  start " << d.start << ": " << d.error;
        }
        throw NumericalError(msg.str());
    }

    EstimationResult result = estimate_fixed(problem, to_hyper(optima[best]));
    result.best_start = best;
    result.evaluations = diag[best].evaluations;
    result.iterations = diag[best].iterations;
    result.converged = diag[best].converged;
    result.restarts = options.n_starts;
    result.starts = std::move(diag);
    return result;
}

}  // namespace volterra
