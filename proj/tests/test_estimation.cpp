#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "oracles.hpp"
#include "volterra/core.hpp"
#include "volterra/covariance.hpp"
#include "volterra/errors.hpp"
#include "volterra/estimation.hpp"
#include "volterra/random.hpp"

using namespace volterra;

namespace {

double rel_err(const Vector& a, const Vector& b)
{
    return (a - b).norm() / std::max(b.norm(), 1e-300);
}

// Generic problem with arbitrary phi: every row is treated as one block so that
// the dense-prior overloads can be exercised without a Volterra structure.
RegressionProblem raw_problem(const Matrix& phi, const Vector& y)
{
    RegressionProblem p;
    p.phi = phi;
    p.y = y;
    p.memory = 0;
    p.n_theta0 = 1;
    p.n_theta1 = static_cast<std::size_t>(phi.rows()) - 1;
    p.n_theta2 = 0;
    return p;
}

HyperParams random_hyper(std::mt19937_64& gen)
{
    std::uniform_real_distribution<double> ud(std::log(0.05), std::log(2.0));
    std::array<double, HyperParams::count> v{};
    for (double& x : v) {
        x = std::exp(ud(gen));
    }
    return HyperParams::from_array(v);
}

RegressionProblem random_volterra_problem(std::size_t n, std::size_t N, std::mt19937_64& gen)
{
    const Vector u = oracle::random_vector(static_cast<Eigen::Index>(N), gen);
    const Vector y = oracle::random_vector(static_cast<Eigen::Index>(N), gen);
    return build_problem(u, y, n);
}

}  // namespace

TEST_CASE("regularized_ls: huge isotropic prior recovers ordinary least squares")
{
    std::mt19937_64 gen(41);
    const Matrix phi = oracle::random_matrix(6, 40, gen);
    const Vector y = oracle::random_vector(40, gen);
    const auto p = raw_problem(phi, y);
    const Vector ls = (phi * phi.transpose()).ldlt().solve(phi * y);
    // the bias shrinks like 1 / kappa while the dual solve loses accuracy like kappa
    const Vector reg = regularized_ls(p, Matrix(1e6 * Matrix::Identity(6, 6)), 1.0);
    CHECK(rel_err(reg, ls) < 1e-6);
    CHECK(rel_err(least_squares(p), ls) < 1e-10);
}

TEST_CASE("regularized_ls: zero output gives exactly zero")
{
    std::mt19937_64 gen(43);
    const auto p = raw_problem(oracle::random_matrix(5, 9, gen), Vector::Zero(9));
    const Vector theta = regularized_ls(p, oracle::random_spd(5, gen), 0.3);
    CHECK(theta == Vector::Zero(5));
}

TEST_CASE("regularized_ls: underdetermined 12-parameter problem matches the primal formula")
{
    std::mt19937_64 gen(47);
    for (int trial = 0; trial < 10; ++trial) {
        const Matrix phi = oracle::random_matrix(12, 8, gen);
        const Vector y = oracle::random_vector(8, gen);
        const Matrix P = oracle::random_spd(12, gen);
        const double s2 = 0.5;
        const Vector dual = regularized_ls(raw_problem(phi, y), P, s2);
        CHECK(rel_err(dual, oracle::primal_solution(phi, y, P, s2)) < 1e-8);
    }
}

TEST_CASE("regularized_ls: block and dense priors agree on Volterra problems")
{
    std::mt19937_64 gen(53);
    for (int trial = 0; trial < 10; ++trial) {
        const auto p = random_volterra_problem(4, 20 + 5 * static_cast<std::size_t>(trial), gen);
        const HyperParams h = random_hyper(gen);
        const BlockPrior bp = assemble_prior(4, h);
        CHECK(rel_err(regularized_ls(p, bp, h.sigma2), regularized_ls(p, bp.dense(), h.sigma2)) < 1e-12);
        CHECK(std::abs(log_marginal_likelihood(p, bp, h.sigma2) - log_marginal_likelihood(p, bp.dense(), h.sigma2)) <
              1e-9);
    }
}

TEST_CASE("regularized_ls: argument checks")
{
    std::mt19937_64 gen(59);
    const auto p = raw_problem(oracle::random_matrix(4, 6, gen), oracle::random_vector(6, gen));
    CHECK_THROWS_AS(regularized_ls(p, Matrix::Identity(3, 3), 1.0), std::invalid_argument);
    CHECK_THROWS_AS(regularized_ls(p, Matrix::Identity(4, 4), 0.0), std::invalid_argument);
    CHECK_THROWS_AS(regularized_ls(p, Matrix::Identity(4, 4), -1.0), std::invalid_argument);
}

TEST_CASE("regularized_ls: non-finite data is a numerical error")
{
    std::mt19937_64 gen(61);
    Matrix phi = oracle::random_matrix(4, 6, gen);
    phi(2, 3) = std::nan("");
    CHECK_THROWS_AS(regularized_ls(raw_problem(phi, oracle::random_vector(6, gen)), Matrix::Identity(4, 4), 1.0),
                    NumericalError);
}

TEST_CASE("regularized_ls: singular prior with vanishing noise still solves via jitter")
{
    std::mt19937_64 gen(67);
    const Matrix phi = oracle::random_matrix(6, 10, gen);
    const Vector y = oracle::random_vector(10, gen);
    Matrix P = Matrix::Zero(6, 6);
    P.topLeftCorner(2, 2) = Matrix::Identity(2, 2);  // rank 2 prior, data covariance rank 2 of 10
    const Vector theta = regularized_ls(raw_problem(phi, y), P, 1e-300);
    CHECK(theta.allFinite());
    CHECK(theta.tail(4).isZero(0.0));
}

TEST_CASE("log_marginal_likelihood: zero prior is an i.i.d. Gaussian density")
{
    std::mt19937_64 gen(71);
    const Matrix phi = oracle::random_matrix(5, 20, gen);
    const Vector y = oracle::random_vector(20, gen);
    const double s2 = 0.7;
    const double expected = -0.5 * y.squaredNorm() / s2 - 10.0 * std::log(2.0 * std::numbers::pi * s2);
    CHECK(log_marginal_likelihood(raw_problem(phi, y), Matrix::Zero(5, 5), s2) ==
          doctest::Approx(expected).epsilon(1e-13));
}

TEST_CASE("log_marginal_likelihood: scalar closed form")
{
    const double p = 2.0;
    const double s = 0.5;
    const double y = 1.3;
    const auto prob = raw_problem(Matrix::Constant(1, 1, 1.0), Vector::Constant(1, y));
    const double expected = -0.5 * y * y / (p + s) - 0.5 * std::log(p + s) - 0.5 * std::log(2.0 * std::numbers::pi);
    CHECK(log_marginal_likelihood(prob, Matrix::Constant(1, 1, p), s) == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("log_marginal_likelihood: random 5 x 20 problems match a dense density")
{
    std::mt19937_64 gen(73);
    for (int trial = 0; trial < 10; ++trial) {
        const Matrix phi = oracle::random_matrix(5, 20, gen);
        const Vector y = oracle::random_vector(20, gen);
        const Matrix P = oracle::random_spd(5, gen);
        const double s2 = 0.4;
        const Matrix S = phi.transpose() * P * phi + s2 * Matrix::Identity(20, 20);
        CHECK(std::abs(log_marginal_likelihood(raw_problem(phi, y), P, s2) - oracle::mvn_log_density(y, S)) < 1e-9);
    }
}

TEST_CASE("log_marginal_likelihood_gradient: agrees with centered differences")
{
    std::mt19937_64 gen(79);
    const std::size_t n = 4;
    for (int trial = 0; trial < 10; ++trial) {
        const auto p = random_volterra_problem(n, 30, gen);
        const HyperParams h = random_hyper(gen);
        const auto grad = log_marginal_likelihood_gradient(p, h);
        const auto x = h.to_array();
        for (std::size_t k = 0; k < HyperParams::count; ++k) {
            auto eval = [&](double dlog) {
                auto xs = x;
                xs[k] = x[k] * std::exp(dlog);
                const HyperParams hs = HyperParams::from_array(xs);
                return log_marginal_likelihood(p, assemble_prior(n, hs), hs.sigma2);
            };
            const double step = 1e-5;
            const double fd = (eval(step) - eval(-step)) / (2.0 * step);
            CHECK(std::abs(grad[k] - fd) <= 1e-4 * std::max(std::abs(fd), 1e-3));
        }
    }
}

TEST_CASE("posterior_covariance: dense oracle, symmetry and limits")
{
    std::mt19937_64 gen(83);
    for (int trial = 0; trial < 5; ++trial) {
        const Matrix phi = oracle::random_matrix(6, 9, gen);
        const Matrix P = oracle::random_spd(6, gen);
        const auto prob = raw_problem(phi, oracle::random_vector(9, gen));
        const Matrix post = posterior_covariance(prob, P, 0.3);
        CHECK((post - oracle::posterior(phi, P, 0.3)).cwiseAbs().maxCoeff() < 1e-9);
        CHECK(post == post.transpose());
        CHECK(is_psd(post, 1e-9));

        const Matrix vague = posterior_covariance(prob, P, 1e12);
        CHECK((vague - P).cwiseAbs().maxCoeff() < 1e-6);
    }
}

TEST_CASE("posterior_covariance: directions without data keep their prior variance")
{
    std::mt19937_64 gen(89);
    Matrix phi = oracle::random_matrix(5, 12, gen);
    phi.row(3).setZero();
    const Vector d{{1.0, 2.0, 0.5, 3.0, 1.5}};
    const Matrix P = d.asDiagonal();
    const Matrix post = posterior_covariance(raw_problem(phi, oracle::random_vector(12, gen)), P, 0.2);
    CHECK(post(3, 3) == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(post(0, 0) < 1.0);
}

TEST_CASE("shrinking the kernel scales leaves only the constant term")
{
    std::mt19937_64 gen(97);
    const auto p = random_volterra_problem(3, 40, gen);
    HyperParams h = random_hyper(gen);
    h.c1 = 1e-14;
    h.c2 = 1e-14;
    const Vector theta = regularized_ls(p, assemble_prior(3, h), h.sigma2);
    // h0-only posterior mean: p0 1^T (p0 1 1^T + s2 I)^-1 y
    const double M = static_cast<double>(p.y.size());
    const double h0 = h.p0 * p.y.sum() / (h.p0 * M + h.sigma2);
    CHECK(theta(0) == doctest::Approx(h0).epsilon(1e-8));
    CHECK(theta.tail(theta.size() - 1).norm() < 1e-8);
}

TEST_CASE("vanishing noise on an overdetermined problem gives least squares")
{
    std::mt19937_64 gen(101);
    const auto p = random_volterra_problem(3, 80, gen);
    HyperParams h;
    h.p0 = h.c1 = h.c2 = 1.0;
    h.sigma2 = 1e-6;
    const Vector reg = regularized_ls(p, assemble_prior(3, h), h.sigma2);
    CHECK(rel_err(reg, least_squares(p)) < 1e-6);
}

TEST_CASE("scaling the output and all variances scales the estimate")
{
    std::mt19937_64 gen(103);
    const auto p = random_volterra_problem(4, 35, gen);
    const HyperParams h = random_hyper(gen);
    const double g = 3.7;
    RegressionProblem q = p;
    q.y *= g;
    HyperParams hg = h;
    hg.p0 *= g * g;
    hg.c1 *= g * g;
    hg.c2 *= g * g;
    hg.sigma2 *= g * g;
    const Vector a = regularized_ls(p, assemble_prior(4, h), h.sigma2);
    const Vector b = regularized_ls(q, assemble_prior(4, hg), hg.sigma2);
    CHECK(rel_err(b, g * a) < 1e-10);
}

TEST_CASE("least_squares: minimum-norm solution when underdetermined")
{
    std::mt19937_64 gen(107);
    const Matrix phi = oracle::random_matrix(10, 6, gen);
    const Vector y = oracle::random_vector(6, gen);
    const Vector expected = phi * (phi.transpose() * phi).inverse() * y;
    CHECK(rel_err(least_squares(raw_problem(phi, y)), expected) < 1e-10);
}

TEST_CASE("HyperBounds: defaults relative to the output variance")
{
    const HyperBounds b = HyperBounds::defaults(4.0);
    CHECK(b.lo[0] == doctest::Approx(4e-6));
    CHECK(b.hi[0] == doctest::Approx(4e3));
    CHECK(b.lo[2] == doctest::Approx(1e-6));
    CHECK(b.hi[2] == doctest::Approx(1e3));
    CHECK(b.lo[9] == doctest::Approx(4e-8));
    CHECK(b.hi[9] == doctest::Approx(4.0));
    CHECK_NOTHROW(b.validate());
    HyperBounds bad = b;
    bad.lo[3] = 0.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = b;
    bad.hi[5] = bad.lo[5] / 2;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    CHECK_THROWS_AS(HyperBounds::defaults(0.0), std::invalid_argument);
}

TEST_CASE("variance is the population variance")
{
    CHECK(variance(Vector{{1.0, 2.0, 3.0, 4.0}}) == doctest::Approx(1.25));
    CHECK_THROWS_AS(variance(Vector()), std::invalid_argument);
}

TEST_CASE("optimize_hyperparameters: deterministic, thread-count independent, consistent evidence")
{
    std::mt19937_64 gen(109);
    const auto p = random_volterra_problem(3, 60, gen);
    OptimizerOptions opt;
    opt.n_starts = 1;
    opt.seed = 5;
    opt.max_evaluations = 300;
    const HyperBounds bounds = HyperBounds::defaults(variance(p.y));
    const auto a = optimize_hyperparameters(p, bounds, opt);
    const auto b = optimize_hyperparameters(p, bounds, opt);
    CHECK(a.theta_hat == b.theta_hat);
    CHECK(a.hyper.to_array() == b.hyper.to_array());
    CHECK(a.log_evidence == b.log_evidence);

    opt.n_starts = 4;
    const auto serial = optimize_hyperparameters(p, bounds, opt);
    opt.threads = 3;
    const auto parallel = optimize_hyperparameters(p, bounds, opt);
    CHECK(serial.theta_hat == parallel.theta_hat);
    CHECK(serial.best_start == parallel.best_start);
    CHECK(serial.starts.size() == 4);

    CHECK(serial.theta_hat.allFinite());
    const double again = log_marginal_likelihood(p, assemble_prior(3, serial.hyper), serial.hyper.sigma2);
    CHECK(std::abs(again - serial.log_evidence) < 1e-9);
    for (const auto& s : serial.starts) {
        CHECK(s.log_evidence <= serial.log_evidence + 1e-9);
        CHECK(s.evaluations <= opt.max_evaluations + HyperParams::count + 2);
    }
    const auto arr = serial.hyper.to_array();
    for (std::size_t i = 0; i < HyperParams::count; ++i) {
        CHECK(arr[i] >= bounds.lo[i] * (1 - 1e-12));
        CHECK(arr[i] <= bounds.hi[i] * (1 + 1e-12));
    }
}

TEST_CASE("optimize_hyperparameters: every start failing is reported with diagnostics")
{
    std::mt19937_64 gen(113);
    auto p = random_volterra_problem(3, 30, gen);
    p.y(4) = std::nan("");
    OptimizerOptions opt;
    opt.n_starts = 2;
    opt.max_evaluations = 50;
    CHECK_THROWS_WITH_AS(optimize_hyperparameters(p, HyperBounds::defaults(1.0), opt),
                         doctest::Contains("start 1"), NumericalError);
    opt.n_starts = 0;
    CHECK_THROWS_AS(optimize_hyperparameters(p, HyperBounds::defaults(1.0), opt), std::invalid_argument);
}

TEST_CASE("optimize_hyperparameters: noise variance recovered from a prior draw")
{
    // theta drawn from the prior, 10 seeds; median ratio of estimated to true
    // noise variance must lie within a factor 2.
    const std::size_t n = 3;
    HyperParams truth;
    truth.p0 = 0.5;
    truth.c1 = 1.0;
    truth.alpha1 = 0.3;
    truth.beta1 = 0.4;
    truth.c2 = 0.5;
    truth.alphaV = 0.2;
    truth.betaV = 0.5;
    truth.alphaU = 0.3;
    truth.betaU = 0.6;
    truth.sigma2 = 0.05;
    const Matrix P = assemble_prior(n, truth).dense();
    const Eigen::LLT<Matrix> chol(P + 1e-12 * Matrix::Identity(P.rows(), P.cols()));

    std::vector<double> ratios;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        std::mt19937_64 gen(1000 + seed);
        const Vector theta = chol.matrixL() * oracle::random_vector(P.rows(), gen);
        const Vector u = oracle::random_vector(150, gen);
        auto prob = build_regressor(u, n, n);
        prob.y = prob.phi.transpose() * theta + std::sqrt(truth.sigma2) * oracle::random_vector(prob.phi.cols(), gen);

        OptimizerOptions opt;
        opt.n_starts = 2;
        opt.seed = seed;
        opt.max_evaluations = 800;
        const auto est = optimize_hyperparameters(prob, HyperBounds::defaults(variance(prob.y)), opt);
        ratios.push_back(est.hyper.sigma2 / truth.sigma2);
    }
    std::sort(ratios.begin(), ratios.end());
    const double median = 0.5 * (ratios[4] + ratios[5]);
    CHECK(median > 0.5);
    CHECK(median < 2.0);
}

TEST_CASE("estimate_fixed packages the regularized solution")
{
    std::mt19937_64 gen(127);
    const auto p = random_volterra_problem(3, 25, gen);
    const HyperParams h = random_hyper(gen);
    const auto r = estimate_fixed(p, h);
    CHECK(r.theta_hat == regularized_ls(p, assemble_prior(3, h), h.sigma2));
    CHECK(std::abs(r.log_evidence - log_marginal_likelihood(p, assemble_prior(3, h), h.sigma2)) < 1e-9);
}
