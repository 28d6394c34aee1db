#include "volterra/core.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>
#include <string>

namespace volterra {

std::uint64_t coefficient_count(unsigned m, std::uint64_t n)
{
    if (m == 0 || n == 0) {
        throw std::invalid_argument("coefficient_count: order and memory must be positive");
    }
    constexpr auto max64 = std::numeric_limits<std::uint64_t>::max();
    // After step i the accumulator holds C(n+i, i+1), so every division is exact.
    unsigned __int128 acc = 1;
    for (unsigned i = 0; i < m; ++i) {
        if (n > max64 - i) {
            throw std::overflow_error("coefficient_count: memory + order overflows 64 bits");
        }
        acc = acc * (n + i) / (i + 1);
        if (acc > max64) {
            throw std::overflow_error("coefficient_count: result exceeds 64 bits (m=" + std::to_string(m) +
                                      ", n=" + std::to_string(n) + ")");
        }
    }
    return static_cast<std::uint64_t>(acc);
}

std::size_t triangular_index(std::size_t tau1, std::size_t tau2, std::size_t n)
{
    if (tau1 >= n || tau2 >= n) {
        throw std::invalid_argument("triangular_index: lag (" + std::to_string(tau1) + ", " + std::to_string(tau2) +
                                    ") out of range for memory " + std::to_string(n));
    }
    const std::size_t a = std::min(tau1, tau2);
    const std::size_t b = std::max(tau1, tau2);
    // a*n - a(a-1)/2 written to stay in unsigned arithmetic for a = 0
    return a * n - (a * (a + 1)) / 2 + a + (b - a);
}

TriangularIndexMap::TriangularIndexMap(std::size_t n) : n_(n)
{
    if (n == 0) {
        throw std::invalid_argument("TriangularIndexMap: memory must be positive");
    }
}

std::pair<std::size_t, std::size_t> TriangularIndexMap::pair(std::size_t flat) const
{
    if (flat >= size()) {
        throw std::invalid_argument("TriangularIndexMap: flat index out of range");
    }
    // Row a holds n - a entries.
    std::size_t a = 0;
    std::size_t start = 0;
    while (start + (n_ - a) <= flat) {
        start += n_ - a;
        ++a;
    }
    return {a, a + (flat - start)};
}

VolterraModel::VolterraModel(double h0, Vector h1, Vector h2) : h0_(h0), h1_(std::move(h1)), h2_(std::move(h2))
{
    const auto n = static_cast<std::size_t>(h1_.size());
    if (n == 0) {
        throw std::invalid_argument("VolterraModel: memory must be positive");
    }
    if (static_cast<std::size_t>(h2_.size()) != n * (n + 1) / 2) {
        throw std::invalid_argument("VolterraModel: h2 must hold n(n+1)/2 = " + std::to_string(n * (n + 1) / 2) +
                                    " coefficients, got " + std::to_string(h2_.size()));
    }
}

VolterraModel VolterraModel::zeros(std::size_t n)
{
    const auto ni = static_cast<Eigen::Index>(n);
    return {0.0, Vector::Zero(ni), Vector::Zero(ni * (ni + 1) / 2)};
}

VolterraModel VolterraModel::from_theta(const Vector& theta, std::size_t n)
{
    const auto ni = static_cast<Eigen::Index>(n);
    const Eigen::Index n2 = ni * (ni + 1) / 2;
    if (theta.size() != 1 + ni + n2) {
        throw std::invalid_argument("VolterraModel::from_theta: expected " + std::to_string(1 + ni + n2) +
                                    " parameters, got " + std::to_string(theta.size()));
    }
    return {theta(0), theta.segment(1, ni), theta.tail(n2)};
}

Vector VolterraModel::theta() const
{
    Vector t(1 + h1_.size() + h2_.size());
    t << h0_, h1_, h2_;
    return t;
}

Matrix VolterraModel::h2_dense() const
{
    const std::size_t n = memory();
    Matrix dense(n, n);
    std::size_t flat = 0;
    for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t b = a; b < n; ++b, ++flat) {
            dense(a, b) = h2_(flat);
            dense(b, a) = h2_(flat);
        }
    }
    return dense;
}

Vector VolterraModel::h2_flat(const Matrix& dense)
{
    if (dense.rows() != dense.cols() || dense.rows() == 0) {
        throw std::invalid_argument("VolterraModel::h2_flat: expected a non-empty square kernel");
    }
    const auto n = static_cast<std::size_t>(dense.rows());
    Vector flat(n * (n + 1) / 2);
    std::size_t i = 0;
    for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t b = a; b < n; ++b) {
            flat(i++) = dense(a, b);
        }
    }
    return flat;
}

void RegressionProblem::validate() const
{
    if (n_theta0 != 1 || n_theta1 != memory || n_theta2 != memory * (memory + 1) / 2) {
        throw std::invalid_argument("RegressionProblem: inconsistent block sizes");
    }
    if (static_cast<std::size_t>(phi.rows()) != n_theta()) {
        throw std::invalid_argument("RegressionProblem: phi has " + std::to_string(phi.rows()) + " rows, expected " +
                                    std::to_string(n_theta()));
    }
    if (y.size() != phi.cols()) {
        throw std::invalid_argument("RegressionProblem: y has " + std::to_string(y.size()) + " entries but phi has " +
                                    std::to_string(phi.cols()) + " columns");
    }
}

RegressionProblem build_regressor(const Vector& u, std::size_t n1, std::size_t n2)
{
    if (n1 != n2) {
        throw std::invalid_argument("build_regressor: only n1 == n2 is supported");
    }
    const std::size_t n = n1;
    if (n == 0) {
        throw std::invalid_argument("build_regressor: memory must be positive");
    }
    const auto N = static_cast<std::size_t>(u.size());
    if (N < n) {
        throw std::invalid_argument("insufficient data for one regression row (N=" + std::to_string(N) +
                                    ", n=" + std::to_string(n) + ")");
    }

    RegressionProblem p;
    p.memory = n;
    p.n_theta1 = n;
    p.n_theta2 = n * (n + 1) / 2;
    const std::size_t rows = N - n + 1;
    p.phi.resize(static_cast<Eigen::Index>(p.n_theta()), static_cast<Eigen::Index>(rows));

    for (std::size_t col = 0; col < rows; ++col) {
        const std::size_t k = col + n - 1;
        auto c = p.phi.col(static_cast<Eigen::Index>(col));
        c(0) = 1.0;
        for (std::size_t tau = 0; tau < n; ++tau) {
            c(1 + tau) = u(k - tau);
        }
        Eigen::Index r = 1 + static_cast<Eigen::Index>(n);
        for (std::size_t a = 0; a < n; ++a) {
            const double ua = u(k - a);
            c(r++) = ua * ua;
            for (std::size_t b = a + 1; b < n; ++b) {
                c(r++) = 2.0 * ua * u(k - b);
            }
        }
    }
    p.y = Vector::Zero(static_cast<Eigen::Index>(rows));
    return p;
}

RegressionProblem build_problem(const Vector& u, const Vector& y_full, std::size_t n)
{
    if (y_full.size() != u.size()) {
        throw std::invalid_argument("build_problem: u and y must have equal length");
    }
    RegressionProblem p = build_regressor(u, n, n);
    p.y = y_full.tail(p.phi.cols());
    return p;
}

Vector simulate(const VolterraModel& model, const Vector& u)
{
    const std::size_t n = model.memory();
    const auto N = static_cast<std::size_t>(u.size());
    if (n == 0) {
        throw std::invalid_argument("simulate: empty model");
    }
    if (N < n) {
        throw std::invalid_argument("simulate: input of length " + std::to_string(N) + " is shorter than memory " +
                                    std::to_string(n));
    }
    const Matrix h2 = model.h2_dense();
    const Vector& h1 = model.h1();
    const auto ni = static_cast<Eigen::Index>(n);

    Vector y(static_cast<Eigen::Index>(N - n + 1));
    Vector window(ni);
    for (std::size_t k = n - 1; k < N; ++k) {
        for (std::size_t tau = 0; tau < n; ++tau) {
            window(static_cast<Eigen::Index>(tau)) = u(k - tau);
        }
        y(static_cast<Eigen::Index>(k - n + 1)) = model.h0() + h1.dot(window) + window.dot(h2 * window);
    }
    return y;
}

}  // namespace volterra
