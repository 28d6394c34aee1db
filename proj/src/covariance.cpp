#include "volterra/covariance.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "volterra/errors.hpp"

namespace volterra {

namespace {

void require_nonnegative(double value, const char* name)
{
    if (!(value >= 0.0) || !std::isfinite(value)) {
        throw std::invalid_argument(std::string("hyperparameter ") + name + " must be finite and >= 0, got " +
                                    std::to_string(value));
    }
}

/// table[d] = exp(-rate * d * scale) for d = 0..size-1
std::vector<double> exp_table(std::size_t size, double rate, double scale)
{
    std::vector<double> t(size);
    for (std::size_t d = 0; d < size; ++d) {
        t[d] = std::exp(-rate * static_cast<double>(d) * scale);
    }
    return t;
}

}  // namespace

std::array<double, HyperParams::count> HyperParams::to_array() const
{
    return {p0, c1, alpha1, beta1, c2, alphaV, betaV, alphaU, betaU, sigma2};
}

HyperParams HyperParams::from_array(const std::array<double, count>& v)
{
    return {v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8], v[9]};
}

void HyperParams::validate() const
{
    const auto values = to_array();
    for (std::size_t i = 0; i + 1 < count; ++i) {
        require_nonnegative(values[i], names[i].data());
    }
    if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) {
        throw std::invalid_argument("hyperparameter sigma2 must be finite and > 0, got " + std::to_string(sigma2));
    }
}

RotatedCoord rotated_coords(std::size_t tau1, std::size_t tau2)
{
    const auto t1 = static_cast<long>(tau1);
    const auto t2 = static_cast<long>(tau2);
    return {t1 + t2, t1 - t2};
}

Matrix dc_covariance(std::size_t n, double c, double alpha, double beta)
{
    if (n == 0) {
        throw std::invalid_argument("dc_covariance: memory must be positive");
    }
    require_nonnegative(c, "c");
    require_nonnegative(alpha, "alpha");
    require_nonnegative(beta, "beta");

    const auto smooth = exp_table(n, alpha, 1.0);
    const auto decay = exp_table(2 * n - 1, beta, 0.5);
    const auto ni = static_cast<Eigen::Index>(n);
    Matrix p(ni, ni);
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t i = j; i < n; ++i) {
            const double value = c * smooth[i - j] * decay[i + j];
            p(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = value;
            p(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = value;
        }
    }
    return p;
}

Matrix second_order_covariance(std::size_t n, const HyperParams& h)
{
    if (n == 0) {
        throw std::invalid_argument("second_order_covariance: memory must be positive");
    }
    require_nonnegative(h.c2, "c2");
    require_nonnegative(h.alphaV, "alphaV");
    require_nonnegative(h.betaV, "betaV");
    require_nonnegative(h.alphaU, "alphaU");
    require_nonnegative(h.betaU, "betaU");

    const TriangularIndexMap map(n);
    const std::size_t size = map.size();

    // |V| lies in [0, 2n-2] and |U| in [0, n-1] on integer lattices, so every
    // factor is a table lookup.
    std::vector<long> absV(size);
    std::vector<long> absU(size);
    for (std::size_t i = 0; i < size; ++i) {
        const auto [a, b] = map.pair(i);
        const RotatedCoord rc = rotated_coords(a, b);
        absV[i] = std::labs(rc.v);
        absU[i] = std::labs(rc.u);
    }
    const auto smoothV = exp_table(2 * n - 1, h.alphaV, 1.0);
    const auto decayV = exp_table(4 * n - 3, h.betaV, 0.5);
    const auto smoothU = exp_table(n, h.alphaU, 1.0);
    const auto decayU = exp_table(2 * n - 1, h.betaU, 0.5);

    const auto si = static_cast<Eigen::Index>(size);
    Matrix p(si, si);
    for (std::size_t j = 0; j < size; ++j) {
        const long vj = absV[j];
        const long uj = absU[j];
        for (std::size_t i = j; i < size; ++i) {
            const long vi = absV[i];
            const long ui = absU[i];
            const double pv = smoothV[static_cast<std::size_t>(std::labs(vi - vj))] *
                              decayV[static_cast<std::size_t>(vi + vj)];
            const double pu = smoothU[static_cast<std::size_t>(std::labs(ui - uj))] *
                              decayU[static_cast<std::size_t>(ui + uj)];
            const double value = h.c2 * pv * pu;
            p(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = value;
            p(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = value;
        }
    }
    return p;
}

Matrix BlockPrior::dense() const
{
    const auto n1 = p1.rows();
    const auto n2 = p2.rows();
    Matrix d = Matrix::Zero(1 + n1 + n2, 1 + n1 + n2);
    d(0, 0) = p0;
    d.block(1, 1, n1, n1) = p1;
    d.block(1 + n1, 1 + n1, n2, n2) = p2;
    return d;
}

BlockPrior assemble_prior(std::size_t n, const HyperParams& h)
{
    h.validate();
    return {h.p0, dc_covariance(n, h.c1, h.alpha1, h.beta1), second_order_covariance(n, h)};
}

EigenRange eigen_range(const Matrix& symmetric)
{
    Eigen::SelfAdjointEigenSolver<Matrix> solver(symmetric, Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success) {
        throw NumericalError("eigen_range: eigendecomposition did not converge");
    }
    const Vector& ev = solver.eigenvalues();
    return {ev.minCoeff(), ev.maxCoeff()};
}

bool is_psd(const Matrix& symmetric, double rel_tol)
{
    const EigenRange r = eigen_range(symmetric);
    return r.min >= -rel_tol * std::max(r.max, 0.0);
}

void require_psd(const Matrix& symmetric, std::string_view what, double rel_tol)
{
    if (symmetric.rows() != symmetric.cols() || symmetric != symmetric.transpose()) {
        throw NumericalError(std::string(what) + ": matrix is not exactly symmetric");
    }
    const EigenRange r = eigen_range(symmetric);
    if (r.min < -rel_tol * std::max(r.max, 0.0)) {
        std::ostringstream msg;
        msg << what << ": not positive semidefinite (min eig " << r.min << ", max eig " << r.max << ")";
        throw NumericalError(msg.str());
    }
}

}  // namespace volterra
