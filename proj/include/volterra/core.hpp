#pragma once

#include <cstddef>
#include <cstdint>
#include <utility>

#include <Eigen/Core>

namespace volterra {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Number of unique coefficients of a symmetric order-m kernel with memory n,
/// i.e. the number of multisets of size m drawn from n lags.
/// Throws std::overflow_error instead of wrapping.
std::uint64_t coefficient_count(unsigned m, std::uint64_t n);

/// Flat index of the unordered lag pair {tau1, tau2} for memory n.
/// Pairs (a, b) with a <= b are enumerated lexicographically.
std::size_t triangular_index(std::size_t tau1, std::size_t tau2, std::size_t n);

/// Bijection between symmetric lag pairs and flat coefficient positions.
class TriangularIndexMap {
public:
    explicit TriangularIndexMap(std::size_t n);

    std::size_t memory() const { return n_; }
    std::size_t size() const { return n_ * (n_ + 1) / 2; }

    std::size_t index(std::size_t tau1, std::size_t tau2) const { return triangular_index(tau1, tau2, n_); }

    /// Normalized pair (a, b), a <= b, stored at `flat`.
    std::pair<std::size_t, std::size_t> pair(std::size_t flat) const;

private:
    std::size_t n_;
};

/// Truncated Volterra series of order 2 with n1 = n2 = n.
class VolterraModel {
public:
    VolterraModel() = default;
    VolterraModel(double h0, Vector h1, Vector h2);

    /// Zero model of memory n.
    static VolterraModel zeros(std::size_t n);

    /// Splits a stacked parameter vector [h0; h1; h2].
    static VolterraModel from_theta(const Vector& theta, std::size_t n);

    double h0() const { return h0_; }
    const Vector& h1() const { return h1_; }
    const Vector& h2() const { return h2_; }
    std::size_t memory() const { return static_cast<std::size_t>(h1_.size()); }

    double& h0() { return h0_; }
    Vector& h1() { return h1_; }
    Vector& h2() { return h2_; }

    /// Stacked parameter vector [h0; h1; h2], the layout used by the regressor.
    Vector theta() const;

    /// Dense n x n kernel, exactly symmetric.
    Matrix h2_dense() const;

    /// Inverse of h2_dense(); reads the upper triangle.
    static Vector h2_flat(const Matrix& dense);

private:
    double h0_ = 0.0;
    Vector h1_;
    Vector h2_;
};

/// Linear-in-the-parameters form Y = phi^T theta + E.
struct RegressionProblem {
    Matrix phi;  // n_theta x M, rows [1; first order; second order]
    Vector y;    // M
    std::size_t memory = 0;
    std::size_t n_theta0 = 1;
    std::size_t n_theta1 = 0;
    std::size_t n_theta2 = 0;

    std::size_t n_theta() const { return n_theta0 + n_theta1 + n_theta2; }
    std::size_t rows() const { return static_cast<std::size_t>(phi.cols()); }

    auto phi0() const { return phi.topRows(1); }
    auto phi1() const { return phi.middleRows(1, static_cast<Eigen::Index>(n_theta1)); }
    auto phi2() const { return phi.bottomRows(static_cast<Eigen::Index>(n_theta2)); }

    /// Throws std::invalid_argument when the block sizes, phi and y disagree.
    void validate() const;
};

/// Regressor for inputs u(0..N-1), one column per k = n-1..N-1.
/// Off-diagonal second-order entries carry weight 2 so that phi2^T h2
/// reproduces the full symmetric double sum. The caller attaches y.
RegressionProblem build_regressor(const Vector& u, std::size_t n1, std::size_t n2);

/// Convenience overload: attaches y(n-1..N-1) taken from a full-length output.
RegressionProblem build_problem(const Vector& u, const Vector& y_full, std::size_t n);

/// Model output for k = n-1..N-1 (length N-n+1).
Vector simulate(const VolterraModel& model, const Vector& u);

}  // namespace volterra
