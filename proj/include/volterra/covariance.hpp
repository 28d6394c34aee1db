#pragma once

#include <array>
#include <cstddef>
#include <string_view>

#include "volterra/core.hpp"

namespace volterra {

/// Prior and noise hyperparameters for a kernel of orders 0..2.
///
/// First order uses the DC structure (scale c1, smoothness alpha1, decay beta1).
/// Second order uses the same structure along the diagonal (V) and
/// anti-diagonal (U) lag directions.
struct HyperParams {
    double p0 = 1.0;
    double c1 = 1.0;
    double alpha1 = 0.1;
    double beta1 = 0.1;
    double c2 = 1.0;
    double alphaV = 0.1;
    double betaV = 0.1;
    double alphaU = 0.1;
    double betaU = 0.1;
    double sigma2 = 1.0;

    static constexpr std::size_t count = 10;
    static constexpr std::array<std::string_view, count> names = {
        "p0", "c1", "alpha1", "beta1", "c2", "alphaV", "betaV", "alphaU", "betaU", "sigma2"};

    std::array<double, count> to_array() const;
    static HyperParams from_array(const std::array<double, count>& values);

    /// Throws std::invalid_argument on negative or non-finite entries or sigma2 <= 0.
    void validate() const;
};

/// Lag pair (tau1, tau2) in the 45-degree rotated frame, unnormalized:
/// v runs along the main diagonal, u across it.
struct RotatedCoord {
    long v = 0;
    long u = 0;
};

RotatedCoord rotated_coords(std::size_t tau1, std::size_t tau2);

/// c * exp(-alpha |i - j|) * exp(-beta (i + j) / 2) over lags 0..n-1.
Matrix dc_covariance(std::size_t n, double c, double alpha, double beta);

/// Second-order prior over the n(n+1)/2 unique coefficients, flat indices as in TriangularIndexMap.
Matrix second_order_covariance(std::size_t n, const HyperParams& h);

/// Block-diagonal prior blockdiag(p0, P1, P2). Kept in block form because the
/// solvers only ever need P * phi blockwise.
struct BlockPrior {
    double p0 = 0.0;
    Matrix p1;
    Matrix p2;

    std::size_t size() const { return static_cast<std::size_t>(1 + p1.rows() + p2.rows()); }
    Matrix dense() const;
};

BlockPrior assemble_prior(std::size_t n, const HyperParams& h);

/// Smallest and largest eigenvalue of a symmetric matrix.
struct EigenRange {
    double min = 0.0;
    double max = 0.0;
};

EigenRange eigen_range(const Matrix& symmetric);

/// True when min eig >= -rel_tol * max eig.
bool is_psd(const Matrix& symmetric, double rel_tol = 1e-10);

/// Throws NumericalError when the matrix is not symmetric or fails is_psd.
void require_psd(const Matrix& symmetric, std::string_view what, double rel_tol = 1e-10);

}  // namespace volterra
