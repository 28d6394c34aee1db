#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "volterra/core.hpp"
#include "volterra/covariance.hpp"
#include "volterra/estimation.hpp"
#include "volterra/filter.hpp"

namespace volterra {

/// Linear branch u -> g0 -> G1 in parallel with the Wiener-Hammerstein branch
/// u -> G2 -> (.)^2 -> G3; branch outputs are summed.
struct BlockSystem {
    double g0 = 2.0;
    RationalFilter g1;
    RationalFilter g2;
    RationalFilter g3;

    /// G0 = 2, G1 = 0.7568 q^-1 / (1 - 1.812 q^-1 + 0.8578 q^-2),
    /// G2 = 1.063 q^-1 / (1 - 1.706 q^-1 + 0.7491 q^-2), G3 = 1.5 G1.
    static BlockSystem reference();

    /// Every filter time-compressed by k (see RationalFilter::time_compressed).
    /// k = 4 shrinks the reference system's ~80-sample memory to ~20.
    BlockSystem time_compressed(unsigned k) const;

    bool operator==(const BlockSystem&) const = default;
};

/// Noiseless output over the full input length, zero initial state.
Vector simulate_benchmark(const BlockSystem& sys, const Vector& u);

/// Volterra kernels of the block system truncated at memory n:
/// h1(t) = g0 g1(t), h2(t1, t2) = sum_s g3(s) g2(t1 - s) g2(t2 - s), h0 = 0.
VolterraModel true_kernels(const BlockSystem& sys, std::size_t n);

/// rms(y_val - y_hat) / rms(y_val).
double err_val(const Vector& y_val, const Vector& y_hat);

struct MonteCarloConfig {
    std::size_t n = 20;
    std::vector<double> ratios{0.2, 0.4, 0.7, 1.0, 1.3};
    double snr_db = 20.0;
    std::size_t n_runs = 20;
    std::size_t n_val = 5000;
    std::uint64_t base_seed = 1;
    bool regularized = true;
    bool unregularized = true;

    // Excitation family shared by estimation and validation inputs.
    std::optional<double> band_lo;
    double band_hi = 0.4;
    std::optional<RationalFilter> input_filter;

    std::optional<HyperBounds> bounds;  // unset: HyperBounds::defaults(var(Y)) per run
    std::size_t n_starts = 10;
    std::size_t max_evaluations = 2000;
    double tolerance = 1e-6;

    std::size_t threads = 1;
    bool record_wall_time = false;  // off keeps tables byte-reproducible

    BlockSystem system = BlockSystem::reference();

    void validate() const;
};

struct McRow {
    double ratio = 0.0;
    std::size_t run = 0;
    std::string method;  // "regularized" or "ls"
    double err_val = 0.0;
    double log_evidence = 0.0;  // NaN for ls
    std::array<double, HyperParams::count> hyper{};  // NaN for ls
    double wall_time_s = 0.0;
    std::string status = "ok";
};

/// Estimation data length for a ratio N / n_theta.
std::size_t samples_for_ratio(double ratio, std::size_t n);

/// One row per (ratio, run, method), sorted by ratio index, run, then
/// regularized before ls. Failed runs produce rows with status "error: ...".
std::vector<McRow> monte_carlo(const MonteCarloConfig& config);

struct SummaryRow {
    double ratio = 0.0;
    std::string method;
    std::size_t n_ok = 0;
    std::size_t n_failed = 0;
    double min = 0.0;
    double q1 = 0.0;
    double median = 0.0;
    double q3 = 0.0;
    double max = 0.0;
};

/// Linear-interpolation quantile (type 7) of unsorted values.
double quantile(std::vector<double> values, double q);

/// Box-plot statistics of err_val per (ratio, method) over successful rows.
std::vector<SummaryRow> summarize(const std::vector<McRow>& rows);

}  // namespace volterra
