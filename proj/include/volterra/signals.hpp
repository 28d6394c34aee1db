#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "volterra/core.hpp"
#include "volterra/filter.hpp"

namespace volterra {

/// Random-phase multisine on the DFT grid of its own length.
struct MultisineSpec {
    std::size_t n_samples = 0;
    std::optional<double> f_lo;  // cycles/sample; defaults to 1 / n_samples
    double f_hi = 0.4;
    std::uint64_t seed = 0;
    std::optional<RationalFilter> filter;

    double band_lo() const { return f_lo.value_or(1.0 / static_cast<double>(n_samples)); }
    void validate() const;
};

/// DFT bins k (1 <= k <= N/2) with band_lo <= k/N <= f_hi.
std::vector<std::size_t> excited_bins(const MultisineSpec& spec);

/// Sum of unit cosines at the excited bins with phases 2*pi*U_k, U_k the
/// k-th uniform of CounterRng(seed); optionally filtered (zero initial state),
/// then scaled to a sample mean square of exactly 1.
Vector random_phase_multisine(const MultisineSpec& spec);

struct NoisyOutput {
    Vector y;
    Vector e;
    double sigma2 = 0.0;
};

/// Adds i.i.d. N(0, sigma2) noise, sigma2 = variance(y0) / 10^(snr_db / 10),
/// e(k) = sqrt(sigma2) * CounterRng(seed).normal_at(k).
NoisyOutput add_noise_snr(const Vector& y0, double snr_db, std::uint64_t seed);

}  // namespace volterra
