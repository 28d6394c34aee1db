#include "volterra/signals.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "volterra/estimation.hpp"
#include "volterra/random.hpp"

namespace volterra {

void MultisineSpec::validate() const
{
    if (n_samples < 2) {
        throw std::invalid_argument("multisine: n_samples must be >= 2");
    }
    const double lo = band_lo();
    if (!(lo > 0.0 && lo < f_hi && f_hi <= 0.5)) {
        throw std::invalid_argument("multisine: band must satisfy 0 < f_lo < f_hi <= 0.5 (got [" + std::to_string(lo) +
                                    ", " + std::to_string(f_hi) + "])");
    }
}

std::vector<std::size_t> excited_bins(const MultisineSpec& spec)
{
    spec.validate();
    const auto N = static_cast<double>(spec.n_samples);
    // Small slack so that band edges given as k/N select bin k.
    constexpr double slack = 1e-9;
    std::vector<std::size_t> bins;
    for (std::size_t k = 1; k <= spec.n_samples / 2; ++k) {
        const double f = static_cast<double>(k) / N;
        if (f >= spec.band_lo() - slack && f <= spec.f_hi + slack) {
            bins.push_back(k);
        }
    }
    return bins;
}

Vector random_phase_multisine(const MultisineSpec& spec)
{
    const auto bins = excited_bins(spec);
    if (bins.empty()) {
        throw std::invalid_argument("multisine: no DFT bin of a " + std::to_string(spec.n_samples) +
                                    "-sample grid falls inside the excited band");
    }
    const std::size_t N = spec.n_samples;
    const auto Ni = static_cast<Eigen::Index>(N);

    // cos(2 pi k t / N + phi) = cos(phi) C[(k t) mod N] - sin(phi) S[(k t) mod N],
    // which keeps the synthesis exactly N-periodic.
    Vector cos_table(Ni);
    Vector sin_table(Ni);
    for (std::size_t j = 0; j < N; ++j) {
        const double w = 2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(N);
        cos_table(static_cast<Eigen::Index>(j)) = std::cos(w);
        sin_table(static_cast<Eigen::Index>(j)) = std::sin(w);
    }
    const CounterRng rng(spec.seed);
    Vector u = Vector::Zero(Ni);
    for (const std::size_t k : bins) {
        const double phase = 2.0 * std::numbers::pi * rng.uniform_at(k);
        const double cp = std::cos(phase);
        const double sp = std::sin(phase);
        std::size_t idx = 0;
        for (std::size_t t = 0; t < N; ++t) {
            const auto j = static_cast<Eigen::Index>(idx);
            u(static_cast<Eigen::Index>(t)) += cp * cos_table(j) - sp * sin_table(j);
            idx += k;
            if (idx >= N) {
                idx -= N;
            }
        }
    }
    if (spec.filter) {
        u = filter_response(*spec.filter, u);
    }
    const double power = u.squaredNorm() / static_cast<double>(N);
    if (!(power > 0.0)) {
        throw std::invalid_argument("multisine: synthesized signal has zero power");
    }
    u /= std::sqrt(power);
    return u;
}

NoisyOutput add_noise_snr(const Vector& y0, double snr_db, std::uint64_t seed)
{
    const double var0 = variance(y0);
    if (!(var0 > 0.0)) {
        throw std::invalid_argument("add_noise_snr: noiseless output is constant, SNR undefined");
    }
    NoisyOutput out;
    out.sigma2 = var0 / std::pow(10.0, snr_db / 10.0);
    const double sd = std::sqrt(out.sigma2);
    const CounterRng rng(seed);
    out.e.resize(y0.size());
    for (Eigen::Index k = 0; k < y0.size(); ++k) {
        out.e(k) = sd * rng.normal_at(static_cast<std::uint64_t>(k));
    }
    out.y = y0 + out.e;
    return out;
}

}  // namespace volterra
