#pragma once

#include <complex>
#include <cstddef>
#include <vector>

#include "volterra/core.hpp"

namespace volterra {

/// B(q^-1) / A(q^-1) with coefficients in ascending powers of the delay
/// operator. The denominator is normalized so that a[0] = 1, and every pole
/// must lie strictly inside the unit circle.
class RationalFilter {
public:
    RationalFilter() : RationalFilter({1.0}, {1.0}) {}
    RationalFilter(std::vector<double> b, std::vector<double> a);

    const std::vector<double>& b() const { return b_; }
    const std::vector<double>& a() const { return a_; }

    std::vector<std::complex<double>> poles() const;

    /// Same denominator, numerator multiplied by `gain`.
    RationalFilter scaled(double gain) const;

    /// Poles p -> p^k with the numerator rescaled to keep the DC gain: a k times
    /// faster filter of the same order and static gain.
    RationalFilter time_compressed(unsigned k) const;

    /// First n samples of the impulse response.
    Vector impulse_response(std::size_t n) const;

    bool operator==(const RationalFilter&) const = default;

private:
    std::vector<double> b_;
    std::vector<double> a_;
};

/// Direct-form difference equation, zero initial conditions.
Vector filter_response(const RationalFilter& f, const Vector& u);

/// Digital Butterworth low-pass (bilinear transform, prewarped), unit DC gain.
/// `cutoff` is the -3 dB frequency in cycles/sample, 0 < cutoff < 0.5.
RationalFilter butterworth_lowpass(unsigned order, double cutoff);

}  // namespace volterra
