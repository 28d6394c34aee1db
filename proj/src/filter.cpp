#include "volterra/filter.hpp"

#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include <Eigen/Eigenvalues>

namespace volterra {

RationalFilter::RationalFilter(std::vector<double> b, std::vector<double> a) : b_(std::move(b)), a_(std::move(a))
{
    if (b_.empty() || a_.empty()) {
        throw std::invalid_argument("RationalFilter: numerator and denominator must be non-empty");
    }
    if (a_[0] == 0.0) {
        throw std::invalid_argument("RationalFilter: leading denominator coefficient must be nonzero");
    }
    const double a0 = a_[0];
    for (double& x : a_) {
        x /= a0;
    }
    for (double& x : b_) {
        x /= a0;
    }
    for (const auto& p : poles()) {
        if (!(std::abs(p) < 1.0)) {
            std::ostringstream msg;
            msg << "RationalFilter: unstable pole " << p << " (|p| = " << std::abs(p) << ")";
            throw std::invalid_argument(msg.str());
        }
    }
}

std::vector<std::complex<double>> RationalFilter::poles() const
{
    // Trailing zero coefficients only add poles at the origin.
    std::size_t order = a_.size() - 1;
    while (order > 0 && a_[order] == 0.0) {
        --order;
    }
    std::vector<std::complex<double>> out(a_.size() - 1 - order, {0.0, 0.0});
    if (order == 0) {
        return out;
    }
    const auto o = static_cast<Eigen::Index>(order);
    Matrix companion = Matrix::Zero(o, o);
    for (Eigen::Index j = 0; j < o; ++j) {
        companion(0, j) = -a_[static_cast<std::size_t>(j) + 1];
    }
    for (Eigen::Index i = 1; i < o; ++i) {
        companion(i, i - 1) = 1.0;
    }
    Eigen::EigenSolver<Matrix> solver(companion, false);
    if (solver.info() != Eigen::Success) {
        throw std::runtime_error("RationalFilter: pole computation did not converge");
    }
    for (Eigen::Index i = 0; i < o; ++i) {
        out.push_back(solver.eigenvalues()(i));
    }
    return out;
}

RationalFilter RationalFilter::scaled(double gain) const
{
    std::vector<double> b = b_;
    for (double& x : b) {
        x *= gain;
    }
    return {b, a_};
}

RationalFilter RationalFilter::time_compressed(unsigned k) const
{
    if (k == 0) {
        throw std::invalid_argument("RationalFilter: compression factor must be >= 1");
    }
    if (k == 1) {
        return *this;
    }
    using cd = std::complex<double>;
    std::vector<cd> den{1.0};
    for (const cd p : poles()) {
        const cd pk = std::pow(p, static_cast<int>(k));
        std::vector<cd> d(den.size() + 1, 0.0);
        for (std::size_t i = 0; i < den.size(); ++i) {
            d[i] += den[i];
            d[i + 1] -= pk * den[i];
        }
        den.swap(d);
    }
    std::vector<double> a(den.size());
    double sum_new = 0.0;
    for (std::size_t i = 0; i < den.size(); ++i) {
        a[i] = den[i].real();
        sum_new += a[i];
    }
    double sum_old = 0.0;
    for (const double x : a_) {
        sum_old += x;
    }
    return RationalFilter(b_, a).scaled(sum_new / sum_old);
}

Vector RationalFilter::impulse_response(std::size_t n) const
{
    Vector impulse = Vector::Zero(static_cast<Eigen::Index>(n));
    if (n > 0) {
        impulse(0) = 1.0;
    }
    return filter_response(*this, impulse);
}

Vector filter_response(const RationalFilter& f, const Vector& u)
{
    const auto& b = f.b();
    const auto& a = f.a();
    const Eigen::Index N = u.size();
    Vector y(N);
    for (Eigen::Index k = 0; k < N; ++k) {
        double acc = 0.0;
        for (std::size_t i = 0; i < b.size() && static_cast<Eigen::Index>(i) <= k; ++i) {
            acc += b[i] * u(k - static_cast<Eigen::Index>(i));
        }
        for (std::size_t j = 1; j < a.size() && static_cast<Eigen::Index>(j) <= k; ++j) {
            acc -= a[j] * y(k - static_cast<Eigen::Index>(j));
        }
        y(k) = acc;
    }
    return y;
}

RationalFilter butterworth_lowpass(unsigned order, double cutoff)
{
    if (order == 0) {
        throw std::invalid_argument("butterworth_lowpass: order must be >= 1");
    }
    if (!(cutoff > 0.0 && cutoff < 0.5)) {
        throw std::invalid_argument("butterworth_lowpass: cutoff must lie in (0, 0.5) cycles/sample");
    }
    using cd = std::complex<double>;
    const double warped = 2.0 * std::tan(std::numbers::pi * cutoff);

    // Bilinear map of the analog poles; all zeros land at z = -1.
    std::vector<cd> den{1.0};
    std::vector<cd> num{1.0};
    for (unsigned k = 0; k < order; ++k) {
        const double theta = std::numbers::pi * (2.0 * k + order + 1) / (2.0 * order);
        const cd s = warped * cd(std::cos(theta), std::sin(theta));
        const cd z = (2.0 + s) / (2.0 - s);
        // multiply by (1 - z q^-1) and (1 + q^-1)
        std::vector<cd> d(den.size() + 1, 0.0);
        std::vector<cd> m(num.size() + 1, 0.0);
        for (std::size_t i = 0; i < den.size(); ++i) {
            d[i] += den[i];
            d[i + 1] -= z * den[i];
            m[i] += num[i];
            m[i + 1] += num[i];
        }
        den.swap(d);
        num.swap(m);
    }
    std::vector<double> a(den.size());
    std::vector<double> b(num.size());
    double sum_a = 0.0;
    double sum_b = 0.0;
    for (std::size_t i = 0; i < den.size(); ++i) {
        a[i] = den[i].real();
        b[i] = num[i].real();
        sum_a += a[i];
        sum_b += b[i];
    }
    const double gain = sum_a / sum_b;
    for (double& x : b) {
        x *= gain;
    }
    return {b, a};
}

}  // namespace volterra
