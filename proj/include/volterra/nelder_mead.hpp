#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

namespace volterra {

struct NelderMeadOptions {
    std::size_t max_evaluations = 2000;
    double tolerance = 1e-6;    // max |x_i - x_best|_inf over vertices
    double initial_step = 0.1;  // fraction of each box side
};

struct NelderMeadResult {
    Eigen::VectorXd x;
    double value = std::numeric_limits<double>::infinity();
    std::size_t evaluations = 0;
    std::size_t iterations = 0;
    bool converged = false;
};

/// Minimizes f over the box [lo, hi]. Trial points are clamped into the box;
/// non-finite objective values rank as +inf. Uses the dimension-adaptive
/// coefficients of Gao and Han (2012), which behave better than the classic
/// (1, 2, 0.5, 0.5) set beyond a handful of dimensions.
template <class Objective>
NelderMeadResult nelder_mead(Objective&& f, const Eigen::VectorXd& x0, const Eigen::VectorXd& lo,
                             const Eigen::VectorXd& hi, const NelderMeadOptions& opt = {})
{
    const auto dim = x0.size();
    if (dim == 0 || lo.size() != dim || hi.size() != dim) {
        throw std::invalid_argument("nelder_mead: dimension mismatch");
    }
    const double d = static_cast<double>(dim);
    const double reflect = 1.0;
    const double expand = 1.0 + 2.0 / d;
    const double contract = 0.75 - 1.0 / (2.0 * d);
    const double shrink = 1.0 - 1.0 / d;

    NelderMeadResult res;
    auto clamp = [&](Eigen::VectorXd x) {
        return Eigen::VectorXd(x.cwiseMax(lo).cwiseMin(hi));
    };
    auto eval = [&](const Eigen::VectorXd& x) {
        ++res.evaluations;
        const double v = f(x);
        return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
    };

    std::vector<Eigen::VectorXd> simplex;
    std::vector<double> values;
    simplex.reserve(static_cast<std::size_t>(dim + 1));
    simplex.push_back(clamp(x0));
    for (Eigen::Index i = 0; i < dim; ++i) {
        Eigen::VectorXd v = simplex.front();
        const double step = opt.initial_step * (hi(i) - lo(i));
        // Step inward when the start sits on the upper face.
        v(i) = (v(i) + step <= hi(i)) ? v(i) + step : v(i) - step;
        simplex.push_back(clamp(v));
    }
    for (const auto& v : simplex) {
        values.push_back(eval(v));
    }

    std::vector<std::size_t> order(simplex.size());
    auto sort_simplex = [&] {
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
        std::vector<Eigen::VectorXd> s2;
        std::vector<double> v2;
        for (const std::size_t i : order) {
            s2.push_back(simplex[i]);
            v2.push_back(values[i]);
        }
        simplex.swap(s2);
        values.swap(v2);
    };
    auto diameter = [&] {
        double m = 0.0;
        for (std::size_t i = 1; i < simplex.size(); ++i) {
            m = std::max(m, (simplex[i] - simplex[0]).cwiseAbs().maxCoeff());
        }
        return m;
    };

    sort_simplex();
    const std::size_t worst = simplex.size() - 1;
    while (res.evaluations < opt.max_evaluations) {
        if (diameter() < opt.tolerance) {
            res.converged = true;
            break;
        }
        ++res.iterations;

        Eigen::VectorXd centroid = Eigen::VectorXd::Zero(dim);
        for (std::size_t i = 0; i < worst; ++i) {
            centroid += simplex[i];
        }
        centroid /= d;

        const Eigen::VectorXd xr = clamp(centroid + reflect * (centroid - simplex[worst]));
        const double fr = eval(xr);
        if (fr < values[0]) {
            const Eigen::VectorXd xe = clamp(centroid + expand * (xr - centroid));
            const double fe = eval(xe);
            if (fe < fr) {
                simplex[worst] = xe;
                values[worst] = fe;
            } else {
                simplex[worst] = xr;
                values[worst] = fr;
            }
        } else if (fr < values[worst - 1]) {
            simplex[worst] = xr;
            values[worst] = fr;
        } else {
            bool accepted = false;
            if (fr < values[worst]) {
                const Eigen::VectorXd xc = clamp(centroid + contract * (xr - centroid));
                const double fc = eval(xc);
                if (fc <= fr) {
                    simplex[worst] = xc;
                    values[worst] = fc;
                    accepted = true;
                }
            } else {
                const Eigen::VectorXd xc = clamp(centroid - contract * (centroid - simplex[worst]));
                const double fc = eval(xc);
                if (fc < values[worst]) {
                    simplex[worst] = xc;
                    values[worst] = fc;
                    accepted = true;
                }
            }
            if (!accepted) {
                for (std::size_t i = 1; i < simplex.size(); ++i) {
                    simplex[i] = simplex[0] + shrink * (simplex[i] - simplex[0]);
                    values[i] = eval(simplex[i]);
                }
            }
        }
        sort_simplex();
    }
    if (!res.converged && diameter() < opt.tolerance) {
        res.converged = true;
    }
    res.x = simplex[0];
    res.value = values[0];
    return res;
}

}  // namespace volterra
