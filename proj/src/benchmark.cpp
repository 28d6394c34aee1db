#include "volterra/benchmark.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <thread>

#include "volterra/estimation.hpp"
#include "volterra/random.hpp"
#include "volterra/signals.hpp"

namespace volterra {

BlockSystem BlockSystem::reference()
{
    BlockSystem sys;
    sys.g0 = 2.0;
    sys.g1 = RationalFilter({0.0, 0.7568}, {1.0, -1.812, 0.8578});
    sys.g2 = RationalFilter({0.0, 1.063}, {1.0, -1.706, 0.7491});
    sys.g3 = sys.g1.scaled(1.5);
    return sys;
}

BlockSystem BlockSystem::time_compressed(unsigned k) const
{
    BlockSystem sys = *this;
    sys.g1 = g1.time_compressed(k);
    sys.g2 = g2.time_compressed(k);
    sys.g3 = g3.time_compressed(k);
    return sys;
}

Vector simulate_benchmark(const BlockSystem& sys, const Vector& u)
{
    const Vector linear = filter_response(sys.g1, sys.g0 * u);
    const Vector inner = filter_response(sys.g2, u);
    const Vector quadratic = filter_response(sys.g3, inner.array().square().matrix());
    return linear + quadratic;
}

VolterraModel true_kernels(const BlockSystem& sys, std::size_t n)
{
    if (n == 0) {
        throw std::invalid_argument("true_kernels: memory must be positive");
    }
    const Vector g1 = sys.g1.impulse_response(n);
    const Vector g2 = sys.g2.impulse_response(n);
    const Vector g3 = sys.g3.impulse_response(n);

    Vector h2(static_cast<Eigen::Index>(n * (n + 1) / 2));
    Eigen::Index flat = 0;
    for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t b = a; b < n; ++b) {
            double acc = 0.0;
            for (std::size_t s = 0; s <= a; ++s) {
                acc += g3(static_cast<Eigen::Index>(s)) * g2(static_cast<Eigen::Index>(a - s)) *
                       g2(static_cast<Eigen::Index>(b - s));
            }
            h2(flat++) = acc;
        }
    }
    return {0.0, sys.g0 * g1, h2};
}

double err_val(const Vector& y_val, const Vector& y_hat)
{
    if (y_val.size() != y_hat.size()) {
        throw std::invalid_argument("err_val: validation and model outputs differ in length");
    }
    const double ref = y_val.squaredNorm();
    if (!(ref > 0.0)) {
        throw std::invalid_argument("err_val: validation output has zero power");
    }
    // the 1/N factors of both rms values cancel
    return std::sqrt((y_val - y_hat).squaredNorm() / ref);
}

void MonteCarloConfig::validate() const
{
    if (n == 0) {
        throw std::invalid_argument("monte carlo: memory n must be positive");
    }
    if (ratios.empty()) {
        throw std::invalid_argument("monte carlo: no ratios given");
    }
    for (const double r : ratios) {
        if (!(r > 0.0) || !std::isfinite(r)) {
            throw std::invalid_argument("monte carlo: ratios must be positive");
        }
    }
    if (n_runs == 0) {
        throw std::invalid_argument("monte carlo: n_runs must be >= 1");
    }
    if (n_val < n) {
        throw std::invalid_argument("monte carlo: validation length must be at least the memory");
    }
    if (n_starts == 0) {
        throw std::invalid_argument("monte carlo: n_starts must be >= 1");
    }
    if (bounds) {
        bounds->validate();
    }
    if (!regularized && !unregularized) {
        throw std::invalid_argument("monte carlo: neither regularized nor unregularized estimation requested");
    }
}

std::size_t samples_for_ratio(double ratio, std::size_t n)
{
    const auto n_theta = static_cast<double>(1 + coefficient_count(1, n) + coefficient_count(2, n));
    return static_cast<std::size_t>(std::llround(ratio * n_theta));
}

namespace {

constexpr double nan = std::numeric_limits<double>::quiet_NaN();

enum SeedPurpose : std::uint64_t { input_seed = 0, noise_seed = 1, validation_seed = 2, optimizer_seed = 3 };

McRow failed_row(double ratio, std::size_t run, const std::string& method, const std::string& what)
{
    McRow row;
    row.ratio = ratio;
    row.run = run;
    row.method = method;
    row.err_val = nan;
    row.log_evidence = nan;
    row.hyper.fill(nan);
    row.status = "error: " + what;
    return row;
}

std::vector<McRow> run_one(const MonteCarloConfig& cfg, std::size_t ratio_index, std::size_t run)
{
    using clock = std::chrono::steady_clock;
    const double ratio = cfg.ratios[ratio_index];
    const bool with_ls = cfg.unregularized && ratio >= 1.0;
    auto seed = [&](SeedPurpose p) { return derive_seed(cfg.base_seed, {ratio_index, run, p}); };
    auto make_spec = [&](std::size_t length, std::uint64_t s) {
        MultisineSpec spec;
        spec.n_samples = length;
        spec.f_lo = cfg.band_lo;
        spec.f_hi = cfg.band_hi;
        spec.seed = s;
        spec.filter = cfg.input_filter;
        return spec;
    };

    std::vector<McRow> rows;
    RegressionProblem problem;
    Vector u_val;
    Vector y_val;
    try {
        const std::size_t N = samples_for_ratio(ratio, cfg.n);
        const Vector u = random_phase_multisine(make_spec(N, seed(input_seed)));
        const NoisyOutput data = add_noise_snr(simulate_benchmark(cfg.system, u), cfg.snr_db, seed(noise_seed));
        problem = build_problem(u, data.y, cfg.n);
        u_val = random_phase_multisine(make_spec(cfg.n_val, seed(validation_seed)));
        y_val = simulate_benchmark(cfg.system, u_val).tail(static_cast<Eigen::Index>(cfg.n_val - cfg.n + 1));
    } catch (const std::exception& e) {
        if (cfg.regularized) {
            rows.push_back(failed_row(ratio, run, "regularized", e.what()));
        }
        if (with_ls) {
            rows.push_back(failed_row(ratio, run, "ls", e.what()));
        }
        return rows;
    }

    if (cfg.regularized) {
        const auto t0 = clock::now();
        try {
            OptimizerOptions opt;
            opt.n_starts = cfg.n_starts;
            opt.seed = seed(optimizer_seed);
            opt.max_evaluations = cfg.max_evaluations;
            opt.tolerance = cfg.tolerance;
            const EstimationResult est =
                optimize_hyperparameters(problem, cfg.bounds.value_or(HyperBounds::defaults(variance(problem.y))), opt);
            const VolterraModel model = VolterraModel::from_theta(est.theta_hat, cfg.n);
            McRow row;
            row.ratio = ratio;
            row.run = run;
            row.method = "regularized";
            row.err_val = err_val(y_val, simulate(model, u_val));
            row.log_evidence = est.log_evidence;
            row.hyper = est.hyper.to_array();
            if (cfg.record_wall_time) {
                row.wall_time_s = std::chrono::duration<double>(clock::now() - t0).count();
            }
            rows.push_back(row);
        } catch (const std::exception& e) {
            rows.push_back(failed_row(ratio, run, "regularized", e.what()));
        }
    }
    if (with_ls) {
        const auto t0 = clock::now();
        try {
            const VolterraModel model = VolterraModel::from_theta(least_squares(problem), cfg.n);
            McRow row;
            row.ratio = ratio;
            row.run = run;
            row.method = "ls";
            row.err_val = err_val(y_val, simulate(model, u_val));
            row.log_evidence = nan;
            row.hyper.fill(nan);
            if (cfg.record_wall_time) {
                row.wall_time_s = std::chrono::duration<double>(clock::now() - t0).count();
            }
            rows.push_back(row);
        } catch (const std::exception& e) {
            rows.push_back(failed_row(ratio, run, "ls", e.what()));
        }
    }
    return rows;
}

}  // namespace

std::vector<McRow> monte_carlo(const MonteCarloConfig& config)
{
    config.validate();
    const std::size_t jobs = config.ratios.size() * config.n_runs;
    std::vector<std::vector<McRow>> results(jobs);
    auto work = [&](std::size_t job) {
        results[job] = run_one(config, job / config.n_runs, job % config.n_runs);
    };

    const std::size_t workers = std::max<std::size_t>(1, std::min(config.threads, jobs));
    if (workers == 1) {
        for (std::size_t j = 0; j < jobs; ++j) {
            work(j);
        }
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t j = next++; j < jobs; j = next++) {
                    work(j);
                }
            });
        }
    }

    std::vector<McRow> rows;
    for (auto& r : results) {
        rows.insert(rows.end(), r.begin(), r.end());
    }
    return rows;
}

double quantile(std::vector<double> values, double q)
{
    if (values.empty()) {
        return nan;
    }
    std::sort(values.begin(), values.end());
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

std::vector<SummaryRow> summarize(const std::vector<McRow>& rows)
{
    std::vector<SummaryRow> out;
    for (const McRow& row : rows) {
        auto it = std::find_if(out.begin(), out.end(),
                               [&](const SummaryRow& s) { return s.ratio == row.ratio && s.method == row.method; });
        if (it == out.end()) {
            out.push_back({row.ratio, row.method});
        }
    }
    for (SummaryRow& s : out) {
        std::vector<double> errs;
        for (const McRow& row : rows) {
            if (row.ratio == s.ratio && row.method == s.method) {
                if (row.status == "ok") {
                    errs.push_back(row.err_val);
                } else {
                    ++s.n_failed;
                }
            }
        }
        s.n_ok = errs.size();
        s.min = quantile(errs, 0.0);
        s.q1 = quantile(errs, 0.25);
        s.median = quantile(errs, 0.5);
        s.q3 = quantile(errs, 0.75);
        s.max = quantile(errs, 1.0);
    }
    return out;
}

}  // namespace volterra
