#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "volterra/benchmark.hpp"
#include "volterra/core.hpp"
#include "volterra/covariance.hpp"
#include "volterra/estimation.hpp"

namespace volterra::cli {

/// Malformed input file; the message carries the 1-based line number when known.
class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Everything a command needs, loadable from one JSON file. Keys missing from
/// the file keep the defaults below; unknown keys are rejected.
struct RunConfig {
    std::size_t n = 20;
    std::uint64_t seed = 1;
    std::size_t threads = 1;
    std::filesystem::path out = "out";

    // estimation
    std::size_t n_starts = 10;
    std::size_t max_evaluations = 2000;
    double tolerance = 1e-6;
    std::optional<HyperBounds> bounds;  // unset: relative to var(Y)
    std::optional<HyperParams> hyper;   // set: skip optimization

    // excitation and data generation
    std::size_t n_samples = 2000;
    std::optional<double> f_lo;
    double f_hi = 0.4;
    nlohmann::json input_filter;  // null, {"b": [...], "a": [...]} or {"butterworth": {"order", "cutoff"}}
    double snr_db = 20.0;

    // block system; filters are time-compressed by `time_compression` before use
    BlockSystem system = BlockSystem::reference();
    unsigned time_compression = 1;

    // Monte-Carlo sweep
    std::vector<double> ratios{0.2, 0.4, 0.7, 1.0, 1.3};
    std::size_t n_runs = 20;
    std::size_t n_val = 5000;
    bool regularized = true;
    bool unregularized = true;
    bool record_wall_time = false;

    static RunConfig from_json(const nlohmann::json& j);
    static RunConfig load(const std::filesystem::path& path);
    nlohmann::json to_json() const;

    std::optional<RationalFilter> resolved_filter() const;
    BlockSystem resolved_system() const;
    MonteCarloConfig monte_carlo_config() const;
    void validate() const;
};

struct Dataset {
    Vector u;
    Vector y;
};

/// CSV with a header naming at least the columns "u" and "y".
Dataset read_dataset(const std::filesystem::path& path);

/// model.json layout shared by estimate, benchmark and export-kernel.
nlohmann::json model_to_json(const VolterraModel& model);
VolterraModel model_from_json(const nlohmann::json& j);
VolterraModel read_model(const std::filesystem::path& path);

// Each command writes its files into config.out (created if missing), including
// effective_config.json, and throws on any failure.
void cmd_estimate(const RunConfig& config, const std::filesystem::path& data);
void cmd_benchmark(const RunConfig& config);
void cmd_mc(const RunConfig& config);
void cmd_export_kernel(const RunConfig& config, const std::filesystem::path& model);

/// Full command line (args[0] is the program name). Returns the process exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace volterra::cli
