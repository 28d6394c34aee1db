#include "volterra/cli.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <variant>

#include <CLI11.hpp>

#include "volterra/errors.hpp"
#include "volterra/random.hpp"
#include "volterra/signals.hpp"

namespace volterra::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void check_keys(const json& j, std::initializer_list<std::string_view> allowed, const std::string& where)
{
    if (!j.is_object()) {
        throw std::invalid_argument("config: " + where + " must be an object");
    }
    for (const auto& [key, value] : j.items()) {
        bool known = false;
        for (const auto a : allowed) {
            known = known || key == a;
        }
        if (!known) {
            throw std::invalid_argument("config: unknown key \"" + key + "\" in " + where);
        }
    }
}

template <class T>
void read_key(const json& j, const char* key, T& target)
{
    if (j.contains(key) && !j.at(key).is_null()) {
        target = j.at(key).get<T>();
    }
}

template <class T>
void read_key(const json& j, const char* key, std::optional<T>& target)
{
    if (j.contains(key)) {
        if (j.at(key).is_null()) {
            target.reset();
        } else {
            target = j.at(key).get<T>();
        }
    }
}

json filter_to_json(const RationalFilter& f)
{
    return {{"b", f.b()}, {"a", f.a()}};
}

RationalFilter filter_from_json(const json& j, const std::string& where)
{
    check_keys(j, {"b", "a"}, where);
    if (!j.contains("b") || !j.contains("a")) {
        throw std::invalid_argument("config: " + where + " needs both \"b\" and \"a\"");
    }
    return {j.at("b").get<std::vector<double>>(), j.at("a").get<std::vector<double>>()};
}

json hyper_to_json(const HyperParams& h)
{
    json j = json::object();
    const auto values = h.to_array();
    for (std::size_t i = 0; i < HyperParams::count; ++i) {
        j[std::string(HyperParams::names[i])] = values[i];
    }
    return j;
}

HyperParams hyper_from_json(const json& j)
{
    std::array<double, HyperParams::count> values{};
    if (!j.is_object() || j.size() != HyperParams::count) {
        throw std::invalid_argument("config: \"hyper\" must give all ten hyperparameters");
    }
    for (std::size_t i = 0; i < HyperParams::count; ++i) {
        values[i] = j.at(std::string(HyperParams::names[i])).get<double>();
    }
    return HyperParams::from_array(values);
}

json bounds_to_json(const HyperBounds& b)
{
    json j = json::object();
    for (std::size_t i = 0; i < HyperParams::count; ++i) {
        j[std::string(HyperParams::names[i])] = {b.lo[i], b.hi[i]};
    }
    return j;
}

HyperBounds bounds_from_json(const json& j)
{
    if (!j.is_object() || j.size() != HyperParams::count) {
        throw std::invalid_argument("config: \"bounds\" must give [lo, hi] for all ten hyperparameters");
    }
    HyperBounds b;
    for (std::size_t i = 0; i < HyperParams::count; ++i) {
        const auto pair = j.at(std::string(HyperParams::names[i])).get<std::vector<double>>();
        if (pair.size() != 2) {
            throw std::invalid_argument("config: bounds for " + std::string(HyperParams::names[i]) +
                                        " must be [lo, hi]");
        }
        b.lo[i] = pair[0];
        b.hi[i] = pair[1];
    }
    return b;
}

// ---- output tables ----

using Cell = std::variant<double, long long, std::string>;

std::string format_double(double x)
{
    if (std::isnan(x)) {
        return "nan";
    }
    if (std::isinf(x)) {
        return x > 0 ? "inf" : "-inf";
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

std::string csv_field(const Cell& c)
{
    if (const auto* d = std::get_if<double>(&c)) {
        return format_double(*d);
    }
    if (const auto* i = std::get_if<long long>(&c)) {
        return std::to_string(*i);
    }
    const auto& s = std::get<std::string>(c);
    if (s.find_first_of(",\"\n") == std::string::npos) {
        return s;
    }
    std::string quoted = "\"";
    for (const char ch : s) {
        quoted += ch;
        if (ch == '"') {
            quoted += '"';
        }
    }
    return quoted + "\"";
}

json json_field(const Cell& c)
{
    if (const auto* d = std::get_if<double>(&c)) {
        return std::isfinite(*d) ? json(*d) : json(nullptr);
    }
    if (const auto* i = std::get_if<long long>(&c)) {
        return *i;
    }
    return std::get<std::string>(c);
}

void finish(std::ofstream& os, const fs::path& path)
{
    os.flush();
    if (!os) {
        throw std::runtime_error("failed writing " + path.string());
    }
}

std::ofstream open_out(const fs::path& path)
{
    std::ofstream os(path, std::ios::binary);
    if (!os) {
        throw std::runtime_error("cannot open " + path.string() + " for writing");
    }
    return os;
}

void write_text(const fs::path& path, const std::string& text)
{
    auto os = open_out(path);
    os << text;
    finish(os, path);
}

void write_json(const fs::path& path, const json& j)
{
    write_text(path, j.dump(2) + "\n");
}

/// <stem>.csv and its <stem>.jsonl mirror.
void write_table(const fs::path& dir, const std::string& stem, const std::vector<std::string>& columns,
                 const std::vector<std::vector<Cell>>& rows)
{
    const fs::path csv_path = dir / (stem + ".csv");
    const fs::path jsonl_path = dir / (stem + ".jsonl");
    auto csv = open_out(csv_path);
    auto jsonl = open_out(jsonl_path);
    for (std::size_t c = 0; c < columns.size(); ++c) {
        csv << (c ? "," : "") << columns[c];
    }
    csv << '\n';
    for (const auto& row : rows) {
        json obj = json::object();
        for (std::size_t c = 0; c < columns.size(); ++c) {
            csv << (c ? "," : "") << csv_field(row[c]);
            obj[columns[c]] = json_field(row[c]);
        }
        csv << '\n';
        jsonl << obj.dump() << '\n';
    }
    finish(csv, csv_path);
    finish(jsonl, jsonl_path);
}

void prepare_out(const RunConfig& config)
{
    std::error_code ec;
    fs::create_directories(config.out, ec);
    if (ec || !fs::is_directory(config.out)) {
        throw std::runtime_error("cannot create output directory " + config.out.string());
    }
    write_json(config.out / "effective_config.json", config.to_json());
}

void write_kernel_tables(const fs::path& dir, const std::string& prefix, const VolterraModel& m)
{
    std::vector<std::vector<Cell>> h1_rows;
    for (Eigen::Index t = 0; t < m.h1().size(); ++t) {
        h1_rows.push_back({static_cast<long long>(t), m.h1()(t)});
    }
    write_table(dir, prefix + "h1", {"tau", "value"}, h1_rows);

    const TriangularIndexMap map(m.memory());
    std::vector<std::vector<Cell>> h2_rows;
    for (std::size_t f = 0; f < map.size(); ++f) {
        const auto [a, b] = map.pair(f);
        h2_rows.push_back({static_cast<long long>(a), static_cast<long long>(b), m.h2()(static_cast<Eigen::Index>(f))});
    }
    write_table(dir, prefix + "h2", {"tau1", "tau2", "value"}, h2_rows);
}

std::vector<double> to_std(const Vector& v)
{
    return {v.data(), v.data() + v.size()};
}

double parse_number(const std::string& field, std::size_t line, const fs::path& path)
{
    const char* begin = field.c_str();
    char* end = nullptr;
    const double x = std::strtod(begin, &end);
    while (end && (*end == ' ' || *end == '\t' || *end == '\r')) {
        ++end;
    }
    if (end == begin || *end != '\0' || !std::isfinite(x)) {
        throw ParseError(path.string() + ":" + std::to_string(line) + ": invalid number \"" + field + "\"");
    }
    return x;
}

std::vector<std::string> split_csv_line(std::string line)
{
    if (!line.empty() && line.back() == '\r') {
        line.pop_back();
    }
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) {
        fields.push_back(field);
    }
    if (!line.empty() && line.back() == ',') {
        fields.emplace_back();
    }
    return fields;
}

std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) {
        return {};
    }
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

}  // namespace

// ---- config ----

RunConfig RunConfig::from_json(const json& j)
{
    check_keys(j, {"n", "seed", "threads", "out", "estimation", "input", "snr_db", "system", "mc"}, "config");
    RunConfig c;
    read_key(j, "n", c.n);
    read_key(j, "seed", c.seed);
    read_key(j, "threads", c.threads);
    if (j.contains("out")) {
        c.out = j.at("out").get<std::string>();
    }
    read_key(j, "snr_db", c.snr_db);

    if (j.contains("estimation")) {
        const json& e = j.at("estimation");
        check_keys(e, {"n_starts", "max_evaluations", "tolerance", "bounds", "hyper"}, "estimation");
        read_key(e, "n_starts", c.n_starts);
        read_key(e, "max_evaluations", c.max_evaluations);
        read_key(e, "tolerance", c.tolerance);
        if (e.contains("bounds") && !e.at("bounds").is_null()) {
            c.bounds = bounds_from_json(e.at("bounds"));
        }
        if (e.contains("hyper") && !e.at("hyper").is_null()) {
            c.hyper = hyper_from_json(e.at("hyper"));
        }
    }
    if (j.contains("input")) {
        const json& in = j.at("input");
        check_keys(in, {"n_samples", "f_lo", "f_hi", "filter"}, "input");
        read_key(in, "n_samples", c.n_samples);
        read_key(in, "f_lo", c.f_lo);
        read_key(in, "f_hi", c.f_hi);
        if (in.contains("filter")) {
            c.input_filter = in.at("filter");
        }
    }
    if (j.contains("system")) {
        const json& s = j.at("system");
        check_keys(s, {"g0", "g1", "g2", "g3", "time_compression"}, "system");
        read_key(s, "g0", c.system.g0);
        if (s.contains("g1")) {
            c.system.g1 = filter_from_json(s.at("g1"), "system.g1");
        }
        if (s.contains("g2")) {
            c.system.g2 = filter_from_json(s.at("g2"), "system.g2");
        }
        if (s.contains("g3")) {
            c.system.g3 = filter_from_json(s.at("g3"), "system.g3");
        }
        read_key(s, "time_compression", c.time_compression);
    }
    if (j.contains("mc")) {
        const json& m = j.at("mc");
        check_keys(m, {"ratios", "n_runs", "n_val", "regularized", "unregularized", "record_wall_time"}, "mc");
        read_key(m, "ratios", c.ratios);
        read_key(m, "n_runs", c.n_runs);
        read_key(m, "n_val", c.n_val);
        read_key(m, "regularized", c.regularized);
        read_key(m, "unregularized", c.unregularized);
        read_key(m, "record_wall_time", c.record_wall_time);
    }
    return c;
}

RunConfig RunConfig::load(const fs::path& path)
{
    std::ifstream is(path);
    if (!is) {
        throw std::runtime_error("cannot open config " + path.string());
    }
    json j;
    try {
        j = json::parse(is);
    } catch (const json::parse_error& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    try {
        return from_json(j);
    } catch (const json::exception& e) {
        throw std::invalid_argument(path.string() + ": " + e.what());
    }
}

json RunConfig::to_json() const
{
    json j;
    j["n"] = n;
    j["seed"] = seed;
    j["threads"] = threads;
    j["out"] = out.string();
    j["snr_db"] = snr_db;
    j["estimation"] = {{"n_starts", n_starts},
                       {"max_evaluations", max_evaluations},
                       {"tolerance", tolerance},
                       {"bounds", bounds ? bounds_to_json(*bounds) : json(nullptr)},
                       {"hyper", hyper ? hyper_to_json(*hyper) : json(nullptr)}};
    j["input"] = {{"n_samples", n_samples},
                  {"f_lo", f_lo ? json(*f_lo) : json(nullptr)},
                  {"f_hi", f_hi},
                  {"filter", input_filter}};
    j["system"] = {{"g0", system.g0},
                   {"g1", filter_to_json(system.g1)},
                   {"g2", filter_to_json(system.g2)},
                   {"g3", filter_to_json(system.g3)},
                   {"time_compression", time_compression}};
    j["mc"] = {{"ratios", ratios},
               {"n_runs", n_runs},
               {"n_val", n_val},
               {"regularized", regularized},
               {"unregularized", unregularized},
               {"record_wall_time", record_wall_time}};
    return j;
}

std::optional<RationalFilter> RunConfig::resolved_filter() const
{
    if (input_filter.is_null()) {
        return std::nullopt;
    }
    if (input_filter.contains("butterworth")) {
        check_keys(input_filter, {"butterworth"}, "input.filter");
        const json& bw = input_filter.at("butterworth");
        check_keys(bw, {"order", "cutoff"}, "input.filter.butterworth");
        return butterworth_lowpass(bw.at("order").get<unsigned>(), bw.at("cutoff").get<double>());
    }
    return filter_from_json(input_filter, "input.filter");
}

BlockSystem RunConfig::resolved_system() const
{
    return time_compression == 1 ? system : system.time_compressed(time_compression);
}

MonteCarloConfig RunConfig::monte_carlo_config() const
{
    MonteCarloConfig m;
    m.n = n;
    m.ratios = ratios;
    m.snr_db = snr_db;
    m.n_runs = n_runs;
    m.n_val = n_val;
    m.base_seed = seed;
    m.regularized = regularized;
    m.unregularized = unregularized;
    m.band_lo = f_lo;
    m.band_hi = f_hi;
    m.input_filter = resolved_filter();
    m.bounds = bounds;
    m.n_starts = n_starts;
    m.max_evaluations = max_evaluations;
    m.tolerance = tolerance;
    m.threads = threads;
    m.record_wall_time = record_wall_time;
    m.system = resolved_system();
    return m;
}

void RunConfig::validate() const
{
    if (n == 0) {
        throw std::invalid_argument("config: n must be >= 1");
    }
    if (threads == 0) {
        throw std::invalid_argument("config: threads must be >= 1");
    }
    if (n_starts == 0 || max_evaluations == 0) {
        throw std::invalid_argument("config: n_starts and max_evaluations must be >= 1");
    }
    if (!(tolerance > 0.0)) {
        throw std::invalid_argument("config: tolerance must be positive");
    }
    if (!std::isfinite(snr_db)) {
        throw std::invalid_argument("config: snr_db must be finite");
    }
    if (time_compression == 0) {
        throw std::invalid_argument("config: time_compression must be >= 1");
    }
    if (bounds) {
        bounds->validate();
    }
    if (hyper) {
        hyper->validate();
    }
    MultisineSpec spec;
    spec.n_samples = n_samples;
    spec.f_lo = f_lo;
    spec.f_hi = f_hi;
    spec.validate();
    monte_carlo_config().validate();
}

// ---- files ----

Dataset read_dataset(const fs::path& path)
{
    std::ifstream is(path);
    if (!is) {
        throw std::runtime_error("cannot open data file " + path.string());
    }
    std::string line;
    std::size_t line_no = 0;
    std::vector<std::string> header;
    while (header.empty() && std::getline(is, line)) {
        ++line_no;
        if (!trim(line).empty()) {
            header = split_csv_line(line);
        }
    }
    if (header.empty()) {
        throw ParseError(path.string() + ": empty file, expected a header with columns u and y");
    }
    std::optional<std::size_t> iu;
    std::optional<std::size_t> iy;
    for (std::size_t c = 0; c < header.size(); ++c) {
        const std::string name = trim(header[c]);
        if (name == "u") {
            iu = c;
        } else if (name == "y") {
            iy = c;
        }
    }
    if (!iu || !iy) {
        throw ParseError(path.string() + ":" + std::to_string(line_no) + ": header must name columns u and y");
    }

    std::vector<double> u;
    std::vector<double> y;
    while (std::getline(is, line)) {
        ++line_no;
        if (trim(line).empty()) {
            continue;
        }
        const auto fields = split_csv_line(line);
        if (fields.size() != header.size()) {
            throw ParseError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                             std::to_string(header.size()) + " fields, found " + std::to_string(fields.size()));
        }
        u.push_back(parse_number(trim(fields[*iu]), line_no, path));
        y.push_back(parse_number(trim(fields[*iy]), line_no, path));
    }
    Dataset d;
    d.u = Eigen::Map<const Vector>(u.data(), static_cast<Eigen::Index>(u.size()));
    d.y = Eigen::Map<const Vector>(y.data(), static_cast<Eigen::Index>(y.size()));
    return d;
}

json model_to_json(const VolterraModel& model)
{
    std::vector<std::vector<double>> dense;
    const Matrix h2 = model.h2_dense();
    for (Eigen::Index i = 0; i < h2.rows(); ++i) {
        dense.push_back(to_std(h2.row(i).transpose()));
    }
    json j;
    j["n"] = model.memory();
    j["h0"] = model.h0();
    j["h1"] = to_std(model.h1());
    j["h2_flat"] = to_std(model.h2());
    j["h2_dense"] = dense;
    return j;
}

VolterraModel model_from_json(const json& j)
{
    try {
        const auto n = j.at("n").get<std::size_t>();
        const auto h1 = j.at("h1").get<std::vector<double>>();
        const auto h2 = j.at("h2_flat").get<std::vector<double>>();
        if (n == 0 || h1.size() != n || h2.size() != n * (n + 1) / 2) {
            throw ParseError("model: kernel sizes do not match memory n = " + std::to_string(n));
        }
        return {j.at("h0").get<double>(), Eigen::Map<const Vector>(h1.data(), static_cast<Eigen::Index>(n)),
                Eigen::Map<const Vector>(h2.data(), static_cast<Eigen::Index>(h2.size()))};
    } catch (const json::exception& e) {
        throw ParseError(std::string("model: ") + e.what());
    }
}

VolterraModel read_model(const fs::path& path)
{
    std::ifstream is(path);
    if (!is) {
        throw std::runtime_error("cannot open model file " + path.string());
    }
    try {
        return model_from_json(json::parse(is));
    } catch (const json::parse_error& e) {
        throw ParseError(path.string() + ": " + e.what());
    } catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

// ---- commands ----

void cmd_estimate(const RunConfig& config, const fs::path& data)
{
    config.validate();
    const Dataset d = read_dataset(data);
    if (static_cast<std::size_t>(d.u.size()) < config.n) {
        throw std::invalid_argument("insufficient data: N = " + std::to_string(d.u.size()) +
                                    " samples for memory n = " + std::to_string(config.n));
    }
    const RegressionProblem problem = build_problem(d.u, d.y, config.n);
    prepare_out(config);

    EstimationResult est;
    if (config.hyper) {
        est = estimate_fixed(problem, *config.hyper);
    } else {
        OptimizerOptions opt;
        opt.n_starts = config.n_starts;
        opt.seed = config.seed;
        opt.max_evaluations = config.max_evaluations;
        opt.tolerance = config.tolerance;
        opt.threads = config.threads;
        est = optimize_hyperparameters(problem, config.bounds.value_or(HyperBounds::defaults(variance(problem.y))),
                                       opt);
    }
    const VolterraModel model = VolterraModel::from_theta(est.theta_hat, config.n);
    const double fit = err_val(problem.y, simulate(model, d.u));

    json j = model_to_json(model);
    j["hyper"] = hyper_to_json(est.hyper);
    j["log_evidence"] = est.log_evidence;
    j["diagnostics"] = {{"optimized", !config.hyper.has_value()},
                        {"best_start", est.best_start},
                        {"evaluations", est.evaluations},
                        {"iterations", est.iterations},
                        {"restarts", est.restarts},
                        {"converged", est.converged},
                        {"n_samples", d.u.size()},
                        {"n_rows", problem.y.size()},
                        {"n_theta", problem.phi.rows()},
                        {"fit_error", fit}};
    write_json(config.out / "model.json", j);
    write_kernel_tables(config.out, "kernel_", model);

    std::vector<std::string> cols{"start", "log_evidence", "evaluations", "iterations", "converged", "error"};
    for (const auto name : HyperParams::names) {
        cols.push_back("init_" + std::string(name));
    }
    std::vector<std::vector<Cell>> rows;
    for (const auto& s : est.starts) {
        std::vector<Cell> row{static_cast<long long>(s.start), s.log_evidence, static_cast<long long>(s.evaluations),
                              static_cast<long long>(s.iterations), static_cast<long long>(s.converged), s.error};
        for (const double x : s.initial) {
            row.emplace_back(x);
        }
        rows.push_back(std::move(row));
    }
    write_table(config.out, "starts", cols, rows);

    std::ostringstream r;
    r << std::setprecision(6);
    r << "volterra estimate\n";
    r << "data            " << data.string() << "\n";
    r << "samples N       " << d.u.size() << "\n";
    r << "memory n        " << config.n << "\n";
    r << "rows M          " << problem.y.size() << "\n";
    r << "parameters      " << problem.phi.rows() << "\n";
    r << "hyperparameters " << (config.hyper ? "fixed" : "optimized") << "\n";
    const auto values = est.hyper.to_array();
    for (std::size_t i = 0; i < HyperParams::count; ++i) {
        r << "  " << std::left << std::setw(8) << HyperParams::names[i] << " " << values[i] << "\n";
    }
    r << "log evidence    " << est.log_evidence << "\n";
    if (!config.hyper) {
        r << "best start      " << est.best_start << " of " << est.starts.size() << "\n";
        r << "evaluations     " << est.evaluations << (est.converged ? " (converged)" : " (budget exhausted)")
          << "\n";
    }
    r << "fit error       " << fit << "\n";
    write_text(config.out / "report.txt", r.str());
}

void cmd_benchmark(const RunConfig& config)
{
    config.validate();
    const BlockSystem sys = config.resolved_system();
    MultisineSpec spec;
    spec.n_samples = config.n_samples;
    spec.f_lo = config.f_lo;
    spec.f_hi = config.f_hi;
    spec.seed = derive_seed(config.seed, {0});
    spec.filter = config.resolved_filter();
    const std::uint64_t noise_seed = derive_seed(config.seed, {1});

    const Vector u = random_phase_multisine(spec);
    const Vector y0 = simulate_benchmark(sys, u);
    const NoisyOutput noisy = add_noise_snr(y0, config.snr_db, noise_seed);
    prepare_out(config);

    std::vector<std::vector<Cell>> rows;
    for (Eigen::Index k = 0; k < u.size(); ++k) {
        rows.push_back({static_cast<long long>(k), u(k), noisy.y(k), y0(k), noisy.e(k)});
    }
    write_table(config.out, "data", {"k", "u", "y", "y0", "e"}, rows);

    const VolterraModel truth = true_kernels(sys, config.n);
    write_json(config.out / "true_model.json", model_to_json(truth));
    write_kernel_tables(config.out, "true_", truth);

    const json meta = {{"n_samples", config.n_samples}, {"snr_db", config.snr_db},
                       {"sigma2", noisy.sigma2},        {"var_y0", variance(y0)},
                       {"input_seed", spec.seed},       {"noise_seed", noise_seed}};
    write_json(config.out / "benchmark.json", meta);
}

void cmd_mc(const RunConfig& config)
{
    config.validate();
    prepare_out(config);
    const auto rows = monte_carlo(config.monte_carlo_config());

    std::vector<std::string> cols{"ratio", "run", "method", "err_val", "log_evidence"};
    for (const auto name : HyperParams::names) {
        cols.emplace_back(name);
    }
    cols.emplace_back("wall_time_s");
    cols.emplace_back("status");
    std::vector<std::vector<Cell>> table;
    for (const McRow& r : rows) {
        std::vector<Cell> row{r.ratio, static_cast<long long>(r.run), r.method, r.err_val, r.log_evidence};
        for (const double h : r.hyper) {
            row.emplace_back(h);
        }
        row.emplace_back(r.wall_time_s);
        row.emplace_back(r.status);
        table.push_back(std::move(row));
    }
    write_table(config.out, "results", cols, table);

    const auto summary = summarize(rows);
    std::vector<std::vector<Cell>> stable;
    std::ostringstream r;
    r << "volterra mc: n = " << config.n << ", " << config.n_runs << " runs per ratio, snr " << config.snr_db
      << " dB\n";
    r << "ratio   method        ok  fail  median    q1        q3\n";
    for (const SummaryRow& s : summary) {
        stable.push_back({s.ratio, s.method, static_cast<long long>(s.n_ok), static_cast<long long>(s.n_failed), s.min,
                          s.q1, s.median, s.q3, s.max});
        char line[160];
        std::snprintf(line, sizeof line, "%-7.3g %-12s %3zu %5zu  %-9.4f %-9.4f %-9.4f\n", s.ratio, s.method.c_str(),
                      s.n_ok, s.n_failed, s.median, s.q1, s.q3);
        r << line;
    }
    write_table(config.out, "summary", {"ratio", "method", "n_ok", "n_failed", "min", "q1", "median", "q3", "max"},
                stable);
    write_text(config.out / "report.txt", r.str());
}

void cmd_export_kernel(const RunConfig& config, const fs::path& model_path)
{
    const VolterraModel model = read_model(model_path);
    prepare_out(config);
    const Matrix h2 = model.h2_dense();
    std::vector<std::vector<Cell>> rows;
    for (Eigen::Index a = 0; a < h2.rows(); ++a) {
        for (Eigen::Index b = 0; b < h2.cols(); ++b) {
            rows.push_back({static_cast<long long>(a), static_cast<long long>(b), h2(a, b)});
        }
    }
    write_table(config.out, "kernel_grid", {"tau1", "tau2", "value"}, rows);
}

// ---- entry point ----

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Regularized second-order Volterra identification"};
    app.name(args.empty() ? "volterra" : fs::path(args[0]).filename().string());
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    std::uint64_t seed = 0;
    std::string out_dir;
    std::size_t threads = 1;
    auto* config_opt = app.add_option("--config", config_path, "JSON config file");
    auto* seed_opt = app.add_option("--seed", seed, "Base seed (overrides config)");
    auto* out_opt = app.add_option("--out", out_dir, "Output directory (overrides config)");
    auto* threads_opt =
        app.add_option("--threads", threads, "Worker threads (overrides config)")->check(CLI::PositiveNumber);

    std::string data_path;
    std::string model_path;
    auto* estimate = app.add_subcommand("estimate", "Estimate kernels from a (u, y) CSV file");
    estimate->add_option("data", data_path, "CSV with columns u and y")->required();
    auto* benchmark = app.add_subcommand("benchmark", "Generate a dataset from the block system");
    auto* mc = app.add_subcommand("mc", "Monte-Carlo sweep over N / n_theta");
    auto* export_kernel = app.add_subcommand("export-kernel", "Expand a model's h2 to an n x n grid");
    export_kernel->add_option("model", model_path, "model.json")->required();

    std::vector<std::string> storage(args.begin(), args.end());
    if (storage.empty()) {
        storage.emplace_back("volterra");
    }
    std::vector<char*> argv;
    for (auto& s : storage) {
        argv.push_back(s.data());
    }
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err);
    }

    try {
        RunConfig config = config_opt->count() ? RunConfig::load(config_path) : RunConfig{};
        if (seed_opt->count()) {
            config.seed = seed;
        }
        if (out_opt->count()) {
            config.out = out_dir;
        }
        if (threads_opt->count()) {
            config.threads = threads;
        }
        if (estimate->parsed()) {
            cmd_estimate(config, data_path);
        } else if (benchmark->parsed()) {
            cmd_benchmark(config);
        } else if (mc->parsed()) {
            cmd_mc(config);
        } else if (export_kernel->parsed()) {
            cmd_export_kernel(config, model_path);
        }
        out << "wrote " << config.out.string() << "\n";
        return 0;
    } catch (const ParseError& e) {
        err << "parse error: " << e.what() << "\n";
        return 2;
    } catch (const NumericalError& e) {
        err << "numerical error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace volterra::cli
