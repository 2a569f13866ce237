#include "pslib/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>

#include <json.hpp>

#include "pslib/errors.hpp"
#include "pslib/eval.hpp"
#include "pslib/format.hpp"
#include "pslib/report.hpp"
#include "pslib/rng.hpp"
#include "pslib/sim.hpp"
#include "pslib/smoother.hpp"

namespace pslib {

namespace fs = std::filesystem;
using nlohmann::json;

std::pair<std::vector<SurvivalRecord>, std::vector<SurvivalRecord>> split_records(
    const std::vector<SurvivalRecord>& records, double fraction, std::uint64_t seed) {
    if (!(fraction >= 0.0 && fraction < 1.0)) throw ConfigError("test fraction must lie in [0, 1)");
    const std::size_t n = records.size();
    const auto n_test = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Stream rng(seed, Phase::Split, 0, 0);
    for (std::size_t i = n; i > 1; --i) {
        const auto k = static_cast<std::size_t>(rng.uniform() * static_cast<double>(i));
        std::swap(order[i - 1], order[std::min(k, i - 1)]);
    }
    std::vector<char> is_test(n, 0);
    for (std::size_t i = 0; i < n_test; ++i) is_test[order[i]] = 1;
    std::pair<std::vector<SurvivalRecord>, std::vector<SurvivalRecord>> out;
    for (std::size_t i = 0; i < n; ++i) (is_test[i] ? out.second : out.first).push_back(records[i]);
    if (out.first.empty()) throw ConfigError("test fraction leaves no training records");
    return out;
}

namespace {

// ---------------------------------------------------------------------------
// Option groups

struct CommonOptions {
    std::string config;
    bool dump_config = false;
    std::uint64_t seed = 0;
    bool deterministic = false;
    int threads = 0;
    std::string out = ".";
};

struct DataOptions {
    std::string path;
    std::string id_col = "id";
    std::string time_col = "time";
    std::string event_col = "event";
    std::vector<std::string> covariates;
    std::vector<std::string> center;
};

struct ModelOptions {
    double phi = 0.45;
    double initial_variance = 100.0;
    std::size_t particles = 2000;
    std::size_t oversampling = 2;
    std::string partition = "equal-events";
    std::size_t events = 30;
    double width = 20.0;
    std::size_t intervals = 0;
    std::string proposal = "linear-bayes";
    std::string backward_init = "likelihood";
    bool backward_lookahead = false;
    std::string paths = "genealogy";
    std::string preset;
};

struct SimOptions {
    std::size_t p = 1;
    std::size_t n = 1000;
    std::size_t j = 26;
    double pc = 0.1;
    double width = 20.0;
    double rw_sd = 0.5;
    std::optional<double> log_baseline;
};

// Resolved run context shared by the commands.
struct Run {
    std::uint64_t seed = 0;
    bool deterministic = false;
    int threads = 0;
    fs::path out;
    json config;
};

const CLI::Validator kOpenUnit(
    [](std::string& s) -> std::string {
        double v = 0.0;
        try {
            v = std::stod(s);
        } catch (...) {
            return "not a number: " + s;
        }
        return (v > 0.0 && v < 1.0) ? "" : "value " + s + " not in (0, 1)";
    },
    "in (0, 1)");

const CLI::Validator kHalfOpenUnit(
    [](std::string& s) -> std::string {
        double v = 0.0;
        try {
            v = std::stod(s);
        } catch (...) {
            return "not a number: " + s;
        }
        return (v >= 0.0 && v < 1.0) ? "" : "value " + s + " not in [0, 1)";
    },
    "in [0, 1)");

void add_common(CLI::App* sub, CommonOptions& o) {
    sub->add_option("--config", o.config, "JSON file with option values; flags override it");
    sub->add_flag("--dump-config", o.dump_config, "Print the merged configuration as JSON and exit");
    sub->add_option("--seed", o.seed, "Random seed (drawn at random when omitted outside deterministic mode)");
    sub->add_flag("--deterministic", o.deterministic, "Byte-identical outputs: fixed default seed, no timings");
    sub->add_option("--threads", o.threads, "Worker threads (default: PSLIB_THREADS or all cores)")
        ->check(CLI::NonNegativeNumber);
    sub->add_option("--out", o.out, "Output directory");
}

void add_data(CLI::App* sub, DataOptions& o) {
    sub->add_option("--data", o.path, "Survival CSV file");
    sub->add_option("--id-col", o.id_col, "Identifier column");
    sub->add_option("--time-col", o.time_col, "Time column");
    sub->add_option("--event-col", o.event_col, "Event indicator column");
    sub->add_option("--covariates", o.covariates, "Covariate columns (default: all remaining)");
    sub->add_option("--center", o.center, "Covariates to mean-center");
}

void add_model(CLI::App* sub, ModelOptions& o, bool with_partition) {
    sub->add_option("--phi", o.phi, "Discount factor")->check(kOpenUnit);
    sub->add_option("--initial-variance", o.initial_variance, "Variance of each coefficient in the initial law")
        ->check(CLI::PositiveNumber);
    sub->add_option("--particles", o.particles, "Particles per filter (K)")->check(CLI::Range(2, 100000000));
    sub->add_option("--oversampling", o.oversampling, "Smoothing oversampling (R)")->check(CLI::Range(1, 1000));
    if (with_partition) {
        sub->add_option("--partition", o.partition, "Partition policy")
            ->check(CLI::IsMember({"equal-events", "equidistant", "event-times"}));
        sub->add_option("--events", o.events, "Events per interval for equal-events")->check(CLI::Range(1, 100000000));
        sub->add_option("--width", o.width, "Interval width for equidistant")->check(CLI::PositiveNumber);
        sub->add_option("--intervals", o.intervals, "Interval count for equidistant (0: cover the data)");
    }
    sub->add_option("--proposal", o.proposal, "Proposal kind")->check(CLI::IsMember({"linear-bayes", "bootstrap"}));
    sub->add_option("--backward-init", o.backward_init, "Backward filter initial weights")
        ->check(CLI::IsMember({"likelihood", "uniform"}));
    sub->add_flag("--backward-lookahead", o.backward_lookahead,
                  "Weight backward ancestors by the interval likelihood at the ancestor");
    sub->add_option("--paths", o.paths, "Full-path construction")->check(CLI::IsMember({"genealogy", "marginals"}));
    sub->add_option("--preset", o.preset, "Named preset (trace: K=10000, equal-events(30), phi=0.5)")
        ->check(CLI::IsMember({"trace"}));
}

void add_sim(CLI::App* sub, SimOptions& o) {
    sub->add_option("--p", o.p, "Number of covariates");
    sub->add_option("--n", o.n, "Number of subjects")->check(CLI::Range(std::size_t{1}, std::size_t{1} << 40));
    sub->add_option("--j", o.j, "Number of intervals")->check(CLI::Range(std::size_t{1}, std::size_t{1} << 20));
    sub->add_option("--pc", o.pc, "Censoring proportion")->check(kHalfOpenUnit);
    sub->add_option("--width", o.width, "Interval width")->check(CLI::PositiveNumber);
    sub->add_option("--rw-sd", o.rw_sd, "Random-walk step sd")->check(CLI::NonNegativeNumber);
    sub->add_option("--log-baseline", o.log_baseline, "Constant log baseline hazard instead of -11 + log j");
}

// ---------------------------------------------------------------------------
// Config file merge and dump

bool is_flag(const CLI::Option* opt) { return opt->get_expected_max() == 0; }
bool is_list(const CLI::Option* opt) { return opt->get_items_expected_max() > 1; }

bool skip_in_config(const CLI::Option* opt) {
    const std::string name = opt->get_lnames().empty() ? "" : opt->get_lnames().front();
    return name.empty() || name == "help" || name == "config" || name == "dump-config";
}

json scalar_json(const std::string& s) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec == std::errc() && ptr == s.data() + s.size() && !s.empty()) {
        long long i = 0;
        const auto [iptr, iec] = std::from_chars(s.data(), s.data() + s.size(), i);
        if (iec == std::errc() && iptr == s.data() + s.size()) return i;
        return v;
    }
    return s;
}

std::string json_scalar_string(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    if (v.is_number_integer()) return std::to_string(v.get<long long>());
    if (v.is_number_unsigned()) return std::to_string(v.get<unsigned long long>());
    if (v.is_number_float()) return format_double(v.get<double>());
    throw CLI::ValidationError("config", "unsupported JSON value " + v.dump());
}

void apply_config_file(CLI::App* sub, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw CLI::FileError::Missing(path);
    json cfg;
    try {
        cfg = json::parse(in);
    } catch (const json::parse_error& e) {
        throw CLI::ValidationError("--config", std::string("invalid JSON: ") + e.what());
    }
    if (!cfg.is_object()) throw CLI::ValidationError("--config", "config file must hold a JSON object");
    for (const auto& [key, value] : cfg.items()) {
        CLI::Option* opt = sub->get_option_no_throw("--" + key);
        if (opt == nullptr || skip_in_config(opt)) {
            throw CLI::ValidationError("--config", "unknown key '" + key + "' for command " + sub->get_name());
        }
        if (opt->count() > 0 || value.is_null() || (value.is_array() && value.empty())) continue;  // flags win
        if (value.is_array()) {
            for (const auto& item : value) opt->add_result(json_scalar_string(item));
        } else {
            opt->add_result(json_scalar_string(value));
        }
        opt->run_callback();
    }
}

std::vector<std::string> split_default_list(std::string s) {
    if (s.size() >= 2 && ((s.front() == '[' && s.back() == ']') || (s.front() == '{' && s.back() == '}'))) {
        s = s.substr(1, s.size() - 2);
    }
    std::vector<std::string> parts;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) parts.push_back(item);
    }
    return parts;
}

json config_json(const CLI::App* sub, const Run& run) {
    json cfg = json::object();
    for (const CLI::Option* opt : sub->get_options()) {
        if (skip_in_config(opt)) continue;
        const std::string key = opt->get_lnames().front();
        std::vector<std::string> values;
        if (opt->count() > 0) {
            values = opt->results();
        } else if (is_list(opt)) {
            values = split_default_list(opt->get_default_str());
        } else if (!opt->get_default_str().empty()) {
            values = {opt->get_default_str()};
        }
        if (is_flag(opt)) {
            const bool on = opt->count() > 0 ? opt->as<bool>() : false;
            cfg[key] = on;
        } else if (is_list(opt)) {
            json arr = json::array();
            for (const auto& v : values) arr.push_back(scalar_json(v));
            cfg[key] = arr;
        } else if (!values.empty()) {
            cfg[key] = scalar_json(values.front());
        }
    }
    cfg["seed"] = run.seed;
    cfg["threads"] = run.threads;
    return cfg;
}

// ---------------------------------------------------------------------------
// Shared plumbing

std::uint64_t random_seed() {
    std::random_device rd;
    return (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
}

int env_threads() {
    if (const char* v = std::getenv("PSLIB_THREADS")) {
        int n = 0;
        const std::string s(v);
        const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), n);
        if (ec == std::errc() && ptr == s.data() + s.size() && n >= 0) return n;
    }
    return 0;
}

Run resolve_run(const CLI::App* sub, const CommonOptions& o) {
    Run run;
    run.deterministic = o.deterministic;
    if (sub->get_option("--seed")->count() > 0) {
        run.seed = o.seed;
    } else {
        run.seed = o.deterministic ? 1 : random_seed();
    }
    run.threads = sub->get_option("--threads")->count() > 0 ? o.threads : env_threads();
    run.out = o.out;
    run.config = config_json(sub, run);
    return run;
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error("cannot create output directory " + dir.string() + ": " + ec.message());
}

std::ofstream open_out(const fs::path& path, bool binary = false) {
    std::ofstream f(path, binary ? std::ios::binary | std::ios::out : std::ios::out);
    if (!f) throw Error("cannot write " + path.string());
    return f;
}

void write_json(const fs::path& path, const json& j) {
    auto f = open_out(path);
    f << j.dump(2) << '\n';
    if (!f) throw Error("failed writing " + path.string());
}

// Preset values fill options the user left unset, as if given on the command line.
void apply_preset(CLI::App* sub, const ModelOptions& m) {
    if (m.preset != "trace") return;
    const std::pair<const char*, const char*> values[] = {
        {"--particles", "10000"}, {"--phi", "0.5"}, {"--partition", "equal-events"}, {"--events", "30"}};
    for (const auto& [name, value] : values) {
        CLI::Option* opt = sub->get_option_no_throw(name);
        if (opt == nullptr || opt->count() > 0) continue;
        opt->add_result(value);
        opt->run_callback();
    }
}

SurvivalDataset load_data(const DataOptions& d) {
    if (d.path.empty()) throw CLI::RequiredError("--data");
    CsvSchema schema;
    schema.id = d.id_col;
    schema.time = d.time_col;
    schema.event = d.event_col;
    schema.covariates = d.covariates;
    schema.center = d.center;
    return parse_survival_csv(d.path, schema);
}

PartitionPolicy policy_of(const ModelOptions& m) {
    if (m.partition == "equidistant") return EquidistantPolicy{m.width, m.intervals};
    if (m.partition == "event-times") return EventTimesPolicy{};
    return EqualEventsPolicy{m.events};
}

SmootherConfig smoother_config(const ModelOptions& m, const Run& run) {
    SmootherConfig c;
    c.particles = m.particles;
    c.oversampling = m.oversampling;
    c.seed = run.seed;
    c.threads = run.threads;
    c.proposal = m.proposal == "bootstrap" ? ProposalKind::Bootstrap : ProposalKind::LinearBayes;
    c.backward_init = m.backward_init == "uniform" ? BackwardInit::Uniform : BackwardInit::LikelihoodWeighted;
    c.backward_lookahead = m.backward_lookahead;
    c.paths = m.paths == "marginals" ? PathMode::IndependentMarginals : PathMode::Genealogy;
    return c;
}

DiscountPrior prior_of(const ModelOptions& m) {
    DiscountPrior p;
    p.phi = m.phi;
    p.initial_variance = m.initial_variance;
    return p;
}

struct Fitted {
    IntervalPartition partition;
    ExpandedPanel panel;
    SmootherOutput output;
};

Fitted fit_records(const std::vector<SurvivalRecord>& train, const PartitionPolicy& policy, const DiscountPrior& prior,
                   const SmootherConfig& config) {
    Fitted f;
    f.partition = build_partition(train, policy);
    f.panel = expand_exposures(train, f.partition);
    f.output = run_two_filter_smoother(f.panel, f.partition, prior, config);
    return f;
}

std::size_t count_events(const std::vector<SurvivalRecord>& records) {
    std::size_t n = 0;
    for (const auto& r : records) n += static_cast<std::size_t>(r.event);
    return n;
}

// Output location and worker count do not affect results, so reports leave them out.
json run_json(const std::string& command, const Run& run) {
    json cfg = run.config;
    cfg.erase("out");
    cfg.erase("threads");
    return {{"command", command}, {"seed", run.seed}, {"deterministic", run.deterministic}, {"config", cfg}};
}

// ---------------------------------------------------------------------------
// Commands

int cmd_simulate(const Run& run, const SimOptions& s, std::ostream& out) {
    DgpConfig cfg;
    cfg.covariates = s.p;
    cfg.subjects = s.n;
    cfg.intervals = s.j;
    cfg.interval_width = s.width;
    cfg.censoring = s.pc;
    cfg.rw_sd = s.rw_sd;
    cfg.log_baseline = s.log_baseline;
    cfg.seed = run.seed;
    const Simulation sim = simulate_dgp(cfg);

    ensure_dir(run.out);
    {
        auto f = open_out(run.out / "data.csv");
        write_survival_csv(f, sim.data);
    }
    json paths = json::array();
    for (Eigen::Index j = 0; j < sim.truth.rows(); ++j) {
        json row = json::array();
        for (Eigen::Index c = 0; c < sim.truth.cols(); ++c) row.push_back(sim.truth(j, c));
        paths.push_back(row);
    }
    json truth = run_json("simulate", run);
    truth["coefficients"] = coefficient_names(sim.data.covariate_names);
    truth["paths"] = paths;
    truth["partition"] = partition_json(sim.partition);
    truth["subjects"] = sim.data.records.size();
    truth["events"] = count_events(sim.data.records);
    truth["truncated"] = sim.truncated;
    write_json(run.out / "truth.json", truth);
    out << "simulated " << sim.data.records.size() << " subjects (" << count_events(sim.data.records)
        << " events) -> " << (run.out / "data.csv").string() << '\n';
    return kExitOk;
}

int cmd_fit(const Run& run, const DataOptions& d, const ModelOptions& m, double test_fraction, bool dump_particles,
            std::ostream& out) {
    const SurvivalDataset data = load_data(d);
    auto [train, test] = split_records(data.records, test_fraction, run.seed);
    const Fitted fit = fit_records(train, policy_of(m), prior_of(m), smoother_config(m, run));

    ensure_dir(run.out);
    const auto names = coefficient_names(data.covariate_names);
    {
        auto f = open_out(run.out / "trajectory.csv");
        write_trajectory_csv(f, fit.output, fit.partition, names);
    }
    json diag = run_json("fit", run);
    diag["data"] = {{"subjects", data.records.size()},
                    {"train", train.size()},
                    {"test", test.size()},
                    {"events", count_events(train)},
                    {"truncated", fit.panel.truncated},
                    {"coefficients", names},
                    {"center_offsets", data.center_offsets}};
    diag["partition"] = partition_json(fit.partition);
    diag["smoother"] = diagnostics_json(fit.output, !run.deterministic);
    if (!test.empty()) diag["waic"] = waic_json(waic(test, fit.output.paths, fit.partition, run.threads));
    if (dump_particles) {
        auto f = open_out(run.out / "particles.bin", true);
        write_particle_dump(f, fit.output);
        diag["particle_dump"] = {{"file", "particles.bin"},
                                 {"intervals", fit.output.intervals()},
                                 {"particles", fit.output.smoothed.front().size()},
                                 {"values_per_particle", fit.output.dim + 1},
                                 {"layout", "float64 little-endian; interval-major; weight then coefficients"}};
    }
    write_json(run.out / "diagnostics.json", diag);
    out << "fitted " << fit.output.intervals() << " intervals on " << train.size() << " subjects";
    if (diag.contains("waic")) out << ", WAIC " << format_double(diag["waic"]["deviance"].get<double>());
    out << '\n';
    return kExitOk;
}

int cmd_waic_grid(const Run& run, const DataOptions& d, const ModelOptions& m, double test_fraction,
                  const std::vector<double>& phis, const std::vector<std::size_t>& grid_events, std::ostream& out) {
    if (phis.empty() || grid_events.empty()) throw CLI::ValidationError("grid", "the phi and E grids must not be empty");
    if (!(test_fraction > 0.0)) throw CLI::ValidationError("--test-fraction", "WAIC needs a positive test fraction");
    const SurvivalDataset data = load_data(d);
    auto [train, test] = split_records(data.records, test_fraction, run.seed);
    const SmootherConfig config = smoother_config(m, run);

    Matrix table(static_cast<Eigen::Index>(phis.size()), static_cast<Eigen::Index>(grid_events.size()));
    json cells = json::array();
    for (std::size_t a = 0; a < phis.size(); ++a) {
        for (std::size_t b = 0; b < grid_events.size(); ++b) {
            DiscountPrior prior = prior_of(m);
            prior.phi = phis[a];
            const Fitted fit = fit_records(train, EqualEventsPolicy{grid_events[b]}, prior, config);
            const WaicResult w = waic(test, fit.output.paths, fit.partition, run.threads);
            table(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = w.deviance;
            json cell{{"phi", phis[a]}, {"events", grid_events[b]}, {"intervals", fit.partition.intervals()},
                      {"waic", waic_json(w)}};
            if (!run.deterministic) cell["cpu_seconds"] = fit.output.diagnostics.cpu_seconds;
            cells.push_back(cell);
        }
    }

    ensure_dir(run.out);
    {
        auto f = open_out(run.out / "waic_table.csv");
        f << "phi";
        for (std::size_t e : grid_events) f << ",E=" << e;
        f << '\n';
        for (std::size_t a = 0; a < phis.size(); ++a) {
            f << format_double(phis[a]);
            for (std::size_t b = 0; b < grid_events.size(); ++b) {
                f << ',' << format_double(table(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)));
            }
            f << '\n';
        }
    }
    Eigen::Index ba = 0;
    Eigen::Index bb = 0;
    table.minCoeff(&ba, &bb);
    json report = run_json("waic-grid", run);
    report["train"] = train.size();
    report["test"] = test.size();
    report["cells"] = cells;
    report["best"] = {{"phi", phis[static_cast<std::size_t>(ba)]}, {"events", grid_events[static_cast<std::size_t>(bb)]},
                      {"waic", table(ba, bb)}};
    write_json(run.out / "waic_grid.json", report);
    out << "best cell phi=" << format_double(phis[static_cast<std::size_t>(ba)])
        << " E=" << grid_events[static_cast<std::size_t>(bb)] << " WAIC " << format_double(table(ba, bb)) << '\n';
    return kExitOk;
}

std::vector<double> parse_profile(const std::string& text, const SurvivalDataset& data) {
    std::vector<double> values;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        double v = 0.0;
        const auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
        if (ec != std::errc() || ptr != item.data() + item.size()) {
            throw CLI::ValidationError("--profile", "not a number: '" + item + "'");
        }
        values.push_back(v);
    }
    if (values.size() != data.covariate_count()) {
        throw CLI::ValidationError("--profile", "expected " + std::to_string(data.covariate_count()) + " values, got " +
                                                    std::to_string(values.size()));
    }
    for (std::size_t c = 0; c < values.size(); ++c) values[c] -= data.center_offsets[c];
    return values;
}

int cmd_predict(const Run& run, const DataOptions& d, const ModelOptions& m, const std::vector<std::string>& profiles,
                const std::vector<double>& times, std::size_t grid_points, std::ostream& out) {
    const SurvivalDataset data = load_data(d);
    const Fitted fit = fit_records(data.records, policy_of(m), prior_of(m), smoother_config(m, run));
    const double horizon = fit.partition.horizon();

    std::vector<std::vector<double>> rows;
    for (const auto& p : profiles) rows.push_back(parse_profile(p, data));
    if (rows.empty()) {
        // the covariate means on the input scale
        std::vector<double> mean(data.covariate_count(), 0.0);
        for (const auto& r : data.records) {
            for (std::size_t c = 0; c < mean.size(); ++c) mean[c] += r.covariates[static_cast<Eigen::Index>(c)];
        }
        for (double& v : mean) v /= static_cast<double>(data.records.size());
        rows.push_back(mean);
    }
    std::vector<double> grid = times;
    if (grid.empty()) {
        if (grid_points < 2) throw CLI::ValidationError("--grid-points", "need at least 2 grid points");
        for (std::size_t k = 0; k < grid_points; ++k) {
            grid.push_back(horizon * static_cast<double>(k) / static_cast<double>(grid_points - 1));
        }
        grid.back() = horizon;
    }

    ensure_dir(run.out);
    auto f = open_out(run.out / "survival.csv");
    f << "profile,time,survival\n";
    for (std::size_t r = 0; r < rows.size(); ++r) {
        Vector z(static_cast<Eigen::Index>(rows[r].size() + 1));
        z[0] = 1.0;
        for (std::size_t c = 0; c < rows[r].size(); ++c) z[static_cast<Eigen::Index>(c + 1)] = rows[r][c];
        for (double t : grid) {
            f << r + 1 << ',' << format_double(t) << ','
              << format_double(predict_survival(fit.output.paths, fit.partition, z, t)) << '\n';
        }
    }
    out << "wrote " << rows.size() << " survival curve(s) over " << grid.size() << " times\n";
    return kExitOk;
}

struct BenchOptions {
    std::size_t replicates = 20;
    std::vector<std::size_t> timing_n;
    std::vector<std::size_t> timing_j;
};

int cmd_bench(const Run& run, const SimOptions& s, const ModelOptions& m, const BenchOptions& b, std::ostream& out) {
    DgpConfig dgp;
    dgp.covariates = s.p;
    dgp.subjects = s.n;
    dgp.intervals = s.j;
    dgp.interval_width = s.width;
    dgp.censoring = s.pc;
    dgp.rw_sd = s.rw_sd;
    dgp.log_baseline = s.log_baseline;
    dgp.seed = run.seed;
    const Simulation sim = simulate_dgp(dgp);
    const ExpandedPanel panel = expand_exposures(sim.data.records, sim.partition);
    const DiscountPrior prior = prior_of(m);

    struct Method {
        const char* name;
        ProposalKind kind;
        std::vector<Matrix> means, vars;
        double cpu = 0.0;
    };
    std::vector<Method> methods{{"pslib", ProposalKind::LinearBayes, {}, {}, 0.0},
                                {"bootstrap", ProposalKind::Bootstrap, {}, {}, 0.0}};
    for (std::size_t r = 0; r < b.replicates; ++r) {
        for (auto& method : methods) {
            SmootherConfig cfg = smoother_config(m, run);
            cfg.proposal = method.kind;
            cfg.seed = Stream(run.seed, Phase::Split, 1, r)();
            const SmootherOutput o = run_two_filter_smoother(panel, sim.partition, prior, cfg);
            Matrix mean(static_cast<Eigen::Index>(o.intervals()), static_cast<Eigen::Index>(o.dim));
            Matrix var(mean.rows(), mean.cols());
            for (std::size_t j = 0; j < o.intervals(); ++j) {
                mean.row(static_cast<Eigen::Index>(j)) = o.smoothed_summary[j].mean.transpose();
                var.row(static_cast<Eigen::Index>(j)) = o.smoothed_summary[j].cov.diagonal().transpose();
            }
            method.means.push_back(mean);
            method.vars.push_back(var);
            method.cpu += o.diagnostics.cpu_seconds;
        }
    }
    const EssReport lb = ess_report(methods[0].means, methods[0].vars, methods[0].cpu / static_cast<double>(b.replicates));
    const EssReport bs = ess_report(methods[1].means, methods[1].vars, methods[1].cpu / static_cast<double>(b.replicates));

    ensure_dir(run.out);
    json report = run_json("bench", run);
    report["pslib"] = ess_json(lb, !run.deterministic);
    report["bootstrap"] = ess_json(bs, !run.deterministic);
    write_json(run.out / "ess_report.json", report);

    const auto names = coefficient_names(sim.data.covariate_names);
    std::size_t wins = 0;
    std::size_t cells = 0;
    {
        auto f = open_out(run.out / "ess_ratio.csv");
        f << "interval,coefficient,ess_pslib,ess_bootstrap,ess_ratio";
        if (!run.deterministic) f << ",ess_per_sec_pslib,ess_per_sec_bootstrap,ess_per_sec_ratio";
        f << '\n';
        for (Eigen::Index j = 0; j < lb.ess.rows(); ++j) {
            for (Eigen::Index c = 0; c < lb.ess.cols(); ++c) {
                f << j + 1 << ',' << names[static_cast<std::size_t>(c)] << ',' << format_double(lb.ess(j, c)) << ','
                  << format_double(bs.ess(j, c)) << ',' << format_double(lb.ess(j, c) / bs.ess(j, c));
                const double ratio = lb.ess_per_second(j, c) / bs.ess_per_second(j, c);
                if (!run.deterministic) {
                    f << ',' << format_double(lb.ess_per_second(j, c)) << ','
                      << format_double(bs.ess_per_second(j, c)) << ',' << format_double(ratio);
                }
                f << '\n';
                wins += ratio > 1.0 ? 1 : 0;
                ++cells;
            }
        }
    }

    const std::vector<std::size_t> ns = b.timing_n.empty() ? std::vector<std::size_t>{s.n} : b.timing_n;
    const std::vector<std::size_t> js = b.timing_j.empty() ? std::vector<std::size_t>{s.j} : b.timing_j;
    auto f = open_out(run.out / "timing.csv");
    f << "n,J,P,K";
    if (!run.deterministic) f << ",wall_seconds,cpu_seconds";
    f << '\n';
    for (std::size_t n : ns) {
        for (std::size_t J : js) {
            DgpConfig t = dgp;
            t.subjects = n;
            t.intervals = J;
            const Simulation ts = simulate_dgp(t);
            const ExpandedPanel tp = expand_exposures(ts.data.records, ts.partition);
            const SmootherOutput o = run_two_filter_smoother(tp, ts.partition, prior, smoother_config(m, run));
            f << n << ',' << J << ',' << s.p << ',' << m.particles;
            if (!run.deterministic) {
                f << ',' << format_double(o.diagnostics.wall_seconds) << ',' << format_double(o.diagnostics.cpu_seconds);
            }
            f << '\n';
        }
    }
    out << "ESS/sec favours linear-Bayes proposals in " << wins << " of " << cells << " interval-coefficient cells\n";
    return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Particle smoothing for piecewise exponential hazard models", "pslib"};
    app.option_defaults()->always_capture_default();
    app.require_subcommand(1);

    CommonOptions common;
    DataOptions data;
    ModelOptions model;
    SimOptions sim;
    BenchOptions bench;
    double test_fraction = 0.0;
    double grid_test_fraction = 0.2;
    bool dump_particles = false;
    std::vector<double> phis{0.45};
    std::vector<std::size_t> grid_events{30};
    std::vector<std::string> profiles;
    std::vector<double> times;
    std::size_t grid_points = 101;

    CLI::App* simulate = app.add_subcommand("simulate", "Simulate a dataset from the piecewise exponential DGP");
    add_common(simulate, common);
    add_sim(simulate, sim);

    CLI::App* fit = app.add_subcommand("fit", "Fit the two-filter particle smoother to a survival CSV");
    add_common(fit, common);
    add_data(fit, data);
    add_model(fit, model, true);
    fit->add_option("--test-fraction", test_fraction, "Hold out this fraction for WAIC")->check(kHalfOpenUnit);
    fit->add_flag("--dump-particles", dump_particles, "Write smoothing particles to particles.bin");

    CLI::App* grid = app.add_subcommand("waic-grid", "WAIC over a grid of discount factors and events per interval");
    add_common(grid, common);
    add_data(grid, data);
    add_model(grid, model, false);
    grid->add_option("--test-fraction", grid_test_fraction, "Held-out fraction")->check(kHalfOpenUnit);
    grid->add_option("--phis", phis, "Discount factors")->check(kOpenUnit);
    grid->add_option("--events-grid", grid_events, "Events per interval")->check(CLI::PositiveNumber);

    CLI::App* predict = app.add_subcommand("predict", "Fit, then write posterior survival curves");
    add_common(predict, common);
    add_data(predict, data);
    add_model(predict, model, true);
    predict->add_option("--profile", profiles, "Comma-separated covariate values on the input scale (repeatable)");
    predict->add_option("--times", times, "Evaluation times (default: uniform grid on [0, tau_J])");
    predict->add_option("--grid-points", grid_points, "Grid size when --times is absent");

    CLI::App* benchcmd = app.add_subcommand("bench", "ESS benchmark of linear-Bayes against bootstrap proposals");
    add_common(benchcmd, common);
    add_sim(benchcmd, sim);
    add_model(benchcmd, model, false);
    benchcmd->add_option("--replicates", bench.replicates, "Replicate runs per method (M)")
        ->check(CLI::Range(std::size_t{2}, std::size_t{1} << 20));
    benchcmd->add_option("--timing-n", bench.timing_n, "Sample sizes for the timing table");
    benchcmd->add_option("--timing-j", bench.timing_j, "Interval counts for the timing table");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
        CLI::App* sub = app.get_subcommands().front();
        if (!common.config.empty()) apply_config_file(sub, common.config);
        if (sub != simulate) apply_preset(sub, model);
        if (sub == grid && (phis.empty() || grid_events.empty())) {
            throw CLI::ValidationError("grid", "the phi and E grids must not be empty");
        }
        const Run run = resolve_run(sub, common);
        if (common.dump_config) {
            out << run.config.dump(2) << '\n';
            return kExitOk;
        }
        if (sub == simulate) return cmd_simulate(run, sim, out);
        if (sub == fit) return cmd_fit(run, data, model, test_fraction, dump_particles, out);
        if (sub == grid) return cmd_waic_grid(run, data, model, grid_test_fraction, phis, grid_events, out);
        if (sub == predict) return cmd_predict(run, data, model, profiles, times, grid_points, out);
        return cmd_bench(run, sim, model, bench, out);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run_cli(args, out, err);
}

}  // namespace pslib
