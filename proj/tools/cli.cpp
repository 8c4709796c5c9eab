#include "cli.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <limits>
#include <set>
#include <fstream>
#include <iostream>
#include <sstream>

#include "mou/errors.hpp"
#include "mou/estimators.hpp"
#include "mou/experiments.hpp"
#include "mou/io.hpp"
#include "mou/synth.hpp"

#ifndef MOU_VERSION_STRING
#define MOU_VERSION_STRING "mou-0.1.0"
#endif

namespace mou::cli {

namespace fs = std::filesystem;

namespace {

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

/// Typed access to a flat config map with defaults, consumed-key tracking,
/// and an effective-config dump for the manifest.
class ConfigView {
public:
    explicit ConfigView(std::map<std::string, std::string> kv) : kv_(std::move(kv)) {}

    std::string get_string(const std::string& key, const std::string& fallback) {
        effective_[key] = fallback;
        auto it = kv_.find(key);
        if (it == kv_.end()) return fallback;
        consumed_.insert(key);
        effective_[key] = it->second;
        return it->second;
    }

    std::optional<std::string> get_optional(const std::string& key) {
        auto it = kv_.find(key);
        if (it == kv_.end()) return std::nullopt;
        consumed_.insert(key);
        effective_[key] = it->second;
        return it->second;
    }

    double get_double(const std::string& key, double fallback) {
        auto raw = get_optional(key);
        if (!raw) {
            effective_[key] = io::format_double(fallback);
            return fallback;
        }
        try {
            return std::stod(*raw);
        } catch (const std::exception&) {
            throw ConfigError("config key '" + key + "': expected a number, got '" +
                              *raw + "'");
        }
    }

    long get_int(const std::string& key, long fallback) {
        auto raw = get_optional(key);
        if (!raw) {
            effective_[key] = std::to_string(fallback);
            return fallback;
        }
        try {
            return std::stol(*raw);
        } catch (const std::exception&) {
            throw ConfigError("config key '" + key + "': expected an integer, got '" +
                              *raw + "'");
        }
    }

    bool get_bool(const std::string& key, bool fallback) {
        auto raw = get_optional(key);
        if (!raw) {
            effective_[key] = fallback ? "true" : "false";
            return fallback;
        }
        if (*raw == "true" || *raw == "1") return true;
        if (*raw == "false" || *raw == "0") return false;
        throw ConfigError("config key '" + key + "': expected true/false, got '" + *raw +
                          "'");
    }

    std::vector<int> get_int_list(const std::string& key, const std::string& fallback) {
        const std::string raw = get_string(key, fallback);
        std::vector<int> out;
        std::stringstream ss(raw);
        std::string item;
        while (std::getline(ss, item, ',')) {
            item = trim(item);
            if (item.empty()) continue;
            try {
                out.push_back(std::stoi(item));
            } catch (const std::exception&) {
                throw ConfigError("config key '" + key + "': expected a comma-separated "
                                  "integer list, got '" + raw + "'");
            }
        }
        if (out.empty()) {
            throw ConfigError("config key '" + key + "': empty list");
        }
        return out;
    }

    void reject_unknown() const {
        for (const auto& [key, value] : kv_) {
            if (!consumed_.count(key)) {
                throw ConfigError("unknown config key '" + key + "'");
            }
        }
    }

    const std::map<std::string, std::string>& effective() const { return effective_; }

private:
    std::map<std::string, std::string> kv_;
    std::set<std::string> consumed_;
    std::map<std::string, std::string> effective_;
};

SweepOptions sweep_options_from(ConfigView& view, int workers) {
    SweepOptions opts;
    opts.density = view.get_double("density", 0.2);
    opts.tau_x = view.get_double("tau_x", 1.0);
    opts.euler_dt = view.get_double("euler_dt", 0.05);
    opts.sample_interval = view.get_double("sample_interval", 1.0);
    opts.lag_steps = static_cast<int>(view.get_int("lag_steps", 1));
    opts.fit.learning_rate_j = view.get_double("learning_rate_j", 1e-2);
    opts.fit.learning_rate_sigma = view.get_double("learning_rate_sigma", 1e-1);
    opts.fit.max_iters = static_cast<int>(view.get_int("max_iters", 10000));
    opts.fit.stop_patience = static_cast<int>(view.get_int("stop_patience", 1000));
    opts.fit.clamp_nonnegative = view.get_bool("clamp_nonnegative", true);
    opts.workers = workers;
    return opts;
}

void write_manifest_for(const RunConfig& cfg, const ConfigView& view,
                        const std::vector<std::string>& outputs) {
    io::write_manifest(cfg.output_dir / "manifest.json", cfg.command, view.effective(),
                       cfg.seed, cfg.workers, MOU_VERSION_STRING, outputs);
}

int dispatch(const RunConfig& cfg, const std::map<std::string, std::string>& kv);

int cmd_simulate(const RunConfig& cfg, ConfigView& view) {
    const int m = static_cast<int>(view.get_int("m", 10));
    const int n = static_cast<int>(view.get_int("n_samples", 500));
    SweepOptions opts = sweep_options_from(view, cfg.workers);
    view.reject_unknown();

    Rng rng(cfg.seed);
    StableDraw draw = draw_stable_params(NetworkConfig{m, opts.density, 0.0, 1.0, cfg.seed},
                                         opts.tau_x, rng);
    std::cout << "drew a stable system after " << draw.rejected << " rejected draws\n";
    TimeSeries x = simulate(draw.params, n * opts.sample_interval, opts.euler_dt,
                            opts.sample_interval, rng);
    io::write_timeseries_csv(cfg.output_dir / "timeseries.csv", x);
    io::write_matrix_csv(cfg.output_dir / "c_true.csv", draw.params.connectivity, "node_");
    io::write_vector_csv(cfg.output_dir / "sigma_true.csv", draw.params.sigma_diag,
                         "sigma");
    write_manifest_for(cfg, view, {"timeseries.csv", "c_true.csv", "sigma_true.csv"});
    return 0;
}

int cmd_estimate(const RunConfig& cfg, ConfigView& view) {
    const std::string input = view.get_string("input", "");
    if (input.empty()) {
        throw ConfigError("estimate: config key 'input' is required");
    }
    const std::string method_name = view.get_string("method", "bayesian");
    const Method method = method_from_string(method_name);
    const int lag_steps = static_cast<int>(view.get_int("lag_steps", 1));
    std::optional<double> dt_config;
    if (auto raw = view.get_optional("dt")) dt_config = std::stod(*raw);
    const auto truth_c = view.get_optional("truth_c");
    const auto truth_sigma = view.get_optional("truth_sigma");
    const auto mask_path = view.get_optional("mask");
    SweepOptions opts = sweep_options_from(view, cfg.workers);
    view.reject_unknown();

    TimeSeries x = load_timeseries(input, cfg.dt_flag, dt_config);

    Estimate est;
    if (method == Method::bayesian) {
        est = bayesian_estimate(x);
    } else if (method == Method::moments) {
        est = moments_estimate(empirical_moments(x, lag_steps));
    } else {
        LyapunovFitConfig fit_cfg = opts.fit;
        fit_cfg.tau_x_init = opts.tau_x;
        if (mask_path) fit_cfg.mask = io::load_matrix_csv(*mask_path);
        est = lyapunov_fit(empirical_moments(x, lag_steps), fit_cfg);
    }

    std::optional<AccuracyResult> acc;
    if (truth_c) {
        RealMatrix c_true = io::load_matrix_csv(*truth_c);
        RealVector sigma_true =
            truth_sigma ? io::load_vector_csv(*truth_sigma) : est.sigma_hat;
        acc = accuracy(c_true, sigma_true, est);
        if (!truth_sigma) acc->accuracy_sigma = std::numeric_limits<double>::quiet_NaN();
    }
    std::vector<std::string> files =
        io::write_estimate(cfg.output_dir, est, acc ? &*acc : nullptr);
    write_manifest_for(cfg, view, files);
    return 0;
}

int cmd_sweep(const RunConfig& cfg, ConfigView& view, bool by_nodes) {
    std::vector<int> grid;
    int fixed;
    if (by_nodes) {
        grid = view.get_int_list("m_values", "10,30,60");
        fixed = static_cast<int>(view.get_int("n", 500));
    } else {
        grid = view.get_int_list("n_values", "250,500,1000,2000");
        fixed = static_cast<int>(view.get_int("m", 50));
    }
    const int repeats = static_cast<int>(view.get_int("repeats", 100));
    SweepOptions opts = sweep_options_from(view, cfg.workers);
    view.reject_unknown();

    std::vector<AccuracyRecord> records =
        by_nodes ? sweep_nodes(grid, fixed, repeats, cfg.seed, opts)
                 : sweep_samples(grid, fixed, repeats, cfg.seed, opts);
    io::write_accuracy_csv(cfg.output_dir / "accuracy.csv", records);
    write_manifest_for(cfg, view, {"accuracy.csv"});
    return 0;
}

int cmd_diagnose(const RunConfig& cfg, ConfigView& view) {
    const std::vector<int> m_values = view.get_int_list("m_values", "10,50,100");
    const int n = static_cast<int>(view.get_int("n", 500));
    const int repeats = static_cast<int>(view.get_int("repeats", 100));
    SweepOptions opts = sweep_options_from(view, cfg.workers);
    view.reject_unknown();

    std::vector<DiagnosisRecord> records = diagnose_bayes(m_values, n, repeats, cfg.seed, opts);
    io::write_diagnosis_csv(cfg.output_dir / "diagnosis.csv", records);
    write_manifest_for(cfg, view, {"diagnosis.csv"});
    return 0;
}

int cmd_classify(const RunConfig& cfg, ConfigView& view) {
    CohortConfig cohort;
    cohort.subjects = static_cast<int>(view.get_int("subjects", 30));
    cohort.sessions = static_cast<int>(view.get_int("sessions", 10));
    cohort.m = static_cast<int>(view.get_int("m", 50));
    cohort.n = static_cast<int>(view.get_int("n", 300));
    cohort.train_fraction = view.get_double("train_fraction", 0.8);
    cohort.repetitions = static_cast<int>(view.get_int("repetitions", 100));
    cohort.seed = cfg.seed;
    const std::string mask_kind = view.get_string("feature_mask", "true-adjacency");
    if (mask_kind == "true-adjacency") {
        cohort.feature_mask = CohortConfig::FeatureMask::true_adjacency;
    } else if (mask_kind == "full") {
        cohort.feature_mask = CohortConfig::FeatureMask::full;
    } else {
        throw ConfigError("classify: feature_mask must be 'true-adjacency' or 'full'");
    }
    const bool shuffle_labels = view.get_bool("shuffle_labels", false);
    std::vector<Method> methods;
    {
        std::stringstream ss(view.get_string("methods", "bayesian,lyapunov"));
        std::string item;
        while (std::getline(ss, item, ',')) {
            methods.push_back(method_from_string(trim(item)));
        }
    }
    SweepOptions opts = sweep_options_from(view, cfg.workers);
    cohort.density = opts.density;
    view.reject_unknown();

    auto result = classify_experiment(cohort, methods, opts, shuffle_labels);
    std::vector<std::string> files;
    for (std::size_t i = 0; i < methods.size(); ++i) {
        std::string name = std::string("classify_") + to_string(methods[i]) +
                           (shuffle_labels ? "_null" : "") + ".csv";
        io::write_classify_csv(cfg.output_dir / name, result[i]);
        files.push_back(name);
    }
    write_manifest_for(cfg, view, files);
    return 0;
}

int cmd_rerun(const RunConfig& cfg) {
    io::Manifest manifest = io::load_manifest(cfg.config_path);
    RunConfig replay;
    replay.command = manifest.command;
    replay.output_dir = cfg.output_dir;
    replay.seed = manifest.seed;
    replay.workers = cfg.workers;
    return dispatch(replay, manifest.config);
}

int dispatch(const RunConfig& cfg, const std::map<std::string, std::string>& kv) {
    ConfigView view(kv);
    if (cfg.command == "simulate") return cmd_simulate(cfg, view);
    if (cfg.command == "estimate") return cmd_estimate(cfg, view);
    if (cfg.command == "sweep-nodes") return cmd_sweep(cfg, view, true);
    if (cfg.command == "sweep-samples") return cmd_sweep(cfg, view, false);
    if (cfg.command == "diagnose") return cmd_diagnose(cfg, view);
    if (cfg.command == "classify") return cmd_classify(cfg, view);
    throw ConfigError("unknown command '" + cfg.command + "'");
}

}  // namespace

std::map<std::string, std::string> load_config_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot read config file '" + path.string() + "'");
    }
    std::map<std::string, std::string> kv;
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string stripped = trim(line);
        if (stripped.empty() || stripped[0] == '#') continue;
        const auto eq = stripped.find('=');
        if (eq == std::string::npos) {
            throw FormatError("config line " + std::to_string(line_no) +
                              ": expected key = value");
        }
        const std::string key = trim(stripped.substr(0, eq));
        const std::string value = trim(stripped.substr(eq + 1));
        if (key.empty()) {
            throw FormatError("config line " + std::to_string(line_no) + ": empty key");
        }
        kv[key] = value;
    }
    return kv;
}

TimeSeries load_timeseries(const fs::path& csv_path, std::optional<double> dt_flag,
                           std::optional<double> dt_config) {
    double dt = 0.0;
    if (dt_flag) {
        dt = *dt_flag;
    } else if (dt_config) {
        dt = *dt_config;
    } else {
        const fs::path sidecar = csv_path.parent_path() / "manifest.json";
        if (!fs::exists(sidecar)) {
            throw FormatError("no sample interval: pass --dt, set 'dt' in the config, or "
                              "keep manifest.json next to '" + csv_path.string() + "'");
        }
        io::Manifest manifest = io::load_manifest(sidecar);
        auto it = manifest.config.find("sample_interval");
        if (it == manifest.config.end()) {
            throw FormatError("manifest next to '" + csv_path.string() +
                              "' has no sample_interval");
        }
        dt = std::stod(it->second);
    }
    return io::load_timeseries(csv_path, dt);
}

std::optional<RunConfig> parse_args(const std::vector<std::string>& args) {
    CLI::App app{"network-model estimation experiments"};
    app.require_subcommand(1);

    RunConfig cfg;
    std::string out_dir;
    double dt_flag = 0.0;

    auto add_common = [&](CLI::App* sub, bool needs_config) {
        if (needs_config) {
            sub->add_option("--config", cfg.config_path, "flat key=value config file")
                ->required();
        }
        sub->add_option("--out", out_dir, "output directory")->required();
        sub->add_option("--seed", cfg.seed, "base seed");
        sub->add_option("--workers", cfg.workers, "worker threads")
            ->check(CLI::PositiveNumber);
    };

    for (const char* name : {"simulate", "estimate", "sweep-nodes", "sweep-samples",
                             "diagnose", "classify"}) {
        CLI::App* sub = app.add_subcommand(name);
        add_common(sub, true);
        if (std::string(name) == "estimate") {
            sub->add_option("--dt", dt_flag, "sample interval of the input series");
        }
        sub->callback([&cfg, name] { cfg.command = name; });
    }
    {
        CLI::App* sub = app.add_subcommand("rerun", "re-run a saved manifest");
        sub->add_option("--manifest", cfg.config_path, "manifest.json of a previous run")
            ->required();
        sub->add_option("--out", out_dir, "output directory")->required();
        sub->add_option("--workers", cfg.workers, "worker threads")
            ->check(CLI::PositiveNumber);
        sub->callback([&cfg] { cfg.command = "rerun"; });
    }

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        std::cout << app.help();
        return std::nullopt;
    } catch (const CLI::ParseError& e) {
        throw ConfigError(std::string("usage error: ") + e.what());
    }

    if (const char* env = std::getenv("MOU_OUTPUT_DIR"); env && *env) {
        out_dir = env;
    }
    cfg.output_dir = out_dir;
    for (const auto* sub : app.get_subcommands()) {
        if (sub->get_name() == "estimate" && sub->count("--dt") > 0) {
            cfg.dt_flag = dt_flag;
        }
    }
    return cfg;
}

int run(const RunConfig& cfg) {
    try {
        std::error_code ec;
        fs::create_directories(cfg.output_dir, ec);
        if (ec) {
            throw IoError("cannot create output directory '" + cfg.output_dir.string() +
                          "': " + ec.message());
        }
        if (cfg.command == "rerun") {
            return cmd_rerun(cfg);
        }
        return dispatch(cfg, load_config_file(cfg.config_path));
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const IoError& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return 4;
    } catch (const FormatError& e) {
        std::cerr << "format error: " << e.what() << "\n";
        return 4;
    } catch (const Error& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return 3;
    }
}

int main_entry(int argc, const char* const* argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    try {
        std::optional<RunConfig> cfg = parse_args(args);
        if (!cfg) return 0;  // help
        return run(*cfg);
    } catch (const ConfigError& e) {
        std::cerr << e.what() << "\n";
        return 2;
    }
}

}  // namespace mou::cli
