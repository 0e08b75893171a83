// mpcloc: Monte-Carlo sweeps, likelihood surfaces, delay-model calibration
// and scenario dumps.

#include "mpcloc/mpcloc.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <map>
#include <string>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitConfig = 2;
constexpr int kExitCalibration = 3;

struct Flags {
    std::string config_path;
    std::map<std::string, std::string> values;
};

// Registers a string-valued long flag whose value lands in flags.values
// under the flag name (without dashes).
void add_flag(CLI::App* app, Flags& flags, const std::string& name, const std::string& help) {
    app->add_option_function<std::string>(
        "--" + name, [&flags, name](const std::string& v) { flags.values[name] = v; }, help);
}

void add_common(CLI::App* app, Flags& flags) {
    app->add_option("--config", flags.config_path, "key = value configuration file (flags override it)");
    add_flag(app, flags, "d", "distance(s) in m: value, list a,b,c or range lo:hi:step");
    add_flag(app, flags, "sigma-ns", "delay-difference error std dev [ns]");
    add_flag(app, flags, "sigma-dir-deg", "direction error std dev(s) [deg]");
    add_flag(app, flags, "observers", "number of observers M");
    add_flag(app, flags, "mpcs-per-observer", "MPCs per observer K_o (list or range for mpc_count sweeps)");
    add_flag(app, flags, "trials", "Monte-Carlo trials per sweep point");
    add_flag(app, flags, "trials-na", "trials for the unknown-association MLE");
    add_flag(app, flags, "seed", "master seed");
    add_flag(app, flags, "estimators", "comma-separated subset of MV,NA,SO,DD,PWA,DDN,TAU,TNA");
    add_flag(app, flags, "out", "output CSV path (default stdout)");
    add_flag(app, flags, "eps-ns", "A-B clock offset [ns]");
    add_flag(app, flags, "eps-a-max-ns", "observer clock offsets drawn from U(0, value) [ns]");
    add_flag(app, flags, "threads", "worker threads (0: all cores)");
    add_flag(app, flags, "sort-scope", "SO delay sort: observer or pooled");
    add_flag(app, flags, "selection", "MPC selection from the SV rays: range or power");
    add_flag(app, flags, "dynamic-range-db", "dynamic range for range selection [dB]");
    add_flag(app, flags, "window-ns", "SV ray generation window [ns]");
    add_flag(app, flags, "cluster-mean-ns", "SV mean cluster inter-arrival time [ns]");
    add_flag(app, flags, "ray-mean-ns", "SV mean ray inter-arrival time [ns]");
    add_flag(app, flags, "cluster-decay-ns", "SV cluster power decay time constant [ns]");
    add_flag(app, flags, "ray-decay-ns", "SV ray power decay time constant [ns]");
    add_flag(app, flags, "draws-per-channel", "delays drawn per channel realization when calibrating");
}

mpcloc::ExperimentConfig build_config(const Flags& flags, mpcloc::ExperimentConfig cfg) {
    if (!flags.config_path.empty()) mpcloc::apply_settings(cfg, mpcloc::read_key_value_file(flags.config_path));
    mpcloc::apply_settings(cfg, flags.values);
    cfg.validate();
    return cfg;
}

template <typename WriteFn>
void emit(const std::string& path, WriteFn&& write) {
    if (path.empty()) {
        write(std::cout);
        return;
    }
    std::ofstream out(path);
    if (!out) throw mpcloc::ConfigError("cannot open output file '" + path + "'");
    write(out);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"MPC-based relative localization toolkit"};
    app.require_subcommand(1);

    Flags sweep_flags, surface_flags, calib_flags, dump_flags;

    auto* sweep = app.add_subcommand("sweep", "RMSE sweep over distance, direction error or MPC count");
    add_common(sweep, sweep_flags);
    add_flag(sweep, sweep_flags, "sweep", "distance, direction_error or mpc_count");

    auto* surface = app.add_subcommand("surface", "likelihood surface of the two-wall example scenario");
    add_common(surface, surface_flags);
    add_flag(surface, surface_flags, "assoc", "known or none");
    add_flag(surface, surface_flags, "grid-d-max", "largest distance hypothesis [m]");
    add_flag(surface, surface_flags, "grid-eps-span-ns", "half-width of the clock offset grid around eps [ns]");
    add_flag(surface, surface_flags, "grid-steps", "grid points per axis");

    auto* calib = app.add_subcommand("calibrate", "mean excess delay and RMS delay spread of the delay sampler");
    add_common(calib, calib_flags);
    add_flag(calib, calib_flags, "samples", "number of sampled delays");

    auto* dump = app.add_subcommand("scenario-dump", "one random scenario with its observations as CSV");
    add_common(dump, dump_flags);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (sweep->parsed()) {
            mpcloc::ExperimentConfig defaults;
            defaults.sigma_dir_values = mpcloc::parse_number_list("sigma-dir-deg", "0:24:2");
            for (double& v : defaults.sigma_dir_values) v = mpcloc::deg2rad(v);
            auto cfg = build_config(sweep_flags, defaults);
            if (cfg.sweep == mpcloc::SweepKind::surface || cfg.sweep == mpcloc::SweepKind::calibrate)
                throw mpcloc::ConfigError("use the surface / calibrate subcommands for those sweeps");
            const auto res = mpcloc::run_sweep(cfg);
            emit(cfg.output_path, [&](std::ostream& os) { mpcloc::write_sweep_csv(os, res); });
        } else if (surface->parsed()) {
            mpcloc::ExperimentConfig defaults;
            defaults.sweep = mpcloc::SweepKind::surface;
            defaults.d = 2.5;
            defaults.sigma = 0.0;
            auto cfg = build_config(surface_flags, defaults);
            const auto cells = mpcloc::dump_surface(cfg);
            emit(cfg.output_path, [&](std::ostream& os) { mpcloc::write_surface_csv(os, cells); });
        } else if (calib->parsed()) {
            mpcloc::ExperimentConfig defaults;
            defaults.sweep = mpcloc::SweepKind::calibrate;
            auto cfg = build_config(calib_flags, defaults);
            const auto report = mpcloc::calibrate(cfg);
            emit(cfg.output_path, [&](std::ostream& os) { mpcloc::write_calibration_csv(os, report); });
            if (!report.passed()) return kExitCalibration;
        } else if (dump->parsed()) {
            auto cfg = build_config(dump_flags, {});
            const std::vector<int> ks(static_cast<std::size_t>(cfg.m_observers), cfg.k_per_observer);
            const auto sc = mpcloc::sample_scenario(cfg.d, cfg.sv, cfg.m_observers, ks,
                                                    mpcloc::derive_seed(cfg.seed, {mpcloc::stream::kScenario}));
            mpcloc::NoiseParams noise;
            noise.sigma = cfg.sigma;
            noise.sigma_dir = cfg.sigma_dir;
            noise.eps = cfg.eps;
            auto eng = mpcloc::make_engine(cfg.seed, {mpcloc::stream::kOffsets});
            std::uniform_real_distribution<double> offset(0.0, cfg.eps_a_max);
            for (int o = 0; o < cfg.m_observers; ++o)
                noise.eps_a_per_observer.push_back(cfg.eps_a_max > 0.0 ? offset(eng) : 0.0);
            const auto obs = mpcloc::observe(sc, noise, mpcloc::derive_seed(cfg.seed, {mpcloc::stream::kNoise}));
            emit(cfg.output_path, [&](std::ostream& os) { mpcloc::write_observation_csv(os, sc, obs); });
        }
    } catch (const mpcloc::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitError;
    }
    return kExitOk;
}
