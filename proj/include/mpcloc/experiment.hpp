#pragma once

// Monte-Carlo evaluation harness: RMSE sweeps over distance, direction error
// and MPC count, likelihood-surface dumps and delay-model calibration.

#include "mpcloc/assoc.hpp"
#include "mpcloc/chansim.hpp"
#include "mpcloc/core.hpp"
#include "mpcloc/distest.hpp"
#include "mpcloc/likelihood.hpp"
#include "mpcloc/posest.hpp"
#include "mpcloc/rng.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace mpcloc {

enum class SweepKind { distance, direction_error, mpc_count, surface, calibrate };

enum class Pipeline { MV, NA, SO, DD, PWA, DDN, TAU, TNA };

inline constexpr Pipeline kAllPipelines[] = {Pipeline::MV,  Pipeline::NA,  Pipeline::SO,  Pipeline::DD,
                                             Pipeline::PWA, Pipeline::DDN, Pipeline::TAU, Pipeline::TNA};

constexpr std::string_view to_string(Pipeline p) {
    switch (p) {
        case Pipeline::MV: return "MV";
        case Pipeline::NA: return "NA";
        case Pipeline::SO: return "SO";
        case Pipeline::DD: return "DD";
        case Pipeline::PWA: return "PWA";
        case Pipeline::DDN: return "DDN";
        case Pipeline::TAU: return "TAU";
        case Pipeline::TNA: return "TNA";
    }
    return "?";
}

inline Pipeline parse_pipeline(const std::string& tag) {
    for (Pipeline p : kAllPipelines)
        if (tag == to_string(p)) return p;
    throw ConfigError("unknown estimator tag '" + tag + "'");
}

/// Distance pipelines report d_hat - d, position pipelines ||d_hat - d||.
constexpr bool is_position_pipeline(Pipeline p) {
    return p == Pipeline::DD || p == Pipeline::PWA || p == Pipeline::DDN || p == Pipeline::TAU || p == Pipeline::TNA;
}

/// Scope of the delay sort used by the SO pipeline.
enum class SortScope { per_observer, pooled };

struct ExperimentConfig {
    SweepKind sweep = SweepKind::distance;
    std::vector<double> d_values = {0, 1, 2, 3, 4, 5, 6, 7, 8};  // [m], distance sweep
    std::vector<double> sigma_dir_values;                       // [rad], direction sweep
    std::vector<int> k_values = {2, 3, 4, 5, 6, 7, 8};          // per observer, MPC-count sweep
    double d = 2.0;                                             // [m]
    double sigma = 0.2e-9;                                      // [s]
    double sigma_dir = 0.0;                                     // [rad]
    int m_observers = 3;
    int k_per_observer = 4;
    int trials = 1000;
    int trials_na = 200;
    std::uint64_t seed = 1;
    std::vector<Pipeline> estimators = {Pipeline::MV,  Pipeline::NA,  Pipeline::SO,  Pipeline::DD,
                                        Pipeline::PWA, Pipeline::DDN, Pipeline::TAU, Pipeline::TNA};
    SvParams sv;
    double eps = 5e-9;         // [s]
    double eps_a_max = 0.0;    // eps_o^A ~ U(0, eps_a_max) per observer and trial [s]
    SortScope sort_scope = SortScope::pooled;
    AssocConfig assoc;
    OptimizerConfig optimizer;
    int threads = 0;           // 0: hardware concurrency
    std::string output_path;   // empty: stdout

    // surface dump
    bool surface_known_assoc = true;
    double surface_d_max = 5.0;      // [m]
    double surface_eps_span = 10e-9; // half-width around eps [s]
    int surface_steps = 101;

    // calibration
    std::size_t calibrate_samples = 1000000;

    void validate() const {
        if (trials < 1 || trials_na < 1) throw ConfigError("trials must be >= 1");
        if (m_observers < 1 || k_per_observer < 1) throw ConfigError("observers and MPCs per observer must be >= 1");
        if (!(sigma >= 0.0) || !(sigma_dir >= 0.0)) throw ConfigError("noise levels must be non-negative");
        if (!(d >= 0.0)) throw ConfigError("d must be non-negative");
        if (!(eps_a_max >= 0.0)) throw ConfigError("eps_a_max must be non-negative");
        if (estimators.empty()) throw ConfigError("no estimators selected");
        if (sweep == SweepKind::distance && d_values.empty()) throw ConfigError("empty distance range");
        if (sweep == SweepKind::direction_error && sigma_dir_values.empty()) throw ConfigError("empty sigma_dir range");
        if (sweep == SweepKind::mpc_count && k_values.empty()) throw ConfigError("empty MPC-count range");
        for (double v : d_values)
            if (!(v >= 0.0)) throw ConfigError("distances must be non-negative");
        for (int k : k_values)
            if (k < 1) throw ConfigError("MPC counts must be >= 1");
        if (surface_steps < 2 || !(surface_d_max > 0.0) || !(surface_eps_span > 0.0))
            throw ConfigError("invalid surface grid");
        if (calibrate_samples < 2) throw ConfigError("calibration needs at least two samples");
        try {
            sv.validate();
            assoc.validate();
        } catch (const InvalidParams& e) {
            throw ConfigError(e.what());
        }
    }
};

struct SweepRow {
    std::string sweep_param;
    double value = 0.0;
    Pipeline estimator = Pipeline::MV;
    int trials = 0;
    int failures = 0;
    double rmse = 0.0;      // meters
    double mean_err = 0.0;  // meters
};

struct SweepResult {
    std::vector<SweepRow> rows;

    const SweepRow* find(Pipeline p, double value) const {
        for (const auto& r : rows)
            if (r.estimator == p && std::abs(r.value - value) <= 1e-12 * std::max(1.0, std::abs(value))) return &r;
        return nullptr;
    }
};

inline constexpr const char* kSweepCsvHeader = "sweep_param,value,estimator,trials,failures,rmse_m,mean_err_m";

inline std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

inline void write_sweep_csv(std::ostream& os, const SweepResult& res) {
    os << kSweepCsvHeader << '\n';
    for (const auto& r : res.rows)
        os << r.sweep_param << ',' << format_double(r.value) << ',' << to_string(r.estimator) << ',' << r.trials << ','
           << r.failures << ',' << format_double(r.rmse) << ',' << format_double(r.mean_err) << '\n';
}

// ---------------------------------------------------------------------------
// Single trial

struct TrialSetup {
    double d = 2.0;
    double sigma = 0.2e-9;
    double sigma_dir = 0.0;
    int m_observers = 3;
    int k_per_observer = 4;
};

/// Error of each selected pipeline for one trial; nullopt marks a failure.
using TrialErrors = std::vector<std::optional<double>>;

namespace detail {

inline std::vector<std::vector<double>> side_delays(const std::vector<MpcObservation>& obs, bool b_side) {
    std::vector<std::vector<double>> out;
    for (const auto& r : observer_ranges(obs)) {
        out.emplace_back();
        for (std::size_t i = r.first; i < r.last; ++i) out.back().push_back(b_side ? obs[i].tau_b_meas : obs[i].tau_a_meas);
    }
    return out;
}

// Delay differences after matching the i-th smallest A delay with the
// i-th smallest B delay, either per observer or over all observers at once.
inline DelayDiffSet sorted_diffs(const std::vector<MpcObservation>& obs, SortScope scope) {
    if (scope == SortScope::per_observer) {
        std::vector<int> ids;
        const auto [a, b] = split_sides(obs, &ids);
        return DelayDiffSet::from_observations(apply_assignment(obs, associate_by_sorting(a, b, ids)));
    }
    std::vector<double> ta, tb;
    for (const auto& m : obs) {
        ta.push_back(m.tau_a_meas);
        tb.push_back(m.tau_b_meas);
    }
    std::sort(ta.begin(), ta.end());
    std::sort(tb.begin(), tb.end());
    std::vector<double> diffs(ta.size());
    for (std::size_t i = 0; i < ta.size(); ++i) diffs[i] = tb[i] - ta[i];
    return DelayDiffSet::single(std::move(diffs));
}

inline std::vector<MpcObservation> hungarian_associated(const std::vector<MpcObservation>& scrambled,
                                                        const AssocConfig& cfg) {
    std::vector<int> ids;
    const auto [a, b] = split_sides(scrambled, &ids);
    return apply_assignment(scrambled, associate(a, b, cfg, ids));
}

}  // namespace detail

/// Runs every selected pipeline on one random scenario. `run_na` gates the
/// costly unknown-association MLE.
inline TrialErrors run_trial(const ExperimentConfig& cfg, const TrialSetup& setup, std::uint64_t trial_seed,
                             bool run_na) {
    const std::vector<int> ks(static_cast<std::size_t>(setup.m_observers), setup.k_per_observer);
    const Scenario sc = sample_scenario(setup.d, cfg.sv, setup.m_observers, ks, derive_seed(trial_seed, {stream::kScenario}));

    NoiseParams noise;
    noise.sigma = setup.sigma;
    noise.sigma_dir = setup.sigma_dir;
    noise.eps = cfg.eps;
    Engine off = make_engine(trial_seed, {stream::kOffsets});
    std::uniform_real_distribution<double> offset(0.0, cfg.eps_a_max);
    for (int o = 0; o < setup.m_observers; ++o) noise.eps_a_per_observer.push_back(cfg.eps_a_max > 0.0 ? offset(off) : 0.0);

    const auto obs = observe(sc, noise, derive_seed(trial_seed, {stream::kNoise}));
    const auto scrambled = scramble_association(obs, derive_seed(trial_seed, {stream::kScramble})).obs;
    const Vec3 d_true = sc.relative_position();
    const double c = sc.c;

    std::optional<std::vector<MpcObservation>> hungarian;
    auto associated = [&]() -> const std::vector<MpcObservation>& {
        if (!hungarian) hungarian = detail::hungarian_associated(scrambled, cfg.assoc);
        return *hungarian;
    };

    TrialErrors out;
    for (Pipeline p : cfg.estimators) {
        std::optional<double> err;
        try {
            switch (p) {
                case Pipeline::MV:
                    err = mvue_async(DelayDiffSet::from_observations(obs), c).d_hat - setup.d;
                    break;
                case Pipeline::NA:
                    if (run_na) {
                        const ErrorModel model =
                            setup.sigma > 0.0 ? ErrorModel::gaussian(setup.sigma) : ErrorModel::noiseless();
                        OptimizerConfig oc = cfg.optimizer;
                        oc.c = c;
                        err = mle_async_noassoc(detail::side_delays(scrambled, false),
                                                detail::side_delays(scrambled, true), model, oc)
                                  .d_hat -
                              setup.d;
                    }
                    break;
                case Pipeline::SO:
                    err = mvue_async(detail::sorted_diffs(scrambled, cfg.sort_scope), c).d_hat - setup.d;
                    break;
                case Pipeline::DD: err = (lse_by_delta(obs, c).d_vec - d_true).norm(); break;
                case Pipeline::PWA: err = (lse_by_delta_pwa(obs, c).d_vec - d_true).norm(); break;
                case Pipeline::DDN: err = (lse_by_delta(associated(), c).d_vec - d_true).norm(); break;
                case Pipeline::TAU: err = (lse_by_tau(obs, c).d_vec - d_true).norm(); break;
                case Pipeline::TNA: err = (lse_by_tau(associated(), c).d_vec - d_true).norm(); break;
            }
        } catch (const Error&) {
            err.reset();
        }
        if (err && !std::isfinite(*err)) err.reset();
        out.push_back(err);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Sweeps

/// Calls fn(i) for i in [0, n) on `threads` workers (0: hardware concurrency).
template <typename Fn>
void parallel_for(int n, int threads, Fn&& fn) {
    int workers = threads > 0 ? threads : static_cast<int>(std::max(1U, std::thread::hardware_concurrency()));
    workers = std::max(1, std::min(workers, n));
    if (workers == 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (int i = next++; i < n; i = next++) fn(i);
        });
    for (auto& t : pool) t.join();
}

namespace detail {

inline void accumulate_point(const ExperimentConfig& cfg, const std::string& param, double value,
                             const TrialSetup& setup, std::uint64_t point_label, SweepResult& res) {
    const bool with_na = std::find(cfg.estimators.begin(), cfg.estimators.end(), Pipeline::NA) != cfg.estimators.end();
    const int n = with_na ? std::max(cfg.trials, cfg.trials_na) : cfg.trials;
    std::vector<TrialErrors> per_trial(static_cast<std::size_t>(n));
    parallel_for(n, cfg.threads, [&](int t) {
        const std::uint64_t ts = derive_seed(cfg.seed, {stream::kTrial, point_label, static_cast<std::uint64_t>(t)});
        ExperimentConfig local = cfg;
        if (t >= cfg.trials) {
            local.estimators = {Pipeline::NA};
        }
        TrialErrors e = run_trial(local, setup, ts, t < cfg.trials_na);
        if (t >= cfg.trials) {
            TrialErrors full(cfg.estimators.size());
            for (std::size_t j = 0; j < cfg.estimators.size(); ++j)
                if (cfg.estimators[j] == Pipeline::NA) full[j] = e[0];
            e = std::move(full);
        }
        per_trial[static_cast<std::size_t>(t)] = std::move(e);
    });

    for (std::size_t j = 0; j < cfg.estimators.size(); ++j) {
        const Pipeline p = cfg.estimators[j];
        const int count = p == Pipeline::NA ? cfg.trials_na : cfg.trials;
        SweepRow row{param, value, p, count, 0, 0.0, 0.0};
        double sq = 0.0, sum = 0.0;
        int ok = 0;
        for (int t = 0; t < count; ++t) {
            const auto& e = per_trial[static_cast<std::size_t>(t)][j];
            if (!e) {
                ++row.failures;
                continue;
            }
            sq += *e * *e;
            sum += *e;
            ++ok;
        }
        if (ok > 0) {
            row.rmse = std::sqrt(sq / ok);
            row.mean_err = sum / ok;
        } else {
            row.rmse = std::numeric_limits<double>::quiet_NaN();
            row.mean_err = std::numeric_limits<double>::quiet_NaN();
        }
        res.rows.push_back(row);
    }
}

}  // namespace detail

inline SweepResult run_sweep(const ExperimentConfig& cfg) {
    cfg.validate();
    SweepResult res;
    TrialSetup base{cfg.d, cfg.sigma, cfg.sigma_dir, cfg.m_observers, cfg.k_per_observer};
    switch (cfg.sweep) {
        case SweepKind::distance:
            for (std::size_t i = 0; i < cfg.d_values.size(); ++i) {
                TrialSetup s = base;
                s.d = cfg.d_values[i];
                detail::accumulate_point(cfg, "d", s.d, s, i, res);
            }
            break;
        case SweepKind::direction_error:
            for (std::size_t i = 0; i < cfg.sigma_dir_values.size(); ++i) {
                TrialSetup s = base;
                s.sigma_dir = cfg.sigma_dir_values[i];
                detail::accumulate_point(cfg, "sigma_dir", s.sigma_dir, s, i, res);
            }
            break;
        case SweepKind::mpc_count:
            for (std::size_t i = 0; i < cfg.k_values.size(); ++i) {
                TrialSetup s = base;
                s.k_per_observer = cfg.k_values[i];
                detail::accumulate_point(cfg, "k_per_observer", s.k_per_observer, s, i, res);
            }
            break;
        default: throw ConfigError("run_sweep: not a sweep configuration");
    }
    return res;
}

// ---------------------------------------------------------------------------
// Likelihood surface

/// Two-wall indoor example with one observer and three paths (direct path
/// plus reflections off a wall behind A and a side wall), B at (d, 0, 0).
inline Scenario example_scenario(double d, double c = kSpeedOfLight) {
    const Vec3 observer(9.0, 0.5, 0.0);
    const Vec3 sources[] = {observer, Vec3(-12.0, 0.5, 0.0), Vec3(9.0, 5.5, 0.0)};
    Scenario s;
    s.c = c;
    s.pos_b = Vec3(d, 0.0, 0.0);
    int k = 0;
    for (const Vec3& src : sources) {
        const Vec3 path = s.pos_a - src;
        MpcTrue m = complete_mpc(s.pos_a, s.pos_b, path.norm() / c, path.normalized(), c);
        m.observer_id = 0;
        m.mpc_id = k++;
        s.mpcs.push_back(m);
    }
    return s;
}

struct SurfaceCell {
    double d;
    double eps;
    double loglik;
};

/// Log-likelihood of the known- or unknown-association model on a regular
/// (d, eps) grid for the example scenario.
inline std::vector<SurfaceCell> dump_surface(const ExperimentConfig& cfg) {
    cfg.validate();
    const Scenario sc = example_scenario(cfg.d);
    NoiseParams noise;
    noise.sigma = cfg.sigma;
    noise.eps = cfg.eps;
    noise.eps_a_per_observer.assign(static_cast<std::size_t>(sc.observer_count()), 0.0);
    const auto obs = observe(sc, noise, derive_seed(cfg.seed, {stream::kNoise}));
    const ErrorModel model = cfg.sigma > 0.0 ? ErrorModel::gaussian(cfg.sigma) : ErrorModel::noiseless();

    const DelayDiffSet diffs = DelayDiffSet::from_observations(obs);
    const auto ta = detail::side_delays(obs, false);
    const auto tb = detail::side_delays(obs, true);

    const GridAxis gd{0.0, cfg.surface_d_max, cfg.surface_steps};
    const GridAxis ge{cfg.eps - cfg.surface_eps_span, cfg.eps + cfg.surface_eps_span, cfg.surface_steps};
    std::vector<SurfaceCell> out;
    out.reserve(static_cast<std::size_t>(cfg.surface_steps * cfg.surface_steps));
    for (int i = 0; i < gd.steps; ++i)
        for (int j = 0; j < ge.steps; ++j) {
            const double dh = gd.at(i), eh = ge.at(j);
            const double f = cfg.surface_known_assoc ? known_assoc_log_objective(diffs, model, dh, eh, sc.c)
                                                     : noassoc_log_objective(ta, tb, model, dh, eh, sc.c);
            out.push_back({dh, eh, f});
        }
    return out;
}

/// Grid cell with the largest log-likelihood (first one on ties).
inline SurfaceCell surface_peak(const std::vector<SurfaceCell>& cells) {
    SurfaceCell best{0.0, 0.0, kNegInf};
    for (const auto& c : cells)
        if (c.loglik > best.loglik) best = c;
    return best;
}

inline void write_surface_csv(std::ostream& os, const std::vector<SurfaceCell>& cells) {
    os << "d,eps,loglik\n";
    for (const auto& c : cells) {
        os << format_double(c.d) << ',' << format_double(c.eps) << ',';
        if (std::isfinite(c.loglik))
            os << format_double(c.loglik);
        else
            os << (c.loglik > 0 ? "inf" : "-inf");
        os << '\n';
    }
}

// ---------------------------------------------------------------------------
// Calibration

inline constexpr double kTargetMeanExcessDelay = 40.5e-9;
inline constexpr double kTargetDelaySpread = 26.3e-9;

struct CalibrationReport {
    std::size_t samples = 0;
    double mean_excess_delay = 0.0;  // [s]
    double rms_delay_spread = 0.0;   // [s]
    bool mean_ok = false;
    bool spread_ok = false;

    bool passed() const { return mean_ok && spread_ok; }
};

inline CalibrationReport calibrate(const ExperimentConfig& cfg) {
    cfg.validate();
    const auto v = sample_excess_delays(cfg.sv, cfg.calibrate_samples, cfg.seed);
    CalibrationReport r;
    r.samples = v.size();
    double sum = 0.0;
    for (double x : v) sum += x;
    r.mean_excess_delay = sum / static_cast<double>(v.size());
    double sq = 0.0;
    for (double x : v) sq += (x - r.mean_excess_delay) * (x - r.mean_excess_delay);
    r.rms_delay_spread = std::sqrt(sq / static_cast<double>(v.size()));
    r.mean_ok = std::abs(r.mean_excess_delay - kTargetMeanExcessDelay) <= 0.1 * kTargetMeanExcessDelay;
    r.spread_ok = std::abs(r.rms_delay_spread - kTargetDelaySpread) <= 0.1 * kTargetDelaySpread;
    return r;
}

inline void write_calibration_csv(std::ostream& os, const CalibrationReport& r) {
    os << "quantity,value_s,target_s,pass\n";
    os << "mean_excess_delay," << format_double(r.mean_excess_delay) << ',' << format_double(kTargetMeanExcessDelay)
       << ',' << (r.mean_ok ? 1 : 0) << '\n';
    os << "rms_delay_spread," << format_double(r.rms_delay_spread) << ',' << format_double(kTargetDelaySpread) << ','
       << (r.spread_ok ? 1 : 0) << '\n';
}

// ---------------------------------------------------------------------------
// Configuration files: flat "key = value" lines, '#' starts a comment.

inline std::map<std::string, std::string> read_key_values(std::istream& is) {
    std::map<std::string, std::string> kv;
    std::string line;
    int lineno = 0;
    const auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t\r");
        const auto e = s.find_last_not_of(" \t\r");
        return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    while (std::getline(is, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
        kv[key] = trim(line.substr(eq + 1));
    }
    return kv;
}

inline std::map<std::string, std::string> read_key_value_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    return read_key_values(in);
}

inline double parse_number(const std::string& key, const std::string& text) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(text, &pos);
        if (pos != text.size()) throw ConfigError("");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("invalid number for '" + key + "': '" + text + "'");
    }
}

/// Comma-separated list, or "a:b:step" range (inclusive).
inline std::vector<double> parse_number_list(const std::string& key, const std::string& text) {
    std::vector<double> out;
    if (text.find(':') != std::string::npos) {
        std::vector<double> parts;
        std::stringstream ss(text);
        std::string tok;
        while (std::getline(ss, tok, ':')) parts.push_back(parse_number(key, tok));
        if (parts.size() != 3 || !(parts[2] > 0.0) || parts[1] < parts[0])
            throw ConfigError("invalid range for '" + key + "': '" + text + "'");
        const int n = static_cast<int>(std::floor((parts[1] - parts[0]) / parts[2] + 1e-9));
        for (int i = 0; i <= n; ++i) out.push_back(parts[0] + i * parts[2]);
        return out;
    }
    std::stringstream ss(text);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        const auto b = tok.find_first_not_of(" \t");
        if (b == std::string::npos) continue;
        out.push_back(parse_number(key, tok.substr(b)));
    }
    if (out.empty()) throw ConfigError("empty list for '" + key + "'");
    return out;
}

inline int parse_int(const std::string& key, const std::string& text) {
    const double v = parse_number(key, text);
    if (v != std::floor(v) || std::abs(v) > 2e9) throw ConfigError("expected an integer for '" + key + "'");
    return static_cast<int>(v);
}

inline SweepKind parse_sweep_kind(const std::string& text) {
    if (text == "distance") return SweepKind::distance;
    if (text == "direction_error") return SweepKind::direction_error;
    if (text == "mpc_count") return SweepKind::mpc_count;
    if (text == "surface") return SweepKind::surface;
    if (text == "calibrate") return SweepKind::calibrate;
    throw ConfigError("unknown sweep '" + text + "'");
}

/// Applies "key = value" settings to a config. Keys use the long CLI flag
/// names without dashes; units follow the flags (ns, degrees).
inline void apply_settings(ExperimentConfig& cfg, const std::map<std::string, std::string>& kv) {
    for (const auto& [key, value] : kv) {
        if (key == "sweep") {
            cfg.sweep = parse_sweep_kind(value);
        } else if (key == "d") {
            const auto v = parse_number_list(key, value);
            cfg.d_values = v;
            cfg.d = v.front();
        } else if (key == "sigma-ns") {
            cfg.sigma = parse_number(key, value) * 1e-9;
        } else if (key == "sigma-dir-deg") {
            const auto v = parse_number_list(key, value);
            cfg.sigma_dir_values.clear();
            for (double x : v) cfg.sigma_dir_values.push_back(deg2rad(x));
            cfg.sigma_dir = cfg.sigma_dir_values.front();
        } else if (key == "observers") {
            cfg.m_observers = parse_int(key, value);
        } else if (key == "mpcs-per-observer") {
            const auto v = parse_number_list(key, value);
            cfg.k_values.clear();
            for (double x : v) cfg.k_values.push_back(parse_int(key, format_double(x)));
            cfg.k_per_observer = cfg.k_values.front();
        } else if (key == "trials") {
            cfg.trials = parse_int(key, value);
        } else if (key == "trials-na") {
            cfg.trials_na = parse_int(key, value);
        } else if (key == "seed") {
            const double s = parse_number(key, value);
            if (s < 0 || s != std::floor(s)) throw ConfigError("seed must be a non-negative integer");
            cfg.seed = static_cast<std::uint64_t>(std::stoull(value));
        } else if (key == "estimators") {
            cfg.estimators.clear();
            std::stringstream ss(value);
            std::string tok;
            while (std::getline(ss, tok, ',')) {
                tok.erase(std::remove_if(tok.begin(), tok.end(), ::isspace), tok.end());
                if (!tok.empty()) cfg.estimators.push_back(parse_pipeline(tok));
            }
        } else if (key == "out") {
            cfg.output_path = value;
        } else if (key == "eps-ns") {
            cfg.eps = parse_number(key, value) * 1e-9;
        } else if (key == "eps-a-max-ns") {
            cfg.eps_a_max = parse_number(key, value) * 1e-9;
        } else if (key == "threads") {
            cfg.threads = parse_int(key, value);
        } else if (key == "sort-scope") {
            if (value == "observer")
                cfg.sort_scope = SortScope::per_observer;
            else if (value == "pooled")
                cfg.sort_scope = SortScope::pooled;
            else
                throw ConfigError("sort-scope must be 'observer' or 'pooled'");
        } else if (key == "selection") {
            if (value == "power")
                cfg.sv.selection = DelaySelection::power_weighted;
            else if (value == "range")
                cfg.sv.selection = DelaySelection::dynamic_range;
            else
                throw ConfigError("selection must be 'power' or 'range'");
        } else if (key == "dynamic-range-db") {
            cfg.sv.dynamic_range_db = parse_number(key, value);
        } else if (key == "window-ns") {
            cfg.sv.window = parse_number(key, value) * 1e-9;
        } else if (key == "cluster-mean-ns") {
            cfg.sv.cluster_mean = parse_number(key, value) * 1e-9;
        } else if (key == "ray-mean-ns") {
            cfg.sv.ray_mean = parse_number(key, value) * 1e-9;
        } else if (key == "cluster-decay-ns") {
            cfg.sv.cluster_decay = 1.0 / (parse_number(key, value) * 1e-9);
        } else if (key == "ray-decay-ns") {
            cfg.sv.ray_decay = 1.0 / (parse_number(key, value) * 1e-9);
        } else if (key == "draws-per-channel") {
            cfg.sv.draws_per_channel = parse_int(key, value);
        } else if (key == "assoc") {
            if (value == "known")
                cfg.surface_known_assoc = true;
            else if (value == "none")
                cfg.surface_known_assoc = false;
            else
                throw ConfigError("assoc must be 'known' or 'none'");
        } else if (key == "grid-d-max") {
            cfg.surface_d_max = parse_number(key, value);
        } else if (key == "grid-eps-span-ns") {
            cfg.surface_eps_span = parse_number(key, value) * 1e-9;
        } else if (key == "grid-steps") {
            cfg.surface_steps = parse_int(key, value);
        } else if (key == "samples") {
            cfg.calibrate_samples = static_cast<std::size_t>(parse_int(key, value));
        } else {
            throw ConfigError("unknown config key '" + key + "'");
        }
    }
}

}  // namespace mpcloc
