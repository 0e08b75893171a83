// Acceptance report: one PASS/FAIL line per criterion.

#include "mpcloc/mpcloc.hpp"

#include <chrono>
#include <cstdio>
#include <numeric>
#include <string>

using namespace mpcloc;

namespace {

constexpr double c = kSpeedOfLight;

struct Report {
    int failed = 0;
    void line(int id, bool ok, const std::string& detail) {
        std::printf("criterion %2d: %s  %s\n", id, ok ? "PASS" : "FAIL", detail.c_str());
        std::fflush(stdout);
        if (!ok) ++failed;
    }
};

std::string fmt(const char* f, double a, double b = 0.0, double c2 = 0.0, double d = 0.0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c2, d);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

bool within(double v, double target, double rel) { return std::abs(v - target) <= rel * target; }

struct Check {
    std::string text;
    bool ok = true;
    void add(const std::string& name, double v, double target, double rel) {
        const bool pass = std::isfinite(v) && within(v, target, rel);
        ok = ok && pass;
        char buf[160];
        std::snprintf(buf, sizeof buf, "%s=%.4g (target %.4g +-%.0f%%%s) ", name.c_str(), v, target, rel * 100.0,
                      pass ? "" : ", out");
        text += buf;
    }
    void flag(const std::string& name, bool pass) {
        ok = ok && pass;
        text += name + (pass ? " ok " : " violated ");
    }
};

Scenario random_scenario(double d, int m, int k, std::uint64_t seed) {
    return sample_scenario(d, SvParams{}, m, std::vector<int>(static_cast<std::size_t>(m), k), seed);
}

std::vector<MpcObservation> clean(const Scenario& s, double eps, std::vector<double> eps_a) {
    NoiseParams n;
    n.eps = eps;
    n.eps_a_per_observer = std::move(eps_a);
    return observe(s, n, 0);
}

void criterion1(Report& rep) {
    const auto t0 = std::chrono::steady_clock::now();
    double worst = 0.0;
    double bound_excess = -kInf;
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
        const double d = 0.01 * static_cast<double>(seed % 900);
        const Scenario s = random_scenario(d, 3, 4, seed);
        const Vec3 dv = s.relative_position();
        for (const auto& m : s.mpcs) {
            bound_excess = std::max(bound_excess, std::abs(c * delay_diff_true(m)) - d);
            worst = std::max(worst, vector_identity_residual(m, dv).norm());
            worst = std::max(worst, std::abs(projection_residual(m, dv)));
            worst = std::max(worst, std::abs(pair_vector(m.dir_a, m.dir_b).dot(dv) - c * delay_diff_true(m)));
        }
    }
    const double t = seconds_since(t0);
    rep.line(1, worst < 1e-9 && bound_excess < 1e-9 && t < 1.0,
             fmt("max identity residual %.3g m, max |c*delta|-d %.3g m, %.3f s", worst, bound_excess, t));
}

void criterion2(Report& rep) {
    const auto t0 = std::chrono::steady_clock::now();
    double worst_dd = 0.0, worst_tau = 0.0, worst_off = 0.0;
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
        const double d = 0.2 + 0.01 * static_cast<double>(seed % 800);
        const std::vector<double> eps_a = {11e-9, 47e-9, 83e-9};
        const Scenario s = random_scenario(d, 3, 2 + static_cast<int>(seed % 3), 5000 + seed);
        const auto obs = clean(s, 5e-9, eps_a);
        worst_dd = std::max(worst_dd, (lse_by_delta(obs).d_vec - s.relative_position()).norm());
        const auto e = lse_by_tau(obs);
        worst_tau = std::max(worst_tau, (e.d_vec - s.relative_position()).norm());
        worst_off = std::max(worst_off, c * std::abs(e.eps_hat - 5e-9));
        for (std::size_t o = 0; o < 3; ++o) worst_off = std::max(worst_off, c * std::abs(e.eps_a_hats[o] - eps_a[o]));
    }
    const double t = seconds_since(t0);
    rep.line(2, worst_dd < 1e-9 && worst_tau < 1e-9 && worst_off < 1e-9 && t < 5.0,
             fmt("lse_by_delta %.3g m, lse_by_tau %.3g m, offsets %.3g m, %.2f s", worst_dd, worst_tau, worst_off, t));
}

DelayDiffSet uniform_set(Engine& eng, double d, int k, double eps) {
    std::uniform_real_distribution<double> u(-d / c, d / c);
    std::vector<double> v(static_cast<std::size_t>(k));
    for (double& x : v) x = u(eng) + eps;
    return DelayDiffSet::single(v);
}

void criterion3(Report& rep) {
    Engine eng = make_engine(301);
    bool ratio_ok = true;
    for (int k = 2; k <= 30; ++k) {
        const auto set = uniform_set(eng, 2.0, k, 3e-9);
        ratio_ok = ratio_ok && mvue_async(set).d_hat == mle_async_noiseless(set).d_hat * ((k + 1.0) / (k - 1.0));
    }
    double gls_rel = 0.0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const Scenario s = random_scenario(2.0, 3, 4, 7000 + seed);
        NoiseParams n;
        n.sigma = 0.2e-9;
        n.sigma_dir = deg2rad(2.0);
        n.eps = 5e-9;
        n.eps_a_per_observer = {0.0, 0.0, 0.0};
        const auto obs = observe(s, n, seed);
        const auto k = static_cast<Eigen::Index>(obs.size());
        const auto a = lse_by_delta(obs);
        const auto g = gls_by_delta(obs, Eigen::VectorXd::Zero(k), 4e-20 * Eigen::MatrixXd::Identity(k, k));
        gls_rel = std::max(gls_rel, (g.d_vec - a.d_vec).norm() / a.d_vec.norm());
    }
    double limit = 0.0;
    for (int i = 0; i < 20; ++i) {
        const auto set = uniform_set(eng, 2.0, 12, 5e-9);
        limit = std::max(limit, std::abs(mle_async_gaussian(set, ErrorModel::gaussian(1e-15)).d_hat -
                                         mle_async_noiseless(set).d_hat));
    }
    rep.line(3, ratio_ok && gls_rel <= 1e-12 && limit <= 1e-3,
             std::string("ratio (K+1)/(K-1) ") + (ratio_ok ? "exact" : "inexact") +
                 fmt(", gls vs lse %.3g rel, gaussian(sigma->0) vs noiseless %.3g m", gls_rel, limit));
}

void criterion4(Report& rep) {
    Engine eng = make_engine(401);
    std::normal_distribution<double> noise(0.0, 0.2e-9);
    std::uniform_real_distribution<double> ta_dist(20e-9, 80e-9), u(-2.0 / c, 2.0 / c);
    double d_change = 0.0, eps_err = 0.0, max_shift = 0.0;
    const ErrorModel g = ErrorModel::gaussian(0.2e-9);
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<std::vector<double>> ta(3, std::vector<double>(4)), tb = ta;
        DelayDiffSet set;
        for (std::size_t o = 0; o < 3; ++o) {
            set.diffs.emplace_back();
            for (std::size_t k = 0; k < 4; ++k) {
                ta[o][k] = ta_dist(eng);
                tb[o][k] = ta[o][k] + u(eng) + noise(eng) + 5e-9;
                set.diffs.back().push_back(tb[o][k] - ta[o][k]);
            }
        }
        for (double delta : {3.1e-9, -47.9e-9, 250.3e-9}) {
            max_shift = std::max(max_shift, std::abs(delta));
            DelayDiffSet moved_set = set;
            for (auto& gr : moved_set.diffs)
                for (double& x : gr) x += delta;
            auto moved_b = tb;
            for (auto& gr : moved_b)
                for (double& x : gr) x += delta;
            const std::vector<std::pair<DistanceEstimate, DistanceEstimate>> pairs = {
                {mvue_async(set), mvue_async(moved_set)},
                {mle_async_noiseless(set), mle_async_noiseless(moved_set)},
                {mle_async_gaussian(set, g), mle_async_gaussian(moved_set, g)},
                {mle_async_noassoc(ta, tb, g), mle_async_noassoc(ta, moved_b, g)},
                {mle_async_noassoc(ta, tb, ErrorModel::noiseless()), mle_async_noassoc(ta, moved_b, ErrorModel::noiseless())},
            };
            for (const auto& [a, b] : pairs) {
                d_change = std::max(d_change, std::abs(b.d_hat - a.d_hat));
                eps_err = std::max(eps_err, std::abs(b.eps_hat - a.eps_hat - delta));
            }
        }
    }
    rep.line(4, d_change <= 1e-12 && eps_err <= 1e-12 * max_shift,
             fmt("max |d change| %.3g m, max |eps shift - delta| %.3g s", d_change, eps_err));
}

double brute_force_min(const std::vector<double>& cost, int n) {
    std::vector<int> p(static_cast<std::size_t>(n));
    std::iota(p.begin(), p.end(), 0);
    double best = kInf;
    do {
        double s = 0.0;
        for (int i = 0; i < n; ++i) s += cost[static_cast<std::size_t>(i * n + p[static_cast<std::size_t>(i)])];
        best = std::min(best, s);
    } while (std::next_permutation(p.begin(), p.end()));
    return best;
}

void criterion5(Report& rep) {
    Engine eng = make_engine(501);
    std::uniform_real_distribution<double> ut(20e-9, 120e-9);
    int mismatches = 0;
    for (int inst = 0; inst < 500; ++inst) {
        const int n = 1 + inst % 5;
        SideSet a(1), b(1);
        for (int k = 0; k < n; ++k) {
            // Directions stay within the gate so every permutation competes.
            a[0].push_back({ut(eng), perturb_direction(Vec3::UnitZ(), deg2rad(3.0 * k), eng)});
            b[0].push_back({ut(eng), perturb_direction(Vec3::UnitZ(), deg2rad(2.0 * k), eng)});
        }
        const AssocConfig cfg;
        const double mu_a = mean_delay(a[0]), mu_b = mean_delay(b[0]);
        std::vector<double> cost(static_cast<std::size_t>(n * n));
        for (int k = 0; k < n; ++k)
            for (int l = 0; l < n; ++l)
                cost[static_cast<std::size_t>(k * n + l)] = pair_cost(a[0][static_cast<std::size_t>(k)], b[0][static_cast<std::size_t>(l)], cfg, mu_a, mu_b);
        const auto asg = associate(a, b, cfg);
        if (std::abs(asg.total_cost - brute_force_min(cost, n)) > 1e-9) ++mismatches;
    }
    rep.line(5, mismatches == 0, fmt("%.0f of 500 instances differ from exhaustive minimum", mismatches));
}

void criterion6(Report& rep) {
    Engine eng = make_engine(601);
    std::uniform_real_distribution<double> ut(20e-9, 60e-9), ue(-6e-9, 6e-9), ud(0.3, 4.0);
    const ErrorModel m = ErrorModel::gaussian(1e-9);
    double worst = 0.0;
    for (int k = 1; k <= 4; ++k) {
        std::vector<std::vector<double>> ta(2, std::vector<double>(static_cast<std::size_t>(k))), tb = ta;
        for (std::size_t o = 0; o < 2; ++o)
            for (std::size_t i = 0; i < static_cast<std::size_t>(k); ++i) {
                ta[o][i] = ut(eng);
                tb[o][i] = ta[o][i] + ue(eng);
            }
        for (int p = 0; p < 20; ++p) {
            const double d = ud(eng), e = ue(eng);
            double total = 0.0;
            std::size_t base = 0;
            for (std::size_t o = 0; o < 2; ++o) {
                std::vector<int> perm(static_cast<std::size_t>(k));
                std::iota(perm.begin(), perm.end(), 0);
                double sum = 0.0;
                do {
                    double prod = 1.0;
                    for (int i = 0; i < k; ++i)
                        prod *= soft_indicator(tb[o][static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])] - ta[o][static_cast<std::size_t>(i)] - e, d, m, base + static_cast<std::size_t>(i));
                    sum += prod;
                } while (std::next_permutation(perm.begin(), perm.end()));
                total += std::log(sum);
                base += static_cast<std::size_t>(k);
            }
            const double direct = std::exp(total - static_cast<double>(base) * std::log(d));
            const double got = std::exp(noassoc_log_objective(ta, tb, m, d, e));
            worst = std::max(worst, std::abs(got - direct) / direct);
        }
    }
    rep.line(6, worst <= 1e-12, fmt("max relative deviation %.3g over 80 points", worst));
}

void criterion7(Report& rep) {
    Engine eng = make_engine(701);
    const int n = 100000;
    double sum = 0.0, sq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double v = mvue_async(uniform_set(eng, 2.0, 12, 5e-9)).d_hat;
        sum += v;
        sq += v * v;
    }
    const double mean = sum / n;
    const double se = std::sqrt((sq / n - mean * mean) / n);
    rep.line(7, std::abs(mean - 2.0) <= 3.0 * se, fmt("mean %.5f m, standard error %.5f m", mean, se));
}

double rmse(const SweepResult& r, Pipeline p, double v) {
    const SweepRow* row = r.find(p, v);
    return row ? row->rmse : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace

int main() {
    Report rep;
    criterion1(rep);
    criterion2(rep);
    criterion3(rep);
    criterion4(rep);
    criterion5(rep);
    criterion6(rep);
    criterion7(rep);

    // Default distance sweep, all pipelines.
    ExperimentConfig dist;
    const SweepResult rd = run_sweep(dist);
    {
        Check ch;
        ch.add("MV(2)", rmse(rd, Pipeline::MV, 2.0), 0.224, 0.2);
        ch.add("MV(8)", rmse(rd, Pipeline::MV, 8.0), 1.095, 0.2);
        ch.add("SO(2)", rmse(rd, Pipeline::SO, 2.0), 0.408, 0.2);
        ch.add("NA(2)", rmse(rd, Pipeline::NA, 2.0), 0.524, 0.3);
        rep.line(8, ch.ok, ch.text);
    }
    {
        Check ch;
        ch.add("DD(2)", rmse(rd, Pipeline::DD, 2.0), 0.060, 0.2);
        ch.add("DD(8)", rmse(rd, Pipeline::DD, 8.0), 0.061, 0.2);
        ch.add("TAU(2)", rmse(rd, Pipeline::TAU, 2.0), 0.030, 0.2);
        ch.add("PWA(2)", rmse(rd, Pipeline::PWA, 2.0), 0.077, 0.2);
        ch.add("PWA(8)", rmse(rd, Pipeline::PWA, 8.0), 0.825, 0.2);
        for (double d : {0.0, 1.0, 2.0}) ch.add(fmt("DDN(%g)", d), rmse(rd, Pipeline::DDN, d), rmse(rd, Pipeline::DD, d), 0.2);
        ch.add("DDN(6)", rmse(rd, Pipeline::DDN, 6.0), 0.62, 0.3);
        rep.line(9, ch.ok, ch.text);
    }

    // Direction-error sweep at d = 2.
    ExperimentConfig dir;
    dir.sweep = SweepKind::direction_error;
    dir.sigma_dir_values = {deg2rad(2.0), deg2rad(8.0)};
    dir.estimators = {Pipeline::DD, Pipeline::TAU};
    const SweepResult rs = run_sweep(dir);
    {
        Check ch;
        const double dd2 = rmse(rs, Pipeline::DD, deg2rad(2.0));
        const double tau2 = rmse(rs, Pipeline::TAU, deg2rad(2.0));
        ch.add("DD(8deg)", rmse(rs, Pipeline::DD, deg2rad(8.0)), 0.138, 0.2);
        ch.add("TAU(2deg)", tau2, 0.781, 0.2);
        ch.text += fmt("TAU/DD(2deg)=%.3g ", tau2 / dd2);
        ch.flag("ratio>5", tau2 / dd2 > 5.0);
        rep.line(10, ch.ok, ch.text);
    }

    // Single observer, MPC-count sweep.
    ExperimentConfig kc;
    kc.sweep = SweepKind::mpc_count;
    kc.m_observers = 1;
    kc.estimators = {Pipeline::MV, Pipeline::DD, Pipeline::TAU};
    const SweepResult rk = run_sweep(kc);
    {
        Check ch;
        ch.add("MV(K=2)", rmse(rk, Pipeline::MV, 2), 1.40, 0.2);
        ch.add("MV(K=8)", rmse(rk, Pipeline::MV, 8), 0.335, 0.2);
        bool mono = true;
        for (int k = 3; k <= 8; ++k) mono = mono && rmse(rk, Pipeline::MV, k) < rmse(rk, Pipeline::MV, k - 1);
        ch.flag("monotone", mono);
        rep.line(11, ch.ok, ch.text);
    }
    {
        Check ch;
        ch.add("DD(K=4)", rmse(rk, Pipeline::DD, 4), 1.00, 0.2);
        ch.add("DD(K=8)", rmse(rk, Pipeline::DD, 8), 0.091, 0.2);
        ch.add("TAU(K=5)", rmse(rk, Pipeline::TAU, 5), 0.055, 0.2);
        rep.line(12, ch.ok, ch.text);
    }

    {
        ExperimentConfig cal;
        const CalibrationReport r = calibrate(cal);
        rep.line(13, r.passed() && r.samples >= 1000000,
                 fmt("mean excess delay %.2f ns (36.45..44.55), rms spread %.2f ns (23.67..28.93), %.0f samples",
                     r.mean_excess_delay * 1e9, r.rms_delay_spread * 1e9, static_cast<double>(r.samples)));
    }

    {
        ExperimentConfig sc;
        sc.d = 2.5;
        sc.sigma = 0.0;
        sc.eps = 5e-9;
        const SurfaceCell peak = surface_peak(dump_surface(sc));
        const double step_d = sc.surface_d_max / (sc.surface_steps - 1);
        const double step_e = 2.0 * sc.surface_eps_span / (sc.surface_steps - 1);
        const bool ok = std::abs(peak.d - 2.5) <= step_d + 1e-12 && std::abs(peak.eps - 5e-9) <= step_e + 1e-20;
        rep.line(14, ok, fmt("peak at d=%.3f m, eps=%.3f ns (steps %.3f m, %.3f ns)", peak.d, peak.eps * 1e9, step_d,
                             step_e * 1e9));
    }

    std::printf("%d of 14 criteria failed\n", rep.failed);
    return rep.failed == 0 ? 0 : 1;
}
