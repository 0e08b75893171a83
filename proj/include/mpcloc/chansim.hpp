#pragma once

// Stochastic scenario generation: Saleh-Valenzuela excess delays, isotropic
// MPC directions, delay / direction measurement errors and clock offsets.

#include "mpcloc/core.hpp"
#include "mpcloc/geom.hpp"
#include "mpcloc/rng.hpp"

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

namespace mpcloc {

/// How MPCs are picked from the rays of one channel realization.
enum class DelaySelection {
    power_weighted,  // sampling without replacement, probability proportional to power
    dynamic_range,   // uniform among rays within dynamic_range_db of the strongest ray
};

/// Saleh-Valenzuela arrival process. Times are seconds, decay rates 1/s.
struct SvParams {
    double cluster_mean = 20e-9;         // mean inter-cluster arrival time
    double ray_mean = 10e-9;             // mean intra-cluster ray inter-arrival time
    double cluster_decay = 1.0 / 60e-9;  // power decay rate across clusters
    double ray_decay = 1.0 / 20e-9;      // power decay rate within a cluster
    double tau_min = 16.7e-9;            // delay floor added to every excess delay
    double window = 300e-9;              // rays are generated on [0, window]
    // Number of delays taken from one channel realization when
    // sample_excess_delays() is asked for many samples at once.
    int draws_per_channel = 4;
    DelaySelection selection = DelaySelection::dynamic_range;
    double dynamic_range_db = 7.5;

    void validate() const {
        if (!(cluster_mean > 0.0) || !(ray_mean > 0.0) || !(cluster_decay > 0.0) ||
            !(ray_decay > 0.0) || !(tau_min > 0.0) || !(window > 0.0))
            throw InvalidParams("SvParams: all parameters must be positive");
        if (draws_per_channel < 1) throw InvalidParams("SvParams: draws_per_channel must be >= 1");
        if (!(dynamic_range_db > 0.0)) throw InvalidParams("SvParams: dynamic_range_db must be positive");
    }
};

struct NoiseParams {
    double sigma = 0.0;                   // std dev of the delay-difference error [s]
    double sigma_dir = 0.0;               // std dev of the direction error angle [rad]
    double eps = 0.0;                     // clock offset between A and B [s]
    std::vector<double> eps_a_per_observer;  // clock offset A <-> observer o [s]

    void validate(int observers) const {
        if (!(sigma >= 0.0) || !(sigma_dir >= 0.0))
            throw InvalidParams("NoiseParams: sigma and sigma_dir must be non-negative");
        if (static_cast<int>(eps_a_per_observer.size()) != observers)
            throw InvalidParams("NoiseParams: need one A-side clock offset per observer");
    }
};

struct MpcObservation {
    double tau_a_meas = 0.0;
    double tau_b_meas = 0.0;
    Vec3 dir_a_meas = Vec3::UnitX();
    Vec3 dir_b_meas = Vec3::UnitX();
    int observer_id = 0;
    int mpc_id = 0;

    double delay_diff() const { return tau_b_meas - tau_a_meas; }
};

/// [first, last) index range of one observer inside a grouped sequence.
struct ObserverRange {
    int observer_id = 0;
    std::size_t first = 0;
    std::size_t last = 0;
    std::size_t size() const { return last - first; }
};

/// Splits a sequence ordered by observer into contiguous groups.
template <typename Record>
std::vector<ObserverRange> observer_ranges(const std::vector<Record>& records) {
    std::vector<ObserverRange> out;
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (out.empty() || records[i].observer_id != out.back().observer_id)
            out.push_back({records[i].observer_id, i, i});
        out.back().last = i + 1;
    }
    return out;
}

namespace detail {

struct Ray {
    double delay;
    double power;
};

// One channel realization: clusters from a Poisson process starting at 0,
// rays within each cluster from a Poisson process starting at the cluster
// arrival. Powers follow the double-exponential decay.
inline std::vector<Ray> sv_realization(const SvParams& p, Engine& eng) {
    std::exponential_distribution<double> cluster_gap(1.0 / p.cluster_mean);
    std::exponential_distribution<double> ray_gap(1.0 / p.ray_mean);
    std::vector<Ray> rays;
    for (double t_cluster = 0.0; t_cluster <= p.window; t_cluster += cluster_gap(eng)) {
        const double cluster_power = std::exp(-t_cluster * p.cluster_decay);
        for (double t_ray = 0.0; t_cluster + t_ray <= p.window; t_ray += ray_gap(eng))
            rays.push_back({t_cluster + t_ray, cluster_power * std::exp(-t_ray * p.ray_decay)});
    }
    return rays;
}

// Power-weighted sampling without replacement (Efraimidis-Spirakis keys).
inline std::vector<double> pick_weighted(const std::vector<Ray>& rays, std::size_t count, Engine& eng) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<std::pair<double, double>> keyed;
    keyed.reserve(rays.size());
    for (const Ray& r : rays) {
        double u = unif(eng);
        while (u <= 0.0) u = unif(eng);
        keyed.emplace_back(std::log(u) / r.power, r.delay);
    }
    count = std::min(count, keyed.size());
    std::partial_sort(keyed.begin(), keyed.begin() + static_cast<std::ptrdiff_t>(count), keyed.end(),
                      [](const auto& x, const auto& y) { return x.first > y.first; });
    std::vector<double> out(count);
    for (std::size_t i = 0; i < count; ++i) out[i] = keyed[i].second;
    return out;
}

// Uniform sampling without replacement among the rays whose power lies
// within `range_db` of the strongest; tops up with the strongest remaining
// rays when too few qualify.
inline std::vector<double> pick_in_range(const std::vector<Ray>& rays, std::size_t count, double range_db,
                                         Engine& eng) {
    double p_max = 0.0;
    for (const Ray& r : rays) p_max = std::max(p_max, r.power);
    const double floor = p_max * std::pow(10.0, -range_db / 10.0);
    std::vector<std::size_t> eligible;
    for (std::size_t i = 0; i < rays.size(); ++i)
        if (rays[i].power >= floor) eligible.push_back(i);
    std::vector<double> out;
    if (eligible.size() < count) {
        std::vector<std::size_t> order(rays.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t x, std::size_t y) { return rays[x].power > rays[y].power; });
        for (std::size_t i = 0; i < std::min(count, order.size()); ++i) out.push_back(rays[order[i]].delay);
        return out;
    }
    std::shuffle(eligible.begin(), eligible.end(), eng);
    for (std::size_t i = 0; i < count; ++i) out.push_back(rays[eligible[i]].delay);
    return out;
}

}  // namespace detail

/// Excess delays of `count` MPCs extracted from a single channel realization.
inline std::vector<double> sample_channel_delays(const SvParams& params, std::size_t count, Engine& eng) {
    params.validate();
    for (int attempt = 0; attempt < 100; ++attempt) {
        const auto rays = detail::sv_realization(params, eng);
        if (rays.size() < count) continue;
        return params.selection == DelaySelection::power_weighted
                   ? detail::pick_weighted(rays, count, eng)
                   : detail::pick_in_range(rays, count, params.dynamic_range_db, eng);
    }
    throw InvalidParams("sample_channel_delays: window too short for the requested MPC count");
}

/// `count` excess delays (tau_min not included), drawn in groups of
/// draws_per_channel from independent channel realizations.
inline std::vector<double> sample_excess_delays(const SvParams& params, std::size_t count, std::uint64_t seed) {
    params.validate();
    if (count < 1) throw InvalidParams("sample_excess_delays: count must be >= 1");
    Engine eng = make_engine(seed, {stream::kDelays});
    std::vector<double> out;
    out.reserve(count);
    const auto per = static_cast<std::size_t>(params.draws_per_channel);
    while (out.size() < count) {
        const auto batch = sample_channel_delays(params, std::min(per, count - out.size()), eng);
        out.insert(out.end(), batch.begin(), batch.end());
    }
    return out;
}

inline Vec3 sample_unit_sphere(Engine& eng) {
    std::normal_distribution<double> n01(0.0, 1.0);
    for (;;) {
        Vec3 v(n01(eng), n01(eng), n01(eng));
        const double len = v.norm();
        if (len > 1e-12) return v / len;
    }
}

/// Rotates `dir` by `angle` toward a uniformly random perpendicular axis.
inline Vec3 perturb_direction(const Vec3& dir, double angle, Engine& eng) {
    const Vec3 helper = std::abs(dir.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
    const Vec3 u = dir.cross(helper).normalized();
    const Vec3 v = dir.cross(u);
    std::uniform_real_distribution<double> azimuth(0.0, 2.0 * kPi);
    const double phi = azimuth(eng);
    const Vec3 axis = std::cos(phi) * u + std::sin(phi) * v;
    return (std::cos(angle) * dir + std::sin(angle) * axis).normalized();
}

/// Random scenario: A at the origin, B at (d, 0, 0), K_o MPCs per observer
/// with SV delays (plus tau_min) and isotropic A-side directions.
inline Scenario sample_scenario(double d, const SvParams& params, int m_observers,
                                const std::vector<int>& k_per_observer, std::uint64_t seed,
                                double c = kSpeedOfLight) {
    params.validate();
    if (!(d >= 0.0)) throw InvalidParams("sample_scenario: d must be non-negative");
    if (m_observers < 1) throw InvalidParams("sample_scenario: need at least one observer");
    if (static_cast<int>(k_per_observer.size()) != m_observers)
        throw InvalidParams("sample_scenario: need one MPC count per observer");
    for (int k : k_per_observer)
        if (k < 1) throw InvalidParams("sample_scenario: every observer needs at least one MPC");

    Scenario s;
    s.c = c;
    s.pos_a = Vec3::Zero();
    s.pos_b = Vec3(d, 0.0, 0.0);
    for (int o = 0; o < m_observers; ++o) {
        Engine eng = make_engine(seed, {stream::kScenario, static_cast<std::uint64_t>(o)});
        const auto k_o = static_cast<std::size_t>(k_per_observer[static_cast<std::size_t>(o)]);
        const auto excess = sample_channel_delays(params, k_o, eng);
        for (std::size_t k = 0; k < k_o; ++k) {
            const double tau_a = params.tau_min + excess[k];
            bool done = false;
            for (int attempt = 0; attempt < 100 && !done; ++attempt) {
                try {
                    MpcTrue m = complete_mpc(s.pos_a, s.pos_b, tau_a, sample_unit_sphere(eng), c);
                    m.observer_id = o;
                    m.mpc_id = static_cast<int>(k);
                    s.mpcs.push_back(m);
                    done = true;
                } catch (const DegenerateGeometry&) {
                }
            }
            if (!done) throw DegenerateGeometry("sample_scenario: retry limit reached");
        }
    }
    return s;
}

/// Measured MPC parameters: delay errors N(0, sigma^2/2) per side, clock
/// offsets eps_o^A (A side) and eps_o^A + eps (B side), cone-perturbed directions.
inline std::vector<MpcObservation> observe(const Scenario& s, const NoiseParams& noise, std::uint64_t seed) {
    const auto ranges = observer_ranges(s.mpcs);
    noise.validate(static_cast<int>(ranges.size()));
    Engine eng = make_engine(seed, {stream::kObserve});
    std::normal_distribution<double> delay_err(0.0, noise.sigma / std::sqrt(2.0));
    std::normal_distribution<double> angle_err(0.0, noise.sigma_dir);
    std::vector<MpcObservation> out;
    out.reserve(s.mpcs.size());
    for (std::size_t o = 0; o < ranges.size(); ++o) {
        const double eps_a = noise.eps_a_per_observer[o];
        const double eps_b = eps_a + noise.eps;
        for (std::size_t i = ranges[o].first; i < ranges[o].last; ++i) {
            const MpcTrue& m = s.mpcs[i];
            MpcObservation ob;
            ob.observer_id = m.observer_id;
            ob.mpc_id = m.mpc_id;
            ob.tau_a_meas = m.tau_a + eps_a;
            ob.tau_b_meas = m.tau_b + eps_b;
            if (noise.sigma > 0.0) {
                ob.tau_a_meas += delay_err(eng);
                ob.tau_b_meas += delay_err(eng);
            }
            ob.dir_a_meas = m.dir_a;
            ob.dir_b_meas = m.dir_b;
            if (noise.sigma_dir > 0.0) {
                ob.dir_a_meas = perturb_direction(m.dir_a, angle_err(eng), eng);
                ob.dir_b_meas = perturb_direction(m.dir_b, angle_err(eng), eng);
            }
            out.push_back(ob);
        }
    }
    return out;
}

struct ScrambledObservations {
    std::vector<MpcObservation> obs;
    // b_source[o][j]: index (within observer o) of the MPC whose B-side
    // fields now sit at position j.
    std::vector<std::vector<int>> b_source;
};

/// Shuffles the B-side fields uniformly within each observer group.
inline ScrambledObservations scramble_association(const std::vector<MpcObservation>& obs, std::uint64_t seed) {
    Engine eng = make_engine(seed, {stream::kScramble});
    ScrambledObservations out{obs, {}};
    for (const auto& r : observer_ranges(obs)) {
        std::vector<int> perm(r.size());
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), eng);
        for (std::size_t j = 0; j < r.size(); ++j) {
            const MpcObservation& src = obs[r.first + static_cast<std::size_t>(perm[j])];
            out.obs[r.first + j].tau_b_meas = src.tau_b_meas;
            out.obs[r.first + j].dir_b_meas = src.dir_b_meas;
        }
        out.b_source.push_back(std::move(perm));
    }
    return out;
}

inline constexpr const char* kObservationCsvHeader =
    "observer,mpc,tau_a_true,tau_b_true,sax,say,saz,sbx,sby,sbz,"
    "tau_a_meas,tau_b_meas,max,may,maz,mbx,mby,mbz";

/// One CSV row per MPC; `obs` must be in the scenario's MPC order.
inline void write_observation_csv(std::ostream& os, const Scenario& s, const std::vector<MpcObservation>& obs) {
    if (obs.size() != s.mpcs.size()) throw InvalidParams("write_observation_csv: size mismatch");
    os << kObservationCsvHeader << '\n';
    char buf[64];
    auto num = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return std::string(buf);
    };
    for (std::size_t i = 0; i < obs.size(); ++i) {
        const MpcTrue& m = s.mpcs[i];
        const MpcObservation& o = obs[i];
        os << m.observer_id << ',' << m.mpc_id << ',' << num(m.tau_a) << ',' << num(m.tau_b);
        for (int j = 0; j < 3; ++j) os << ',' << num(m.dir_a[j]);
        for (int j = 0; j < 3; ++j) os << ',' << num(m.dir_b[j]);
        os << ',' << num(o.tau_a_meas) << ',' << num(o.tau_b_meas);
        for (int j = 0; j < 3; ++j) os << ',' << num(o.dir_a_meas[j]);
        for (int j = 0; j < 3; ++j) os << ',' << num(o.dir_b_meas[j]);
        os << '\n';
    }
}

}  // namespace mpcloc
