#pragma once

// Exact two-node multipath geometry.
//
// A multipath component (MPC) seen by observer o reaches node A after delay
// tau_a along unit direction dir_a and node B after tau_b along dir_b. Both
// directions point from the (virtual) source toward the receiving node, so
// the source sits at pos_a - c*tau_a*dir_a = pos_b - c*tau_b*dir_b, which
// yields the vector identity  d = c*tau_b*dir_b - c*tau_a*dir_a.

#include "mpcloc/core.hpp"

#include <cstddef>
#include <vector>

namespace mpcloc {

struct MpcTrue {
    double tau_a = 0.0;  // [s]
    double tau_b = 0.0;  // [s]
    Vec3 dir_a = Vec3::UnitX();
    Vec3 dir_b = Vec3::UnitX();
    int observer_id = 0;
    int mpc_id = 0;
};

struct Scenario {
    Vec3 pos_a = Vec3::Zero();
    Vec3 pos_b = Vec3::Zero();
    std::vector<MpcTrue> mpcs;  // grouped by observer, observer ids ascending
    double c = kSpeedOfLight;

    Vec3 relative_position() const { return pos_b - pos_a; }
    std::size_t total_mpcs() const { return mpcs.size(); }
    int observer_count() const;
    std::vector<int> mpcs_per_observer() const;
};

/// Virtual-source distance below which complete_mpc refuses the geometry [m].
inline constexpr double kDegenerateSourceDistance = 1e-12;

/// Fills in the B-side delay and direction of an MPC given its A-side
/// parameters: the virtual source lies at pos_a - c*tau_a*dir_a.
inline MpcTrue complete_mpc(const Vec3& pos_a, const Vec3& pos_b, double tau_a, const Vec3& dir_a,
                            double c = kSpeedOfLight) {
    if (!(tau_a > 0.0)) throw InvalidParams("complete_mpc: tau_a must be positive");
    if (!is_unit(dir_a, 1e-9)) throw InvalidParams("complete_mpc: dir_a must be a unit vector");
    const Vec3 d = pos_b - pos_a;
    const Vec3 path_b = d + c * tau_a * dir_a;
    const double len_b = path_b.norm();
    if (len_b < kDegenerateSourceDistance)
        throw DegenerateGeometry("complete_mpc: virtual source coincides with node B");
    MpcTrue m;
    m.tau_a = tau_a;
    m.dir_a = dir_a;
    m.tau_b = len_b / c;
    m.dir_b = path_b / len_b;
    return m;
}

/// True delay difference tau_b - tau_a.
inline double delay_diff_true(const MpcTrue& m) { return m.tau_b - m.tau_a; }

/// (dir_a + dir_b)^T d - c*delta*(1 + dir_a^T dir_b); zero for consistent geometry.
inline double projection_residual(const MpcTrue& m, const Vec3& d, double c = kSpeedOfLight) {
    return (m.dir_a + m.dir_b).dot(d) - c * delay_diff_true(m) * (1.0 + m.dir_a.dot(m.dir_b));
}

/// dir_a^T d - c*delta. Plane-wave approximation error; shrinks as c*tau_a / |d| grows.
inline double pwa_residual(const MpcTrue& m, const Vec3& d, double c = kSpeedOfLight) {
    return m.dir_a.dot(d) - c * delay_diff_true(m);
}

/// d - (c*tau_b*dir_b - c*tau_a*dir_a); the zero vector for consistent geometry.
inline Vec3 vector_identity_residual(const MpcTrue& m, const Vec3& d, double c = kSpeedOfLight) {
    return d - (c * m.tau_b * m.dir_b - c * m.tau_a * m.dir_a);
}

/// Direction-pair vector s = (dir_a + dir_b) / (1 + dir_a^T dir_b), for which
/// s^T d = c * (tau_b - tau_a). Returns nothing useful when the directions are
/// antiparallel; callers guard the denominator.
inline Vec3 pair_vector(const Vec3& dir_a, const Vec3& dir_b) {
    return (dir_a + dir_b) / (1.0 + dir_a.dot(dir_b));
}

inline int Scenario::observer_count() const {
    int count = 0;
    int last = 0;
    for (std::size_t i = 0; i < mpcs.size(); ++i) {
        if (i == 0 || mpcs[i].observer_id != last) {
            ++count;
            last = mpcs[i].observer_id;
        }
    }
    return count;
}

inline std::vector<int> Scenario::mpcs_per_observer() const {
    std::vector<int> sizes;
    int last = 0;
    for (std::size_t i = 0; i < mpcs.size(); ++i) {
        if (i == 0 || mpcs[i].observer_id != last) {
            sizes.push_back(0);
            last = mpcs[i].observer_id;
        }
        ++sizes.back();
    }
    return sizes;
}

}  // namespace mpcloc
