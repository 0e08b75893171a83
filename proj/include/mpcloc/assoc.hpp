#pragma once

// MPC association between the A-side and B-side views of each observer:
// regularized direction/delay cost, Hungarian method, and delay sorting.

#include "mpcloc/chansim.hpp"
#include "mpcloc/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

namespace mpcloc {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct AssocConfig {
    double sigma_tau = 26.3e-9;      // delay spread [s]
    double lambda = -1.0;            // [1/s]; negative means 1/sigma_tau
    double angle_gate = deg2rad(30.0);
    double no_match_cost = 1e9;      // cost of leaving an MPC unmatched

    double effective_lambda() const { return lambda < 0.0 ? 1.0 / sigma_tau : lambda; }
    void validate() const {
        if (!(sigma_tau > 0.0)) throw InvalidParams("AssocConfig: sigma_tau must be positive");
        if (!(angle_gate > 0.0) || angle_gate > kPi) throw InvalidParams("AssocConfig: angle_gate must be in (0, pi]");
        if (!(no_match_cost > 0.0)) throw InvalidParams("AssocConfig: no_match_cost must be positive");
    }
};

/// One side (A or B) of an MPC as seen by an observer.
struct SideMpc {
    double tau = 0.0;
    Vec3 dir = Vec3::UnitX();
};

/// Per-observer side lists, outer index = observer position.
using SideSet = std::vector<std::vector<SideMpc>>;

struct ObserverAssignment {
    int observer_id = 0;
    std::vector<int> match;  // match[k] = B index paired with A index k, or -1
    double cost = 0.0;

    bool matched(std::size_t k) const { return match[k] >= 0; }
};

struct Assignment {
    std::vector<ObserverAssignment> observers;
    double total_cost = 0.0;
};

inline double angle_between(const Vec3& a, const Vec3& b) {
    return std::atan2(a.cross(b).norm(), a.dot(b));
}

/// ||dir_b - dir_a||^2 + lambda^2 ((tau_b - mu_b) - (tau_a - mu_a))^2, or
/// +inf when the directions differ by more than the gate angle.
inline double pair_cost(const SideMpc& a, const SideMpc& b, const AssocConfig& cfg, double mu_a, double mu_b) {
    if (angle_between(a.dir, b.dir) > cfg.angle_gate) return kInf;
    const double lam = cfg.effective_lambda();
    const double dt = lam * ((b.tau - mu_b) - (a.tau - mu_a));
    return (b.dir - a.dir).squaredNorm() + dt * dt;
}

/// Minimum-cost perfect matching on a square row-major matrix (potentials
/// form of the Hungarian method). Returns row -> column.
inline std::vector<int> hungarian_square(const std::vector<double>& cost, int n) {
    std::vector<double> u(static_cast<std::size_t>(n + 1), 0.0), v(static_cast<std::size_t>(n + 1), 0.0);
    std::vector<int> p(static_cast<std::size_t>(n + 1), 0), way(static_cast<std::size_t>(n + 1), 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(static_cast<std::size_t>(n + 1), kInf);
        std::vector<char> used(static_cast<std::size_t>(n + 1), 0);
        do {
            used[static_cast<std::size_t>(j0)] = 1;
            const int i0 = p[static_cast<std::size_t>(j0)];
            double delta = kInf;
            int j1 = 0;
            for (int j = 1; j <= n; ++j) {
                if (used[static_cast<std::size_t>(j)]) continue;
                const double cur = cost[static_cast<std::size_t>((i0 - 1) * n + (j - 1))] -
                                   u[static_cast<std::size_t>(i0)] - v[static_cast<std::size_t>(j)];
                if (cur < minv[static_cast<std::size_t>(j)]) {
                    minv[static_cast<std::size_t>(j)] = cur;
                    way[static_cast<std::size_t>(j)] = j0;
                }
                if (minv[static_cast<std::size_t>(j)] < delta) {
                    delta = minv[static_cast<std::size_t>(j)];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[static_cast<std::size_t>(j)]) {
                    u[static_cast<std::size_t>(p[static_cast<std::size_t>(j)])] += delta;
                    v[static_cast<std::size_t>(j)] -= delta;
                } else {
                    minv[static_cast<std::size_t>(j)] -= delta;
                }
            }
            j0 = j1;
        } while (p[static_cast<std::size_t>(j0)] != 0);
        do {
            const int j1 = way[static_cast<std::size_t>(j0)];
            p[static_cast<std::size_t>(j0)] = p[static_cast<std::size_t>(j1)];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<int> row_to_col(static_cast<std::size_t>(n), -1);
    for (int j = 1; j <= n; ++j)
        if (p[static_cast<std::size_t>(j)] > 0) row_to_col[static_cast<std::size_t>(p[static_cast<std::size_t>(j)] - 1)] = j - 1;
    return row_to_col;
}

namespace detail {

inline double assignment_value(const std::vector<double>& cost, int n, const std::vector<int>& r2c) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += cost[static_cast<std::size_t>(i * n + r2c[static_cast<std::size_t>(i)])];
    return s;
}

// Optimal value of the square problem restricted to the free rows/columns.
inline double restricted_optimum(const std::vector<double>& cost, int n, const std::vector<char>& row_free,
                                 const std::vector<char>& col_free) {
    std::vector<int> rows, cols;
    for (int i = 0; i < n; ++i)
        if (row_free[static_cast<std::size_t>(i)]) rows.push_back(i);
    for (int j = 0; j < n; ++j)
        if (col_free[static_cast<std::size_t>(j)]) cols.push_back(j);
    const int m = static_cast<int>(rows.size());
    if (m == 0) return 0.0;
    std::vector<double> sub(static_cast<std::size_t>(m * m));
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j)
            sub[static_cast<std::size_t>(i * m + j)] = cost[static_cast<std::size_t>(rows[static_cast<std::size_t>(i)] * n + cols[static_cast<std::size_t>(j)])];
    return assignment_value(sub, m, hungarian_square(sub, m));
}

}  // namespace detail

/// Rectangular assignment: rows x cols costs (row-major, +inf allowed).
/// Infinite entries and padding cost `no_match_cost`; pairs at or above that
/// cost are reported unmatched. Among optimal solutions the lexicographically
/// smallest (row, column) sequence is returned. Result: row -> column or -1.
inline std::vector<int> solve_assignment(const std::vector<double>& cost, int rows, int cols, double no_match_cost) {
    const int n = std::max(rows, cols);
    std::vector<int> out(static_cast<std::size_t>(rows), -1);
    if (n == 0) return out;
    std::vector<double> sq(static_cast<std::size_t>(n * n), no_match_cost);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) {
            const double cij = cost[static_cast<std::size_t>(i * cols + j)];
            sq[static_cast<std::size_t>(i * n + j)] = std::isfinite(cij) ? std::min(cij, no_match_cost) : no_match_cost;
        }

    double scale = 0.0;
    for (double x : sq) scale = std::max(scale, std::abs(x));
    const double tol = 1e-12 * std::max(1.0, scale) * n;

    std::vector<char> row_free(static_cast<std::size_t>(n), 1), col_free(static_cast<std::size_t>(n), 1);
    double remaining = detail::restricted_optimum(sq, n, row_free, col_free);
    for (int i = 0; i < n; ++i) {
        row_free[static_cast<std::size_t>(i)] = 0;
        for (int j = 0; j < n; ++j) {
            if (!col_free[static_cast<std::size_t>(j)]) continue;
            col_free[static_cast<std::size_t>(j)] = 0;
            const double rest = detail::restricted_optimum(sq, n, row_free, col_free);
            const double with = sq[static_cast<std::size_t>(i * n + j)] + rest;
            if (with <= remaining + tol) {
                if (i < rows && j < cols && sq[static_cast<std::size_t>(i * n + j)] < no_match_cost)
                    out[static_cast<std::size_t>(i)] = j;
                remaining = rest;
                break;
            }
            col_free[static_cast<std::size_t>(j)] = 1;
        }
    }
    return out;
}

/// Per-observer mean delay of one side.
inline double mean_delay(const std::vector<SideMpc>& side) {
    if (side.empty()) return 0.0;
    double s = 0.0;
    for (const auto& m : side) s += m.tau;
    return s / static_cast<double>(side.size());
}

/// Minimum-cost association per observer under pair_cost.
inline Assignment associate(const SideSet& a, const SideSet& b, const AssocConfig& cfg = {},
                            const std::vector<int>& observer_ids = {}) {
    cfg.validate();
    if (a.size() != b.size()) throw InvalidParams("associate: observer count mismatch");
    Assignment out;
    for (std::size_t o = 0; o < a.size(); ++o) {
        const int rows = static_cast<int>(a[o].size());
        const int cols = static_cast<int>(b[o].size());
        const double mu_a = mean_delay(a[o]);
        const double mu_b = mean_delay(b[o]);
        std::vector<double> cost(static_cast<std::size_t>(rows * cols));
        for (int k = 0; k < rows; ++k)
            for (int l = 0; l < cols; ++l)
                cost[static_cast<std::size_t>(k * cols + l)] =
                    pair_cost(a[o][static_cast<std::size_t>(k)], b[o][static_cast<std::size_t>(l)], cfg, mu_a, mu_b);
        ObserverAssignment oa;
        oa.observer_id = observer_ids.empty() ? static_cast<int>(o) : observer_ids.at(o);
        oa.match = solve_assignment(cost, rows, cols, cfg.no_match_cost);
        for (int k = 0; k < rows; ++k)
            if (oa.match[static_cast<std::size_t>(k)] >= 0)
                oa.cost += cost[static_cast<std::size_t>(k * cols + oa.match[static_cast<std::size_t>(k)])];
        out.total_cost += oa.cost;
        out.observers.push_back(std::move(oa));
    }
    return out;
}

/// Matches the i-th smallest A delay with the i-th smallest B delay per observer.
inline Assignment associate_by_sorting(const SideSet& a, const SideSet& b, const std::vector<int>& observer_ids = {}) {
    if (a.size() != b.size()) throw InvalidParams("associate_by_sorting: observer count mismatch");
    Assignment out;
    for (std::size_t o = 0; o < a.size(); ++o) {
        if (a[o].size() != b[o].size())
            throw InvalidParams("associate_by_sorting: A and B MPC counts differ for an observer");
        const auto order = [](const std::vector<SideMpc>& side) {
            std::vector<int> idx(side.size());
            std::iota(idx.begin(), idx.end(), 0);
            std::stable_sort(idx.begin(), idx.end(), [&](int x, int y) {
                return side[static_cast<std::size_t>(x)].tau < side[static_cast<std::size_t>(y)].tau;
            });
            return idx;
        };
        const auto ia = order(a[o]);
        const auto ib = order(b[o]);
        ObserverAssignment oa;
        oa.observer_id = observer_ids.empty() ? static_cast<int>(o) : observer_ids.at(o);
        oa.match.assign(a[o].size(), -1);
        for (std::size_t r = 0; r < ia.size(); ++r) oa.match[static_cast<std::size_t>(ia[r])] = ib[r];
        out.observers.push_back(std::move(oa));
    }
    return out;
}

/// Total pair_cost of an assignment (unmatched MPCs contribute nothing).
inline double assignment_cost(const SideSet& a, const SideSet& b, const Assignment& asg, const AssocConfig& cfg = {}) {
    double total = 0.0;
    for (std::size_t o = 0; o < a.size(); ++o) {
        const double mu_a = mean_delay(a[o]);
        const double mu_b = mean_delay(b[o]);
        const auto& match = asg.observers[o].match;
        for (std::size_t k = 0; k < match.size(); ++k)
            if (match[k] >= 0) total += pair_cost(a[o][k], b[o][static_cast<std::size_t>(match[k])], cfg, mu_a, mu_b);
    }
    return total;
}

/// Splits grouped observations into per-observer A-side and B-side lists.
inline std::pair<SideSet, SideSet> split_sides(const std::vector<MpcObservation>& obs, std::vector<int>* observer_ids = nullptr) {
    SideSet a, b;
    for (const auto& r : observer_ranges(obs)) {
        a.emplace_back();
        b.emplace_back();
        for (std::size_t i = r.first; i < r.last; ++i) {
            a.back().push_back({obs[i].tau_a_meas, obs[i].dir_a_meas});
            b.back().push_back({obs[i].tau_b_meas, obs[i].dir_b_meas});
        }
        if (observer_ids) observer_ids->push_back(r.observer_id);
    }
    return {a, b};
}

/// Rebuilds observations from an assignment; unmatched A-side MPCs are dropped.
inline std::vector<MpcObservation> apply_assignment(const std::vector<MpcObservation>& obs, const Assignment& asg) {
    std::vector<MpcObservation> out;
    const auto ranges = observer_ranges(obs);
    if (ranges.size() != asg.observers.size()) throw InvalidParams("apply_assignment: observer count mismatch");
    for (std::size_t o = 0; o < ranges.size(); ++o) {
        const auto& match = asg.observers[o].match;
        for (std::size_t k = 0; k < match.size(); ++k) {
            if (match[k] < 0) continue;
            MpcObservation m = obs[ranges[o].first + k];
            const MpcObservation& src = obs[ranges[o].first + static_cast<std::size_t>(match[k])];
            m.tau_b_meas = src.tau_b_meas;
            m.dir_b_meas = src.dir_b_meas;
            out.push_back(m);
        }
    }
    return out;
}

}  // namespace mpcloc
