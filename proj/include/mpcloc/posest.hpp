#pragma once

// Relative-position estimators: least squares on delay differences (exact
// pair vectors or plane-wave approximation), GLS, and least squares on the
// raw delays with per-observer clock offsets.

#include "mpcloc/chansim.hpp"
#include "mpcloc/core.hpp"
#include "mpcloc/geom.hpp"

#include <Eigen/Dense>

#include <string_view>
#include <vector>

namespace mpcloc {

enum class PositionMethod { lse_by_delta, lse_by_delta_pwa, gls_by_delta, lse_by_tau, lse_by_tau_sync };

constexpr std::string_view to_string(PositionMethod m) {
    switch (m) {
        case PositionMethod::lse_by_delta: return "lse_by_delta";
        case PositionMethod::lse_by_delta_pwa: return "lse_by_delta_pwa";
        case PositionMethod::gls_by_delta: return "gls_by_delta";
        case PositionMethod::lse_by_tau: return "lse_by_tau";
        case PositionMethod::lse_by_tau_sync: return "lse_by_tau_sync";
    }
    return "unknown";
}

struct PositionEstimate {
    Vec3 d_vec = Vec3::Zero();      // meters
    double eps_hat = 0.0;           // seconds
    std::vector<double> eps_a_hats;  // seconds, one per observer (by-tau only)
    PositionMethod method = PositionMethod::lse_by_delta;
    double condition_number = 1.0;   // of the normal matrix
};

/// Threshold on 1 + dir_a^T dir_b below which a pair vector is refused.
inline constexpr double kAntiparallelGuard = 1e-6;
/// Largest accepted condition number of the normal matrix.
inline constexpr double kMaxCondition = 1e12;

/// Stacked delay-difference system E^T [d; c*eps] = c*delta. Row k of
/// `rows` is [s_k^T, 1]; `rhs` is in meters.
struct StackedDiffSystem {
    Eigen::MatrixXd rows;
    Eigen::VectorXd rhs;
    std::vector<Vec3> s_vectors;
};

inline StackedDiffSystem stack_delta_system(const std::vector<MpcObservation>& obs, bool plane_wave,
                                            double c = kSpeedOfLight) {
    const auto k = static_cast<Eigen::Index>(obs.size());
    StackedDiffSystem sys{Eigen::MatrixXd(k, 4), Eigen::VectorXd(k), {}};
    sys.s_vectors.reserve(obs.size());
    for (Eigen::Index i = 0; i < k; ++i) {
        const MpcObservation& m = obs[static_cast<std::size_t>(i)];
        Vec3 s;
        if (plane_wave) {
            s = m.dir_a_meas;
        } else {
            const double denom = 1.0 + m.dir_a_meas.dot(m.dir_b_meas);
            if (denom <= kAntiparallelGuard)
                throw AntiparallelDirections("lse_by_delta: MPC with nearly antiparallel A/B directions");
            s = (m.dir_a_meas + m.dir_b_meas) / denom;
        }
        sys.rows.block<1, 3>(i, 0) = s.transpose();
        sys.rows(i, 3) = 1.0;
        sys.rhs(i) = c * m.delay_diff();
        sys.s_vectors.push_back(s);
    }
    return sys;
}

namespace detail {

// Squared ratio of extreme singular values, i.e. cond(A^T A).
inline double normal_condition(const Eigen::MatrixXd& a) {
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
    const auto& sv = svd.singularValues();
    if (sv.size() == 0 || sv(sv.size() - 1) <= 0.0) return std::numeric_limits<double>::infinity();
    const double r = sv(0) / sv(sv.size() - 1);
    return r * r;
}

inline Eigen::VectorXd solve_full_rank(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, double& cond,
                                       const char* who) {
    if (a.rows() < a.cols()) throw RankDeficient(std::string(who) + ": fewer equations than unknowns");
    cond = normal_condition(a);
    if (!(cond <= kMaxCondition)) throw RankDeficient(std::string(who) + ": normal matrix is singular or ill-conditioned");
    return a.colPivHouseholderQr().solve(b);
}

inline PositionEstimate delta_estimate(const StackedDiffSystem& sys, PositionMethod method, double c,
                                       const char* who) {
    if (sys.rows.rows() < 4) throw RankDeficient(std::string(who) + ": needs at least four MPCs");
    PositionEstimate e;
    const Eigen::VectorXd x = solve_full_rank(sys.rows, sys.rhs, e.condition_number, who);
    e.d_vec = x.head<3>();
    e.eps_hat = x(3) / c;
    e.method = method;
    return e;
}

}  // namespace detail

/// Least squares on the delay differences with exact pair vectors
/// s = (dir_a + dir_b) / (1 + dir_a^T dir_b).
inline PositionEstimate lse_by_delta(const std::vector<MpcObservation>& obs, double c = kSpeedOfLight) {
    return detail::delta_estimate(stack_delta_system(obs, false, c), PositionMethod::lse_by_delta, c,
                                  "lse_by_delta");
}

/// As lse_by_delta, with s replaced by the A-side direction (plane-wave approximation).
inline PositionEstimate lse_by_delta_pwa(const std::vector<MpcObservation>& obs, double c = kSpeedOfLight) {
    return detail::delta_estimate(stack_delta_system(obs, true, c), PositionMethod::lse_by_delta_pwa, c,
                                  "lse_by_delta_pwa");
}

/// Generalized least squares for delay-difference errors with mean `error_mean`
/// and covariance `error_cov` (seconds, seconds^2).
inline PositionEstimate gls_by_delta(const std::vector<MpcObservation>& obs, const Eigen::VectorXd& error_mean,
                                     const Eigen::MatrixXd& error_cov, double c = kSpeedOfLight) {
    const auto k = static_cast<Eigen::Index>(obs.size());
    if (error_mean.size() != k || error_cov.rows() != k || error_cov.cols() != k)
        throw InvalidParams("gls_by_delta: error moments do not match the MPC count");
    if (!error_cov.isApprox(error_cov.transpose(), 1e-12))
        throw NotPositiveDefinite("gls_by_delta: covariance is not symmetric");
    const Eigen::LLT<Eigen::MatrixXd> llt(error_cov);
    if (llt.info() != Eigen::Success) throw NotPositiveDefinite("gls_by_delta: covariance is not positive definite");

    StackedDiffSystem sys = stack_delta_system(obs, false, c);
    sys.rhs -= c * error_mean;
    sys.rows = llt.matrixL().solve(sys.rows);
    sys.rhs = llt.matrixL().solve(sys.rhs);
    return detail::delta_estimate(sys, PositionMethod::gls_by_delta, c, "gls_by_delta");
}

/// Stacked raw-delay system G x = t with x = [d; c*eps; c*eps_1^A .. c*eps_M^A].
struct StackedTauSystem {
    Eigen::MatrixXd g;
    Eigen::VectorXd t;
    std::vector<int> observer_ids;
};

inline StackedTauSystem stack_tau_system(const std::vector<MpcObservation>& obs, double c = kSpeedOfLight) {
    const auto ranges = observer_ranges(obs);
    const auto m = static_cast<Eigen::Index>(ranges.size());
    const auto k = static_cast<Eigen::Index>(obs.size());
    StackedTauSystem sys{Eigen::MatrixXd::Zero(3 * k, 4 + m), Eigen::VectorXd(3 * k), {}};
    Eigen::Index row = 0;
    for (Eigen::Index o = 0; o < m; ++o) {
        const auto& r = ranges[static_cast<std::size_t>(o)];
        sys.observer_ids.push_back(r.observer_id);
        for (std::size_t i = r.first; i < r.last; ++i, row += 3) {
            const MpcObservation& mp = obs[i];
            sys.g.block<3, 3>(row, 0).setIdentity();
            sys.g.block<3, 1>(row, 3) = mp.dir_b_meas;
            sys.g.block<3, 1>(row, 4 + o) = mp.dir_b_meas - mp.dir_a_meas;
            sys.t.segment<3>(row) = c * mp.tau_b_meas * mp.dir_b_meas - c * mp.tau_a_meas * mp.dir_a_meas;
        }
    }
    return sys;
}

/// Joint least squares for d, eps and every A-side observer clock offset
/// from the raw measured delays. An observer whose offset column vanishes
/// (all its MPCs have dir_a == dir_b, e.g. d = 0) does not make d
/// unidentifiable; its offset is then reported as the minimum-norm value 0.
inline PositionEstimate lse_by_tau(const std::vector<MpcObservation>& obs, double c = kSpeedOfLight) {
    const StackedTauSystem sys = stack_tau_system(obs, c);
    const Eigen::Index n = sys.g.cols();
    if (sys.g.rows() < n) throw RankDeficient("lse_by_tau: fewer equations than unknowns");

    std::vector<Eigen::Index> keep;
    for (Eigen::Index j = 0; j < n; ++j)
        if (j < 4 || sys.g.col(j).norm() > 1e-12) keep.push_back(j);
    Eigen::MatrixXd g(sys.g.rows(), static_cast<Eigen::Index>(keep.size()));
    for (std::size_t j = 0; j < keep.size(); ++j) g.col(static_cast<Eigen::Index>(j)) = sys.g.col(keep[j]);

    PositionEstimate e;
    const Eigen::VectorXd x = detail::solve_full_rank(g, sys.t, e.condition_number, "lse_by_tau");
    e.d_vec = x.head<3>();
    e.eps_hat = x(3) / c;
    e.eps_a_hats.assign(static_cast<std::size_t>(n - 4), 0.0);
    for (std::size_t j = 4; j < keep.size(); ++j)
        e.eps_a_hats[static_cast<std::size_t>(keep[j] - 4)] = x(static_cast<Eigen::Index>(j)) / c;
    e.method = PositionMethod::lse_by_tau;
    return e;
}

/// Synchronized variant: componentwise mean of c*tau_b*dir_b - c*tau_a*dir_a.
inline PositionEstimate lse_by_tau_sync(const std::vector<MpcObservation>& obs, double c = kSpeedOfLight) {
    if (obs.empty()) throw InsufficientMpcs("lse_by_tau_sync: no MPCs");
    Vec3 sum = Vec3::Zero();
    for (const auto& m : obs) sum += c * m.tau_b_meas * m.dir_b_meas - c * m.tau_a_meas * m.dir_a_meas;
    PositionEstimate e;
    e.d_vec = sum / static_cast<double>(obs.size());
    e.method = PositionMethod::lse_by_tau_sync;
    return e;
}

}  // namespace mpcloc
