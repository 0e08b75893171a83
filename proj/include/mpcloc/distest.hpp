#pragma once

// Distance estimators from per-MPC delay differences.

#include "mpcloc/chansim.hpp"
#include "mpcloc/core.hpp"
#include "mpcloc/likelihood.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <optional>
#include <string_view>
#include <vector>

namespace mpcloc {

struct DelayDiffSet {
    std::vector<std::vector<double>> diffs;  // per observer, seconds

    std::size_t total() const {
        std::size_t k = 0;
        for (const auto& g : diffs) k += g.size();
        return k;
    }
    std::vector<double> flat() const {
        std::vector<double> out;
        out.reserve(total());
        for (const auto& g : diffs) out.insert(out.end(), g.begin(), g.end());
        return out;
    }
    static DelayDiffSet from_observations(const std::vector<MpcObservation>& obs) {
        DelayDiffSet set;
        for (const auto& r : observer_ranges(obs)) {
            std::vector<double> g;
            for (std::size_t i = r.first; i < r.last; ++i) g.push_back(obs[i].delay_diff());
            set.diffs.push_back(std::move(g));
        }
        return set;
    }
    static DelayDiffSet single(std::vector<double> values) { return {{std::move(values)}}; }
};

enum class DistanceMethod { mvue_async, mle_async_noiseless, mle_sync, mvue_sync, mle_async_gaussian, mle_async_noassoc };

constexpr std::string_view to_string(DistanceMethod m) {
    switch (m) {
        case DistanceMethod::mvue_async: return "mvue_async";
        case DistanceMethod::mle_async_noiseless: return "mle_async_noiseless";
        case DistanceMethod::mle_sync: return "mle_sync";
        case DistanceMethod::mvue_sync: return "mvue_sync";
        case DistanceMethod::mle_async_gaussian: return "mle_async_gaussian";
        case DistanceMethod::mle_async_noassoc: return "mle_async_noassoc";
    }
    return "unknown";
}

struct OptimizerDiagnostics {
    double value = 0.0;  // log-likelihood at the estimate
    int evaluations = 0;
    int iterations = 0;
};

struct DistanceEstimate {
    double d_hat = 0.0;    // meters
    double eps_hat = 0.0;  // seconds
    DistanceMethod method = DistanceMethod::mvue_async;
    std::optional<OptimizerDiagnostics> diagnostics;
};

namespace detail {

inline std::pair<double, double> min_max(const std::vector<double>& v) {
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    return {*lo, *hi};
}

inline void require_async(std::size_t k) {
    if (k < 2) throw InsufficientMpcs("distance estimator needs at least two delay differences");
}

}  // namespace detail

/// Noiseless-model MLE: half the spread of the delay differences.
inline DistanceEstimate mle_async_noiseless(const DelayDiffSet& set, double c = kSpeedOfLight) {
    const auto v = set.flat();
    detail::require_async(v.size());
    const auto [lo, hi] = detail::min_max(v);
    return {0.5 * c * (hi - lo), 0.5 * (hi + lo), DistanceMethod::mle_async_noiseless, std::nullopt};
}

/// Bias-corrected noiseless MLE, unbiased under uniform c*delta ~ U(-d, d).
inline DistanceEstimate mvue_async(const DelayDiffSet& set, double c = kSpeedOfLight) {
    DistanceEstimate e = mle_async_noiseless(set, c);
    const auto k = static_cast<double>(set.total());
    e.d_hat *= (k + 1.0) / (k - 1.0);
    e.method = DistanceMethod::mvue_async;
    return e;
}

/// Synchronized nodes (eps = 0): d_hat = c * max |delta|.
inline DistanceEstimate mle_sync(const DelayDiffSet& set, double c = kSpeedOfLight) {
    const auto v = set.flat();
    if (v.empty()) throw InsufficientMpcs("mle_sync: no delay differences");
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return {c * m, 0.0, DistanceMethod::mle_sync, std::nullopt};
}

inline DistanceEstimate mvue_sync(const DelayDiffSet& set, double c = kSpeedOfLight) {
    DistanceEstimate e = mle_sync(set, c);
    const auto k = static_cast<double>(set.total());
    e.d_hat *= (k + 1.0) / k;
    e.method = DistanceMethod::mvue_sync;
    return e;
}

/// log of (1/d^K) * prod_k I(delta_k - eps, d) for known association.
inline double known_assoc_log_objective(const DelayDiffSet& set, const ErrorModel& model, double d_hyp,
                                        double eps_hyp, double c = kSpeedOfLight) {
    if (!(d_hyp > 0.0)) return kNegInf;
    double acc = 0.0;
    std::size_t idx = 0;
    for (const auto& g : set.diffs) {
        for (double x : g) {
            acc += log_soft_indicator(x - eps_hyp, d_hyp, model, idx++, c);
            if (acc == kNegInf) return kNegInf;
        }
    }
    return acc - static_cast<double>(idx) * std::log(d_hyp);
}

/// known_assoc_log_objective with its partial derivatives in d and eps
/// (gaussian model).
inline std::array<double, 3> known_assoc_value_grad(const DelayDiffSet& set, const ErrorModel& model, double d_hyp,
                                                    double eps_hyp, double c = kSpeedOfLight) {
    if (!(d_hyp > 0.0)) return {kNegInf, 0.0, 0.0};
    double f = 0.0, gd = 0.0, ge = 0.0;
    std::size_t idx = 0;
    for (const auto& g : set.diffs) {
        for (double x : g) {
            const double sigma = model.sigma(idx++);
            const double lw = log_gaussian_window(x - eps_hyp, d_hyp / c, sigma);
            if (lw == kNegInf) return {kNegInf, 0.0, 0.0};
            const auto dl = log_gaussian_window_grad(x - eps_hyp, d_hyp / c, sigma, lw);
            f += lw;
            gd += dl[1] / c;
            ge -= dl[0];
        }
    }
    const auto k = static_cast<double>(idx);
    return {f - k * std::log(d_hyp), gd - k / d_hyp, ge};
}

namespace detail {

// Fills unset grids with ranges centered on the data so that shifting every
// delay difference by a constant shifts the eps grid by the same constant.
inline OptimizerConfig with_default_grids(OptimizerConfig cfg, double lo, double hi, double sigma_max) {
    const double c = cfg.c;
    const double spread = hi - lo;
    const double pad = 3.0 * sigma_max;
    if (!cfg.grid_d.is_set()) {
        double d_max = c * spread + 2.0 * c * pad;
        if (!(d_max > 0.0)) d_max = 1.0;
        cfg.grid_d = {0.0, d_max, cfg.default_steps};
    }
    if (!cfg.grid_eps.is_set()) {
        double half = 0.5 * spread + pad;
        if (!(half > 0.0)) half = 1e-9;
        cfg.grid_eps = {-half, half, cfg.default_steps};
    }
    return cfg;
}

inline void shift_eps_grid(OptimizerConfig& cfg, double shift) {
    cfg.grid_eps.min -= shift;
    cfg.grid_eps.max -= shift;
}

}  // namespace detail

/// Joint ML estimate of distance and clock offset under a general error
/// model, found numerically. A noiseless model falls back to the closed form.
inline DistanceEstimate mle_async_gaussian(const DelayDiffSet& set, const ErrorModel& model,
                                           const OptimizerConfig& cfg = {}) {
    const auto v = set.flat();
    detail::require_async(v.size());
    model.validate();
    if (model.kind == ErrorModel::Kind::none) return mle_async_noiseless(set, cfg.c);

    const auto [lo, hi] = detail::min_max(v);
    const double ref = 0.5 * (lo + hi);
    DelayDiffSet centered = set;
    for (auto& g : centered.diffs)
        for (double& x : g) x -= ref;

    OptimizerConfig local = cfg;
    const bool eps_user = cfg.grid_eps.is_set();
    local = detail::with_default_grids(local, lo - ref, hi - ref, model.max_sigma());
    if (eps_user) detail::shift_eps_grid(local, ref);

    const double c = cfg.c;
    const auto objective = [&](double d, double eps) {
        return known_assoc_log_objective(centered, model, d, eps, c);
    };
    const std::vector<std::pair<double, double>> seeds = {{std::max(0.5 * c * (hi - lo), cfg.d_lower), 0.0}};
    const Maximum2d coarse = maximize_2d(objective, local, seeds);
    const Maximum2d best = polish_2d(
        [&](double d, double eps) { return known_assoc_value_grad(centered, model, d, eps, c); }, coarse, local);
    return {best.d, best.eps + ref, DistanceMethod::mle_async_gaussian,
            OptimizerDiagnostics{best.value, best.evaluations, best.iterations}};
}

// ---------------------------------------------------------------------------
// Unknown association

/// Largest K_o for which the permutation sum is evaluated.
inline constexpr int kDefaultPermutationCap = 8;

/// Permanent of a row-major n x n matrix by summing over all permutations.
inline double permanent_enumeration(const std::vector<double>& a, int n) {
    if (n == 0) return 1.0;
    std::vector<int> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    double sum = 0.0;
    do {
        double prod = 1.0;
        for (int i = 0; i < n && prod != 0.0; ++i) prod *= a[static_cast<std::size_t>(i * n + perm[static_cast<std::size_t>(i)])];
        sum += prod;
    } while (std::next_permutation(perm.begin(), perm.end()));
    return sum;
}

/// Ryser's inclusion-exclusion formula with Gray-code column subsets.
inline double permanent_ryser(const std::vector<double>& a, int n) {
    if (n == 0) return 1.0;
    std::vector<double> row_sums(static_cast<std::size_t>(n), 0.0);
    double total = 0.0;
    const unsigned long subsets = 1UL << n;
    unsigned long gray_prev = 0;
    for (unsigned long s = 1; s < subsets; ++s) {
        const unsigned long gray = s ^ (s >> 1);
        const unsigned long changed = gray ^ gray_prev;
        const int j = __builtin_ctzl(changed);
        const double sign_col = (gray & changed) ? 1.0 : -1.0;
        for (int i = 0; i < n; ++i) row_sums[static_cast<std::size_t>(i)] += sign_col * a[static_cast<std::size_t>(i * n + j)];
        gray_prev = gray;
        double prod = 1.0;
        for (double r : row_sums) prod *= r;
        const int bits = __builtin_popcountl(gray);
        total += ((n - bits) % 2 == 0) ? prod : -prod;
    }
    return total;
}

inline double permanent(const std::vector<double>& a, int n) {
    return n <= 6 ? permanent_enumeration(a, n) : permanent_ryser(a, n);
}

namespace detail {

inline void check_noassoc_inputs(const std::vector<std::vector<double>>& tau_a,
                                 const std::vector<std::vector<double>>& tau_b, int cap) {
    if (tau_a.size() != tau_b.size()) throw InvalidParams("mle_async_noassoc: observer count mismatch");
    std::size_t k = 0;
    for (std::size_t o = 0; o < tau_a.size(); ++o) {
        if (tau_a[o].size() != tau_b[o].size())
            throw InvalidParams("mle_async_noassoc: A and B MPC counts differ for an observer");
        if (static_cast<int>(tau_a[o].size()) > cap)
            throw PermutationCapExceeded("mle_async_noassoc: too many MPCs for the permutation sum");
        k += tau_a[o].size();
    }
    require_async(k);
}

// Log of the per-observer permutation sum, with each row of the indicator
// matrix scaled by its largest entry to keep the products representable.
inline double log_permanent_of_logs(std::vector<double>& log_entries, int n) {
    double log_scale = 0.0;
    for (int i = 0; i < n; ++i) {
        double row_max = kNegInf;
        for (int j = 0; j < n; ++j) row_max = std::max(row_max, log_entries[static_cast<std::size_t>(i * n + j)]);
        if (row_max == kNegInf) return kNegInf;
        log_scale += row_max;
        for (int j = 0; j < n; ++j) {
            double& e = log_entries[static_cast<std::size_t>(i * n + j)];
            e = std::exp(e - row_max);
        }
    }
    const double p = permanent(log_entries, n);
    return p > 0.0 ? log_scale + std::log(p) : kNegInf;
}

}  // namespace detail

/// log of (1/d^K) * prod_o sum_{pi} prod_k I(tau_b[pi(k)] - tau_a[k] - eps, d).
/// The error std dev of MPC k of observer o is looked up by its position in
/// the observer-major A-side ordering.
inline double noassoc_log_objective(const std::vector<std::vector<double>>& tau_a,
                                    const std::vector<std::vector<double>>& tau_b, const ErrorModel& model,
                                    double d_hyp, double eps_hyp, double c = kSpeedOfLight) {
    if (!(d_hyp > 0.0)) return kNegInf;
    double acc = 0.0;
    std::size_t base = 0;
    std::vector<double> m;
    for (std::size_t o = 0; o < tau_a.size(); ++o) {
        const int n = static_cast<int>(tau_a[o].size());
        m.assign(static_cast<std::size_t>(n * n), 0.0);
        for (int k = 0; k < n; ++k)
            for (int l = 0; l < n; ++l)
                m[static_cast<std::size_t>(k * n + l)] = log_soft_indicator(
                    tau_b[o][static_cast<std::size_t>(l)] - tau_a[o][static_cast<std::size_t>(k)] - eps_hyp, d_hyp,
                    model, base + static_cast<std::size_t>(k), c);
        acc += detail::log_permanent_of_logs(m, n);
        if (acc == kNegInf) return kNegInf;
        base += static_cast<std::size_t>(n);
    }
    return acc - static_cast<double>(base) * std::log(d_hyp);
}

/// noassoc_log_objective with its partial derivatives in d and eps
/// (gaussian model). Each pairing (k, l) contributes with the weight
/// M_kl perm(M without row k, column l) / perm(M).
inline std::array<double, 3> noassoc_value_grad(const std::vector<std::vector<double>>& tau_a,
                                                const std::vector<std::vector<double>>& tau_b, const ErrorModel& model,
                                                double d_hyp, double eps_hyp, double c = kSpeedOfLight) {
    if (!(d_hyp > 0.0)) return {kNegInf, 0.0, 0.0};
    const double h = d_hyp / c;
    double f = 0.0, gd = 0.0, ge = 0.0;
    std::size_t base = 0;
    std::vector<double> logs, m, minor;
    for (std::size_t o = 0; o < tau_a.size(); ++o) {
        const int n = static_cast<int>(tau_a[o].size());
        const auto at = [n](int k, int l) { return static_cast<std::size_t>(k * n + l); };
        const auto x_of = [&](int k, int l) {
            return tau_b[o][static_cast<std::size_t>(l)] - tau_a[o][static_cast<std::size_t>(k)] - eps_hyp;
        };
        logs.assign(static_cast<std::size_t>(n * n), 0.0);
        for (int k = 0; k < n; ++k)
            for (int l = 0; l < n; ++l)
                logs[at(k, l)] = log_gaussian_window(x_of(k, l), h, model.sigma(base + static_cast<std::size_t>(k)));
        m = logs;
        const double lp = detail::log_permanent_of_logs(m, n);  // m now holds the row-scaled matrix
        if (lp == kNegInf) return {kNegInf, 0.0, 0.0};
        const double p = permanent(m, n);
        f += lp;
        for (int k = 0; k < n; ++k)
            for (int l = 0; l < n; ++l) {
                if (m[at(k, l)] == 0.0) continue;
                minor.clear();
                for (int r = 0; r < n; ++r)
                    for (int q = 0; q < n; ++q)
                        if (r != k && q != l) minor.push_back(m[at(r, q)]);
                const double w = m[at(k, l)] * permanent(minor, n - 1) / p;
                if (w == 0.0) continue;
                const auto dl = log_gaussian_window_grad(x_of(k, l), h, model.sigma(base + static_cast<std::size_t>(k)),
                                                         logs[at(k, l)]);
                gd += w * dl[1] / c;
                ge -= w * dl[0];
            }
        base += static_cast<std::size_t>(n);
    }
    const auto k_total = static_cast<double>(base);
    return {f - k_total * std::log(d_hyp), gd - k_total / d_hyp, ge};
}

struct WedgeCandidate {
    double d;
    double eps;
};

/// Wedge apexes (0, delta_i) and pairwise border intersections
/// (c|delta_i - delta_j|/2, (delta_i + delta_j)/2) over all cross differences
/// delta = tau_b[l] - tau_a[k] within each observer.
inline std::vector<WedgeCandidate> wedge_candidates(const std::vector<std::vector<double>>& tau_a,
                                                    const std::vector<std::vector<double>>& tau_b,
                                                    double c = kSpeedOfLight) {
    std::vector<double> cross;
    for (std::size_t o = 0; o < tau_a.size(); ++o)
        for (double ta : tau_a[o])
            for (double tb : tau_b[o]) cross.push_back(tb - ta);
    std::vector<WedgeCandidate> out;
    out.reserve(cross.size() * (cross.size() + 1) / 2);
    for (double x : cross) out.push_back({0.0, x});
    for (std::size_t i = 0; i < cross.size(); ++i)
        for (std::size_t j = i + 1; j < cross.size(); ++j)
            out.push_back({0.5 * c * std::abs(cross[i] - cross[j]), 0.5 * (cross[i] + cross[j])});
    return out;
}

namespace detail {

// Noiseless objective at a wedge candidate: feasibility is tested with a
// small relative slack because candidates sit exactly on wedge borders.
struct HardScore {
    int feasible_observers = 0;
    double log_value = kNegInf;  // log of the noiseless objective when every observer is feasible
};

inline HardScore hard_score(const std::vector<std::vector<double>>& tau_a,
                            const std::vector<std::vector<double>>& tau_b, double d_hyp, double eps_hyp,
                            double c) {
    const double slack = 1e-9 * d_hyp + 1e-12;
    HardScore s;
    double log_sum = 0.0;
    std::size_t k_total = 0;
    std::vector<double> m;
    for (std::size_t o = 0; o < tau_a.size(); ++o) {
        const int n = static_cast<int>(tau_a[o].size());
        m.assign(static_cast<std::size_t>(n * n), 0.0);
        for (int k = 0; k < n; ++k)
            for (int l = 0; l < n; ++l) {
                const double x = tau_b[o][static_cast<std::size_t>(l)] - tau_a[o][static_cast<std::size_t>(k)] - eps_hyp;
                m[static_cast<std::size_t>(k * n + l)] = std::abs(c * x) <= d_hyp + slack ? 1.0 : 0.0;
            }
        const double p = permanent(m, n);
        if (p > 0.5) {
            ++s.feasible_observers;
            log_sum += std::log(p);
        }
        k_total += static_cast<std::size_t>(n);
    }
    if (s.feasible_observers == static_cast<int>(tau_a.size()))
        s.log_value = log_sum - static_cast<double>(k_total) * std::log(d_hyp);
    return s;
}

}  // namespace detail

/// Joint ML estimate of distance and clock offset when the A/B association
/// within each observer is unknown.
inline DistanceEstimate mle_async_noassoc(const std::vector<std::vector<double>>& tau_a,
                                          const std::vector<std::vector<double>>& tau_b, const ErrorModel& model,
                                          const OptimizerConfig& cfg = {}, int cap = kDefaultPermutationCap) {
    detail::check_noassoc_inputs(tau_a, tau_b, cap);
    model.validate();
    const double c = cfg.c;

    // Work relative to the midrange of all cross differences.
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (std::size_t o = 0; o < tau_a.size(); ++o)
        for (double ta : tau_a[o])
            for (double tb : tau_b[o]) {
                lo = std::min(lo, tb - ta);
                hi = std::max(hi, tb - ta);
            }
    const double ref = 0.5 * (lo + hi);
    auto shifted_b = tau_b;
    for (auto& g : shifted_b)
        for (double& t : g) t -= ref;

    auto candidates = wedge_candidates(tau_a, shifted_b, c);
    for (auto& cand : candidates) cand.d = std::max(cand.d, cfg.d_lower);

    if (model.kind == ErrorModel::Kind::none) {
        const WedgeCandidate* best = nullptr;
        detail::HardScore best_score;
        for (const auto& cand : candidates) {
            const auto s = detail::hard_score(tau_a, shifted_b, cand.d, cand.eps, c);
            const bool take = best == nullptr || s.feasible_observers > best_score.feasible_observers ||
                              (s.feasible_observers == best_score.feasible_observers &&
                               (cand.d < best->d || (cand.d == best->d && cand.eps < best->eps)));
            if (take) {
                best = &cand;
                best_score = s;
            }
        }
        return {best->d, best->eps + ref, DistanceMethod::mle_async_noassoc,
                OptimizerDiagnostics{best_score.log_value, static_cast<int>(candidates.size()), 0}};
    }

    const auto objective = [&](double d, double eps) {
        return noassoc_log_objective(tau_a, shifted_b, model, d, eps, c);
    };

    // Wedge intersections are the noiseless maxima; the best of them seed
    // the local search next to the grid cells.
    std::vector<std::pair<double, std::size_t>> scored;
    scored.reserve(candidates.size());
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        const double f = objective(candidates[i].d, candidates[i].eps);
        if (f > kNegInf) scored.emplace_back(f, i);
    }
    const std::size_t n_seed = std::min(scored.size(), static_cast<std::size_t>(std::max(cfg.multistart_count, 1)));
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(n_seed), scored.end(),
                      [](const auto& x, const auto& y) { return x.first != y.first ? x.first > y.first : x.second < y.second; });
    std::vector<std::pair<double, double>> seeds;
    for (std::size_t i = 0; i < n_seed; ++i) seeds.emplace_back(candidates[scored[i].second].d, candidates[scored[i].second].eps);

    OptimizerConfig local = cfg;
    const bool eps_user = cfg.grid_eps.is_set();
    local = detail::with_default_grids(local, lo - ref, hi - ref, model.max_sigma());
    if (eps_user) detail::shift_eps_grid(local, ref);

    const Maximum2d coarse = maximize_2d(objective, local, seeds);
    const Maximum2d best = polish_2d(
        [&](double d, double eps) { return noassoc_value_grad(tau_a, shifted_b, model, d, eps, c); }, coarse, local);
    return {best.d, best.eps + ref, DistanceMethod::mle_async_noassoc,
            OptimizerDiagnostics{best.value, best.evaluations, best.iterations}};
}

}  // namespace mpcloc
