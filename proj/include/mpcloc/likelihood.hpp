#pragma once

// Soft-indicator likelihood terms and a derivative-free 2-D maximizer for
// the joint (distance, clock offset) likelihoods.

#include "mpcloc/core.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

namespace mpcloc {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

struct ErrorModel {
    enum class Kind { gaussian, none };
    Kind kind = Kind::none;
    // One std dev per MPC, or a single value shared by all MPCs.
    std::vector<double> sigma_per_mpc;

    static ErrorModel noiseless() { return {}; }
    static ErrorModel gaussian(double sigma) { return {Kind::gaussian, {sigma}}; }
    static ErrorModel gaussian(std::vector<double> sigmas) { return {Kind::gaussian, std::move(sigmas)}; }

    double sigma(std::size_t mpc_index) const {
        if (sigma_per_mpc.empty()) return 0.0;
        return sigma_per_mpc.size() == 1 ? sigma_per_mpc.front() : sigma_per_mpc.at(mpc_index);
    }
    double max_sigma() const {
        double s = 0.0;
        for (double v : sigma_per_mpc) s = std::max(s, v);
        return s;
    }
    void validate() const {
        if (kind != Kind::gaussian) return;
        if (sigma_per_mpc.empty()) throw InvalidParams("ErrorModel: gaussian model needs sigma values");
        for (double s : sigma_per_mpc)
            if (!(s > 0.0)) throw InvalidParams("ErrorModel: gaussian sigma must be positive");
    }
};

/// log(erfc(z)), finite far into the upper tail.
inline double log_erfc(double z) {
    if (z < 25.0) return std::log(std::erfc(z));
    const double z2 = z * z;
    const double series = 1.0 - 1.0 / (2.0 * z2) + 3.0 / (4.0 * z2 * z2) - 15.0 / (8.0 * z2 * z2 * z2);
    return -z2 - std::log(z) - 0.5 * std::log(kPi) + std::log(series);
}

/// log of F(x + d/c) - F(x - d/c) for a zero-mean Gaussian CDF F with std dev sigma.
inline double log_gaussian_window(double x, double half_width, double sigma) {
    if (!(half_width > 0.0)) return kNegInf;
    const double ax = std::abs(x);
    const double a = (ax - half_width) / (sigma * std::sqrt(2.0));
    const double b = (ax + half_width) / (sigma * std::sqrt(2.0));
    if (a < 0.0) return std::log(0.5 * (std::erfc(a) - std::erfc(b)));
    const double la = log_erfc(a);
    const double lb = log_erfc(b);
    return std::log(0.5) + la + std::log1p(-std::exp(lb - la));
}

/// Partial derivatives (d/dx, d/dh) of log_gaussian_window at a point where
/// its value is `log_w` (finite).
inline std::array<double, 2> log_gaussian_window_grad(double x, double half_width, double sigma, double log_w) {
    const double log_norm = std::log(sigma * std::sqrt(2.0 * kPi));
    const auto ratio = [&](double y) { return std::exp(-0.5 * (y / sigma) * (y / sigma) - log_norm - log_w); };
    const double hi = ratio(x + half_width);
    const double lo = ratio(x - half_width);
    return {hi - lo, hi + lo};
}

/// Probability that the measurement error places x inside [-d/c, d/c].
inline double soft_indicator(double x, double d_hyp, const ErrorModel& model, std::size_t mpc_index,
                             double c = kSpeedOfLight) {
    if (model.kind == ErrorModel::Kind::none) return std::abs(c * x) <= d_hyp ? 1.0 : 0.0;
    if (!(d_hyp > 0.0)) return 0.0;
    return std::exp(log_gaussian_window(x, d_hyp / c, model.sigma(mpc_index)));
}

inline double log_soft_indicator(double x, double d_hyp, const ErrorModel& model, std::size_t mpc_index,
                                 double c = kSpeedOfLight) {
    if (model.kind == ErrorModel::Kind::none) return std::abs(c * x) <= d_hyp ? 0.0 : kNegInf;
    return log_gaussian_window(x, d_hyp / c, model.sigma(mpc_index));
}

struct GridAxis {
    double min = 0.0;
    double max = 0.0;
    int steps = 0;  // 0 means "derive from the data"

    bool is_set() const { return steps > 0; }
    double at(int i) const { return steps == 1 ? min : min + (max - min) * i / (steps - 1); }
    double spacing() const { return steps > 1 ? (max - min) / (steps - 1) : 0.0; }
    void validate(const char* name) const {
        if (!(max > min) || steps < 2)
            throw InvalidParams(std::string("OptimizerConfig: invalid grid for ") + name);
    }
};

struct OptimizerConfig {
    GridAxis grid_d;    // meters
    GridAxis grid_eps;  // seconds
    int default_steps = 200;
    int refine_iters = 200;
    int multistart_count = 8;
    double tolerance = 1e-4;  // meters; simplex size at which refinement stops
    double d_lower = 1e-6;    // smallest admissible distance hypothesis [m]
    double c = kSpeedOfLight;
};

struct Maximum2d {
    double d = 0.0;
    double eps = 0.0;
    double value = kNegInf;
    double grid_value = kNegInf;
    int evaluations = 0;
    int iterations = 0;
};

using Objective2d = std::function<double(double d_hyp, double eps_hyp)>;
/// Value and partial derivatives {f, df/dd, df/deps} (eps in seconds).
using ValueGrad2d = std::function<std::array<double, 3>(double d_hyp, double eps_hyp)>;

namespace detail {

struct Vertex {
    double u;  // distance [m]
    double v;  // clock offset scaled to meters (c * eps)
    double f;
};

}  // namespace detail

/// Coarse grid scan followed by Nelder-Mead refinement from the best grid
/// cells and from any caller-supplied starting points. Both grids must be set.
/// Ties on the grid go to the lowest d, then the lowest eps.
inline Maximum2d maximize_2d(const Objective2d& objective, const OptimizerConfig& cfg,
                             const std::vector<std::pair<double, double>>& extra_starts = {}) {
    cfg.grid_d.validate("d");
    cfg.grid_eps.validate("eps");
    const double c = cfg.c;
    Maximum2d out;

    auto eval = [&](double d, double eps) {
        ++out.evaluations;
        if (!(d >= cfg.d_lower)) return kNegInf;
        const double f = objective(d, eps);
        return std::isnan(f) ? kNegInf : f;
    };

    struct Cell {
        double f;
        int i;
        int j;
    };
    std::vector<Cell> cells;
    cells.reserve(static_cast<std::size_t>(cfg.grid_d.steps) * static_cast<std::size_t>(cfg.grid_eps.steps));
    for (int i = 0; i < cfg.grid_d.steps; ++i) {
        const double d = std::max(cfg.grid_d.at(i), cfg.d_lower);
        for (int j = 0; j < cfg.grid_eps.steps; ++j) {
            const double f = eval(d, cfg.grid_eps.at(j));
            if (f > kNegInf) cells.push_back({f, i, j});
        }
    }
    if (cells.empty()) throw DegenerateObjective("maximize_2d: objective is zero on the whole grid");

    const auto better = [](const Cell& x, const Cell& y) {
        if (x.f != y.f) return x.f > y.f;
        if (x.i != y.i) return x.i < y.i;
        return x.j < y.j;
    };
    const std::size_t n_starts = std::min(cells.size(), static_cast<std::size_t>(std::max(cfg.multistart_count, 1)));
    std::partial_sort(cells.begin(), cells.begin() + static_cast<std::ptrdiff_t>(n_starts), cells.end(), better);

    out.d = std::max(cfg.grid_d.at(cells[0].i), cfg.d_lower);
    out.eps = cfg.grid_eps.at(cells[0].j);
    out.value = cells[0].f;
    out.grid_value = cells[0].f;

    std::vector<std::pair<double, double>> starts;
    for (std::size_t s = 0; s < n_starts; ++s)
        starts.emplace_back(std::max(cfg.grid_d.at(cells[s].i), cfg.d_lower), cfg.grid_eps.at(cells[s].j));
    starts.insert(starts.end(), extra_starts.begin(), extra_starts.end());

    const double step_u = cfg.grid_d.spacing();
    const double step_v = cfg.grid_eps.spacing() * c;

    for (const auto& [d0, eps0] : starts) {
        std::vector<detail::Vertex> simplex = {
            {d0, c * eps0, 0.0}, {d0 + step_u, c * eps0, 0.0}, {d0, c * eps0 + step_v, 0.0}};
        for (auto& p : simplex) p.f = eval(p.u, p.v / c);
        if (!(simplex[0].f > kNegInf)) continue;

        for (int it = 0; it < cfg.refine_iters; ++it) {
            std::sort(simplex.begin(), simplex.end(), [](const auto& x, const auto& y) { return x.f > y.f; });
            double size = 0.0;
            for (int k = 1; k < 3; ++k)
                size = std::max(size, std::hypot(simplex[k].u - simplex[0].u, simplex[k].v - simplex[0].v));
            if (size < cfg.tolerance) break;
            ++out.iterations;

            const double cu = 0.5 * (simplex[0].u + simplex[1].u);
            const double cv = 0.5 * (simplex[0].v + simplex[1].v);
            auto along = [&](double t) {
                detail::Vertex p{cu + t * (simplex[2].u - cu), cv + t * (simplex[2].v - cv), 0.0};
                p.f = eval(p.u, p.v / c);
                return p;
            };
            const detail::Vertex reflected = along(-1.0);
            if (reflected.f > simplex[0].f) {
                const detail::Vertex expanded = along(-2.0);
                simplex[2] = expanded.f > reflected.f ? expanded : reflected;
            } else if (reflected.f > simplex[1].f) {
                simplex[2] = reflected;
            } else {
                const detail::Vertex contracted =
                    reflected.f > simplex[2].f ? along(-0.5) : along(0.5);
                if (contracted.f > std::max(simplex[2].f, std::min(reflected.f, simplex[2].f)) &&
                    contracted.f > simplex[2].f) {
                    simplex[2] = contracted;
                } else {
                    for (int k = 1; k < 3; ++k) {
                        simplex[k].u = 0.5 * (simplex[k].u + simplex[0].u);
                        simplex[k].v = 0.5 * (simplex[k].v + simplex[0].v);
                        simplex[k].f = eval(simplex[k].u, simplex[k].v / c);
                    }
                }
            }
        }
        for (const auto& p : simplex) {
            if (p.f > out.value) {
                out.value = p.f;
                out.d = p.u;
                out.eps = p.v / c;
            }
        }
    }
    return out;
}

/// Newton refinement of a Nelder-Mead result on a smooth objective, with
/// the Hessian taken from central differences of the gradient. The start is
/// returned unchanged unless the iteration converges to a nearby maximum.
inline Maximum2d polish_2d(const ValueGrad2d& fg, const Maximum2d& start, const OptimizerConfig& cfg) {
    const double c = cfg.c;
    const auto grad = [&](double u, double v) {
        const auto r = fg(u, v / c);
        return std::array<double, 3>{r[0], r[1], r[2] / c};
    };
    const double h = 1e-7;
    double u = start.d, v = c * start.eps;
    bool converged = false;
    Maximum2d out = start;
    for (int it = 0; it < 30; ++it) {
        const auto g = grad(u, v);
        ++out.evaluations;
        if (!std::isfinite(g[0]) || !std::isfinite(g[1]) || !std::isfinite(g[2])) return start;
        // Forward differences in d next to the lower bound.
        const bool at_floor = u - h < cfg.d_lower;
        const auto gu_hi = grad(at_floor ? u + 2.0 * h : u + h, v);
        const auto gu_lo = at_floor ? g : grad(u - h, v);
        const auto gv_hi = grad(u, v + h);
        const auto gv_lo = grad(u, v - h);
        out.evaluations += 4;
        const double huu = (gu_hi[1] - gu_lo[1]) / (2.0 * h);
        const double hvv = (gv_hi[2] - gv_lo[2]) / (2.0 * h);
        const double huv = 0.5 * ((gu_hi[2] - gu_lo[2]) + (gv_hi[1] - gv_lo[1])) / (2.0 * h);
        const double det = huu * hvv - huv * huv;
        const bool definite = huu < 0.0 && hvv < 0.0 && det > 0.0;
        if (!(hvv < 0.0) || (!definite && u > cfg.d_lower)) return start;

        double su = 0.0;
        double sv = -g[2] / hvv;
        if (definite) {
            su = -(hvv * g[1] - huv * g[2]) / det;
            sv = -(huu * g[2] - huv * g[1]) / det;
        }
        if (u + su < cfg.d_lower) {
            su = cfg.d_lower - u;
            sv = -(g[2] + huv * su) / hvv;
        }
        u += su;
        v += sv;
        ++out.iterations;
        if (std::hypot(su, sv) < 1e-13 * std::max(1.0, std::abs(u) + std::abs(v))) {
            converged = true;
            break;
        }
    }
    if (!converged) return start;
    if (std::hypot(u - start.d, v - c * start.eps) > 10.0 * cfg.tolerance + 10.0 * std::max(cfg.grid_d.spacing(), 0.0))
        return start;
    const double f = grad(u, v)[0];
    if (!(f >= start.value - 1e-9 * (1.0 + std::abs(start.value)))) return start;
    out.d = u;
    out.eps = v / c;
    out.value = f;
    return out;
}

}  // namespace mpcloc
