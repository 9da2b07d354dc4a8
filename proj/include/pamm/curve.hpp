#ifndef PAMM_CURVE_HPP
#define PAMM_CURVE_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "pamm/errors.hpp"

namespace pamm {

// Admissible interval [a, b] for curve exponents.
struct Bounds {
    double a = 0.5;
    double b = 2.0;

    void validate() const {
        if (!(a > 0.0) || !(a < b))
            throw ValidationError("bounds: require 0 < a < b");
    }
    bool contains(double c) const { return c >= a && c <= b; }
};

// Reserves of the nonperishable asset X and the perishable asset Y.
// Y is held as a real number internally; curve trades move it in whole units.
struct PoolState {
    double x = 0.0;
    double y = 0.0;
};

// Power-family state curve f(x) = y0 * (x / x0)^(-c), anchored at (x0, y0).
// The induced surface is A(x, y) = x^c * y - k with k = x0^c * y0.
struct CurveParams {
    double c = 1.0;
    double x0 = 1.0;
    double y0 = 1.0;
    double k = 1.0;

    static CurveParams make(double c, double x0, double y0) {
        if (!(c > 0.0))
            throw DomainError("curve: exponent c must be positive");
        if (!(x0 > 0.0) || !(y0 > 0.0))
            throw DomainError("curve: anchor reserves must be positive");
        return CurveParams{c, x0, y0, std::pow(x0, c) * y0};
    }
};

inline double eval(const CurveParams& p, double x) {
    if (!(x > 0.0))
        throw DomainError("eval: x must be positive");
    return p.y0 * std::pow(x / p.x0, -p.c);
}

inline double surface(const CurveParams& p, double x, double y) {
    if (!(x > 0.0) || !(y > 0.0))
        throw DomainError("surface: reserves must be positive");
    return std::pow(x, p.c) * y - p.k;
}

// Instantaneous price of Y in units of X: |f'(x)| = c * f(x) / x.
inline double spot_price(const CurveParams& p, double x) {
    if (!(x > 0.0))
        throw DomainError("spot_price: x must be positive");
    return p.c * eval(p, x) / x;
}

// f''(x) = c * (c + 1) * f(x) / x^2, the rate at which price moves against a trade.
inline double slippage(const CurveParams& p, double x) {
    if (!(x > 0.0))
        throw DomainError("slippage: x must be positive");
    return p.c * (p.c + 1.0) * eval(p, x) / (x * x);
}

// Reserve state after buying n whole units of Y along the curve.
inline PoolState state_after_buy(const CurveParams& p, const PoolState& s, long long n) {
    if (n <= 0)
        throw DomainError("buy: unit count must be positive");
    if (static_cast<double>(n) >= s.y)
        throw InsufficientInventoryError("buy: trade would drain Y reserve");
    double y_new = s.y - static_cast<double>(n);
    double x_new = std::pow(p.k / y_new, 1.0 / p.c);
    return PoolState{x_new, y_new};
}

// X payment required to buy n whole units of Y.
inline double cost_to_buy_units(const CurveParams& p, const PoolState& s, long long n) {
    return state_after_buy(p, s, n).x - s.x;
}

inline PoolState state_after_sell(const CurveParams& p, const PoolState& s, long long n) {
    if (n <= 0)
        throw DomainError("sell: unit count must be positive");
    double y_new = s.y + static_cast<double>(n);
    double x_new = std::pow(p.k / y_new, 1.0 / p.c);
    return PoolState{x_new, y_new};
}

// X proceeds from selling n whole units of Y into the pool.
inline double proceeds_to_sell_units(const CurveParams& p, const PoolState& s, long long n) {
    return s.x - state_after_sell(p, s, n).x;
}

// New curve through `anchor` with exponent `new_c`; the anchor is a state of the result.
inline CurveParams rebase(double new_c, const PoolState& anchor, const Bounds& bounds) {
    if (!(anchor.x > 0.0) || !(anchor.y > 0.0))
        throw DomainError("rebase: anchor reserves must be positive");
    if (!bounds.contains(new_c))
        throw BoundsError("rebase: exponent outside [a, b]");
    return CurveParams::make(new_c, anchor.x, anchor.y);
}

// Sampling plan for the numerical AMM-axiom checker.
struct GridSpec {
    double x_lo = 1.0;
    double x_hi = 200.0;
    double y_lo = 1.0;
    double y_hi = 200.0;
    int points_per_axis = 100;
    int convexity_pairs = 2000;
    int fd_points = 32;
    std::uint64_t seed = 0x5eed;
};

struct AxiomReport {
    bool monotone_ok = false;
    bool convexity_ok = false;
    bool differentiability_ok = false;
    double worst_violation = 0.0;
    long long samples_checked = 0;
};

namespace detail {

// Central second differences of the surface at (x, y), relative step `step`.
inline double fd2_xx(const CurveParams& p, double x, double y, double step) {
    double h = x * step;
    return (surface(p, x + h, y) - 2.0 * surface(p, x, y) + surface(p, x - h, y)) / (h * h);
}

inline double fd2_yy(const CurveParams& p, double x, double y, double step) {
    double h = y * step;
    return (surface(p, x, y + h) - 2.0 * surface(p, x, y) + surface(p, x, y - h)) / (h * h);
}

inline double fd2_xy(const CurveParams& p, double x, double y, double step) {
    double hx = x * step;
    double hy = y * step;
    return (surface(p, x + hx, y + hy) - surface(p, x + hx, y - hy) -
            surface(p, x - hx, y + hy) + surface(p, x - hx, y - hy)) /
           (4.0 * hx * hy);
}

}  // namespace detail

// Sampling-based certificate for the three AMM axioms: strict coordinate-wise
// monotonicity of A, strict convexity of the superlevel sets {A >= beta} for
// beta >= 0 (midpoint test at t in {0.25, 0.5, 0.75}), and numerical existence
// of the second partial derivatives (two-step finite-difference convergence).
// Violations are reported, never thrown.
inline AxiomReport check_amm_axioms(const CurveParams& p, const GridSpec& grid,
                                    double tolerance = 1e-8) {
    if (!(grid.x_lo > 0.0) || !(grid.y_lo > 0.0) || !(grid.x_lo < grid.x_hi) ||
        !(grid.y_lo < grid.y_hi))
        throw DomainError("check_amm_axioms: grid must lie in the open positive quadrant");
    if (grid.points_per_axis < 100)
        throw DomainError("check_amm_axioms: need at least 100 points per axis");

    const int n = grid.points_per_axis;
    std::vector<double> xs(n), ys(n);
    for (int i = 0; i < n; ++i) {
        xs[i] = grid.x_lo + (grid.x_hi - grid.x_lo) * i / (n - 1);
        ys[i] = grid.y_lo + (grid.y_hi - grid.y_lo) * i / (n - 1);
    }
    std::vector<double> a(static_cast<std::size_t>(n) * n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            a[static_cast<std::size_t>(i) * n + j] = surface(p, xs[i], ys[j]);
    auto at = [&](int i, int j) { return a[static_cast<std::size_t>(i) * n + j]; };

    AxiomReport report;
    double worst_mono = 0.0, worst_conv = 0.0, worst_diff = 0.0;

    // (i) strictly increasing in each coordinate, on axis-adjacent grid pairs
    for (int i = 0; i + 1 < n; ++i) {
        for (int j = 0; j < n; ++j) {
            double d = at(i + 1, j) - at(i, j);
            worst_mono = std::max(worst_mono, -d / std::max(1.0, std::abs(at(i, j))));
            ++report.samples_checked;
        }
    }
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j + 1 < n; ++j) {
            double d = at(i, j + 1) - at(i, j);
            worst_mono = std::max(worst_mono, -d / std::max(1.0, std::abs(at(i, j))));
            ++report.samples_checked;
        }
    }

    // (ii) strict convexity of superlevel sets: for sampled pairs with
    // A(p1), A(p2) >= 0 and beta = min of the two, A(t p1 + (1-t) p2) > beta
    std::vector<std::pair<int, int>> nonneg;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (at(i, j) >= 0.0) nonneg.emplace_back(i, j);
    std::mt19937_64 rng(grid.seed);
    if (nonneg.size() >= 2) {
        std::uniform_int_distribution<std::size_t> pick(0, nonneg.size() - 1);
        const double ts[3] = {0.25, 0.5, 0.75};
        for (int it = 0; it < grid.convexity_pairs; ++it) {
            auto [i1, j1] = nonneg[pick(rng)];
            auto [i2, j2] = nonneg[pick(rng)];
            if (i1 == i2 && j1 == j2) continue;  // definition requires distinct points
            double beta = std::min(at(i1, j1), at(i2, j2));
            for (double t : ts) {
                double cx = t * xs[i1] + (1.0 - t) * xs[i2];
                double cy = t * ys[j1] + (1.0 - t) * ys[j2];
                double ac = surface(p, cx, cy);
                worst_conv = std::max(worst_conv, (beta - ac) / std::max(1.0, beta));
                ++report.samples_checked;
            }
        }
    }

    // (iii) second partials exist numerically: successive central differences
    // at steps h and h/2 must agree within truncation plus the rounding floor
    std::uniform_int_distribution<int> pick_idx(n / 8, n - 1 - n / 8);
    const double step = 1e-3;
    for (int it = 0; it < grid.fd_points; ++it) {
        double x = xs[pick_idx(rng)];
        double y = ys[pick_idx(rng)];
        double scale = std::abs(std::pow(x, p.c) * y) + p.k;
        double d2[3][2] = {
            {detail::fd2_xx(p, x, y, step), detail::fd2_xx(p, x, y, step / 2)},
            {detail::fd2_yy(p, x, y, step), detail::fd2_yy(p, x, y, step / 2)},
            {detail::fd2_xy(p, x, y, step), detail::fd2_xy(p, x, y, step / 2)},
        };
        for (auto& d : d2) {
            double h = std::min(x, y) * step / 2;
            double noise = 64.0 * 2.2e-16 * scale / (h * h);
            double allowed = std::max(1e-3 * std::abs(d[1]), noise);
            double excess = std::abs(d[1] - d[0]) - allowed;
            worst_diff = std::max(worst_diff, excess / std::max(1.0, std::abs(d[1])));
            ++report.samples_checked;
        }
    }

    report.monotone_ok = worst_mono <= tolerance;
    report.convexity_ok = worst_conv <= tolerance;
    report.differentiability_ok = worst_diff <= tolerance;
    report.worst_violation = std::max({worst_mono, worst_conv, worst_diff, 0.0});
    return report;
}

}  // namespace pamm

#endif
