#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "screenlab/damage.hpp"
#include "screenlab/grid.hpp"

namespace screenlab {

struct InsureeType {
    double theta;  // expected accidents per period
    double a;      // absolute risk aversion
};

struct Coverage {
    double t;   // premium
    double dd;  // deductible
};

// One covariate cell: joint type density on a rectangle plus a damage law.
struct Cell {
    std::string label;
    double wealth = 0.0;
    double th_lo = 0.0, th_hi = 0.0;
    double a_lo = 0.0, a_hi = 0.0;
    std::vector<double> th_grid, a_grid;
    std::vector<std::vector<double>> f;  // density at (th_grid[i], a_grid[j])
    GridDistribution damage;

    double dbar() const { return damage.hi(); }

    // bilinear interpolation of the type density; zero outside the rectangle
    double f_at(double th, double a) const {
        if (th < th_lo || th > th_hi || a < a_lo || a > a_hi) return 0.0;
        std::size_t ni = th_grid.size(), nj = a_grid.size();
        double u = (th - th_lo) / (th_hi - th_lo) * static_cast<double>(ni - 1);
        double v = (a - a_lo) / (a_hi - a_lo) * static_cast<double>(nj - 1);
        std::size_t i = std::min(static_cast<std::size_t>(u), ni - 2);
        std::size_t j = std::min(static_cast<std::size_t>(v), nj - 2);
        double du = u - static_cast<double>(i), dv = v - static_cast<double>(j);
        return f[i][j] * (1 - du) * (1 - dv) + f[i + 1][j] * du * (1 - dv)
             + f[i][j + 1] * (1 - du) * dv + f[i + 1][j + 1] * du * dv;
    }

    double f_mass() const {
        // trapezoid over the rectangle
        std::vector<double> rows(th_grid.size());
        for (std::size_t i = 0; i < th_grid.size(); ++i)
            rows[i] = trapezoid(a_grid, f[i]);
        return trapezoid(th_grid, rows);
    }
};

struct Primitives {
    std::vector<Cell> cells;

    const Cell& cell(std::size_t i = 0) const {
        if (i >= cells.size()) throw std::out_of_range("no such covariate cell");
        return cells[i];
    }

    void validate() const {
        for (const auto& c : cells) {
            if (c.th_lo <= 0.0 || c.a_lo <= 0.0)
                throw std::domain_error("type support must be strictly positive");
            if (!c.damage.valid()) throw std::domain_error("invalid damage CDF");
            if (std::abs(c.f_mass() - 1.0) > 1e-8)
                throw std::domain_error("type density does not integrate to 1");
        }
    }
};

inline double cara_utility(double x, double a) {
    if (a <= 0.0) throw std::domain_error("cara_utility: a must be positive");
    return -std::exp(-a * x);
}

// phi_a = E[e^{aD}]
inline double phi(double a, const GridDistribution& H) {
    if (a <= 0.0) throw std::domain_error("phi: a must be positive");
    return exp_moment_range(H, a, H.lo(), H.hi());
}

// d/da of phi_a
inline double phi_prime(double a, const GridDistribution& H) {
    return exp_moment_d(H, a);
}

// phi*_a(dd) = E[e^{a min(D,dd)}]
inline double phi_star(double a, double dd, const GridDistribution& H) {
    if (dd < H.lo() - 1e-12 || dd > H.hi() + 1e-12)
        throw std::domain_error("phi_star: deductible outside damage support");
    dd = std::min(std::max(dd, H.lo()), H.hi());
    return exp_moment_range(H, a, H.lo(), dd) + std::exp(a * dd) * (1.0 - H.cdf(dd));
}

// psi(a) = (phi_a - 1)/a, so that s = w - theta*psi(a)
inline double psi(double a, const GridDistribution& H) { return (phi(a, H) - 1.0) / a; }

inline double psi_prime(double a, const GridDistribution& H) {
    return (a * phi_prime(a, H) - (phi(a, H) - 1.0)) / (a * a);
}

// inverse of the increasing map a -> psi(a) on [a_min, a_max]; clamps outside
inline double psi_inverse(double target, const GridDistribution& H, double a_min, double a_max) {
    if (target <= psi(a_min, H)) return a_min;
    if (target >= psi(a_max, H)) return a_max;
    return bisect([&](double a) { return psi(a, H) - target; }, a_min, a_max, 1e-14);
}

// certainty equivalent of staying uninsured, strictly decreasing in both types
inline double ce_no_insurance(const InsureeType& ty, const Cell& cell) {
    return cell.wealth - ty.theta * psi(ty.a, cell.damage);
}

inline double ce_with_coverage(const InsureeType& ty, const Coverage& cov, const Cell& cell) {
    return cell.wealth - cov.t
         - ty.theta * (phi_star(ty.a, cov.dd, cell.damage) - 1.0) / ty.a;
}

// CE range of the cell: s_lo attained at (th_hi, a_hi), s_hi at (th_lo, a_lo)
inline double s_lower(const Cell& c) { return ce_no_insurance({c.th_hi, c.a_hi}, c); }
inline double s_upper(const Cell& c) { return ce_no_insurance({c.th_lo, c.a_lo}, c); }

// theta on the s-isocurve at risk aversion a
inline double theta_on_isocurve(double s, double a, const Cell& c) {
    return (c.wealth - s) / psi(a, c.damage);
}

struct A2Report {
    bool ok = true;
    double worst = 0.0;  // largest negative finite difference if violated
};

// A2: the expected-utility gain of the coverage over no insurance must be
// increasing in risk aversion. Utilities are measured relative to wealth
// (CARA levels scale as e^{-aw} across a, so the raw difference is never
// comparable); this normalization preserves preferences at every fixed a.
inline A2Report check_a2(const Coverage& cov, const Cell& cell, std::size_t n_th = 21,
                         std::size_t n_a = 201) {
    A2Report rep;
    auto gain = [&](double th, double a) {
        InsureeType ty{th, a};
        double ce1 = ce_with_coverage(ty, cov, cell);
        double ce0 = ce_no_insurance(ty, cell);
        return cara_utility(ce1 - cell.wealth, a) - cara_utility(ce0 - cell.wealth, a);
    };
    auto ths = linspace(cell.th_lo, cell.th_hi, n_th);
    auto as = linspace(cell.a_lo, cell.a_hi, n_a);
    for (double th : ths) {
        double prev = gain(th, as[0]);
        for (std::size_t j = 1; j < as.size(); ++j) {
            double cur = gain(th, as[j]);
            double diff = cur - prev;
            if (diff < -1e-12 && diff < rep.worst) {
                rep.ok = false;
                rep.worst = diff;
            }
            prev = cur;
        }
    }
    return rep;
}

}  // namespace screenlab
