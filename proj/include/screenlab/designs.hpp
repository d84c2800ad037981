#pragma once

#include <cmath>
#include <string>

#include "screenlab/model.hpp"

namespace screenlab {

// inverse standard normal CDF (Acklam's rational approximation, refined by
// one Halley step) — used by the Gaussian-copula design
inline double inv_norm(double p) {
    if (p <= 0.0 || p >= 1.0) throw std::domain_error("inv_norm: p in (0,1) required");
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                               2.445134137142996e+00, 3.754408661907416e+00};
    double q, r, x;
    if (p < 0.02425) {
        q = std::sqrt(-2 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5])
          / ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
    } else if (p > 1 - 0.02425) {
        q = std::sqrt(-2 * std::log(1 - p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5])
          / ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
    } else {
        q = p - 0.5;
        r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q
          / (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1);
    }
    // one Halley refinement
    double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
    double u = e * std::sqrt(2.0 * M_PI) * std::exp(x * x / 2.0);
    return x - u / (1.0 + x * u / 2.0);
}

// Canonical desk-scale design: w=10, (theta,a) uniform on [0.5,1.5]^2,
// damage Uniform[0,1]. Closed forms exist for phi and phi*.
inline Primitives make_u_design(std::size_t type_grid = 65, std::size_t damage_grid = 512) {
    Cell c;
    c.label = "x0";
    c.wealth = 10.0;
    c.th_lo = 0.5; c.th_hi = 1.5;
    c.a_lo = 0.5;  c.a_hi = 1.5;
    c.th_grid = linspace(c.th_lo, c.th_hi, type_grid);
    c.a_grid = linspace(c.a_lo, c.a_hi, type_grid);
    c.f.assign(type_grid, std::vector<double>(type_grid, 1.0));
    c.damage = uniform_distribution(0.0, 1.0, damage_grid);
    Primitives p;
    p.cells.push_back(std::move(c));
    return p;
}

// Same rectangle and damage law, but (theta,a) tied by a Gaussian copula
// with negative correlation, uniform marginals.
inline Primitives make_corr_neg_design(double rho = -0.5, std::size_t type_grid = 65,
                                       std::size_t damage_grid = 512) {
    Primitives p = make_u_design(type_grid, damage_grid);
    Cell& c = p.cells[0];
    double s2 = 1.0 - rho * rho;
    for (std::size_t i = 0; i < type_grid; ++i) {
        double u = (c.th_grid[i] - c.th_lo) / (c.th_hi - c.th_lo);
        u = std::min(std::max(u, 1e-6), 1.0 - 1e-6);
        double z1 = inv_norm(u);
        for (std::size_t j = 0; j < type_grid; ++j) {
            double v = (c.a_grid[j] - c.a_lo) / (c.a_hi - c.a_lo);
            v = std::min(std::max(v, 1e-6), 1.0 - 1e-6);
            double z2 = inv_norm(v);
            double lc = -0.5 * std::log(s2)
                      - (rho * rho * (z1 * z1 + z2 * z2) - 2.0 * rho * z1 * z2) / (2.0 * s2);
            c.f[i][j] = std::exp(lc);
        }
    }
    // renormalize the grid mass exactly to 1
    double m = c.f_mass();
    for (auto& row : c.f)
        for (auto& v : row) v /= m;
    return p;
}

// Discrete two-atom risk mixture used by the mixture-inversion tests:
// theta in {1,2} with equal weights.
struct TwoPointDesign {
    double theta1 = 1.0, theta2 = 2.0;
    double weight1 = 0.5;
};

inline Primitives make_design(const std::string& name) {
    if (name == "u") return make_u_design();
    if (name == "corr-neg") return make_corr_neg_design();
    throw std::domain_error("unknown design: " + name);
}

}  // namespace screenlab
