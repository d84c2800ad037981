#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "screenlab/damage.hpp"
#include "screenlab/grid.hpp"
#include "screenlab/model.hpp"
#include "screenlab/optimize.hpp"

namespace screenlab {

// Two-contract menu. Contract 1 carries the higher deductible (less
// coverage, lower premium); contract 2 covers more and costs more.
struct ContractPair {
    double t1 = 0.0, dd1 = 0.0;
    double t2 = 0.0, dd2 = 0.0;

    Coverage first() const { return {t1, dd1}; }
    Coverage second() const { return {t2, dd2}; }

    void validate(const Cell& c) const {
        if (!(dd2 < dd1) || dd1 > c.dbar() + 1e-12 || dd2 < c.damage.lo() - 1e-12)
            throw std::domain_error("menu: need damage_lo <= dd2 < dd1 <= damage_hi");
        if (!(t2 > t1) || t1 < -1e-12)
            throw std::domain_error("menu: need 0 <= t1 < t2");
    }
};

// Risk threshold at which a type with risk aversion a is indifferent
// between the two contracts; types with theta above it take contract 2.
inline double frontier_theta(const ContractPair& p, double a, const Cell& c) {
    double denom = exp_survival_int(c.damage, a, p.dd2, p.dd1);
    if (denom <= 0.0) throw std::domain_error("frontier_theta: degenerate menu");
    return (p.t2 - p.t1) / denom;
}

struct FrontierPartials {
    double dt1, dt2, ddd1, ddd2;  // partials of the frontier theta in the menu
};

inline FrontierPartials frontier_partials(const ContractPair& p, double a, const Cell& c) {
    double th = frontier_theta(p, a, c);
    double dt = p.t2 - p.t1;
    FrontierPartials g;
    g.dt1 = -th / dt;
    g.dt2 = th / dt;
    g.ddd1 = -th * th * std::exp(a * p.dd1) * (1.0 - c.damage.cdf(p.dd1)) / dt;
    g.ddd2 = th * th * std::exp(a * p.dd2) * (1.0 - c.damage.cdf(p.dd2)) / dt;
    return g;
}

// Largest risk aversion at which the frontier still cuts the type rectangle:
// above it every type takes contract 2.
inline double frontier_a_star(const ContractPair& p, const Cell& c) {
    if (frontier_theta(p, c.a_hi, c) >= c.th_lo) return c.a_hi;
    if (frontier_theta(p, c.a_lo, c) <= c.th_lo) return c.a_lo;
    return bisect([&](double a) { return frontier_theta(p, a, c) - c.th_lo; }, c.a_lo,
                  c.a_hi, 1e-13);
}

namespace detail {

// At fixed a the bilinear density is piecewise linear in theta, so segment
// integrals of f and theta*f are exact.
inline void theta_mass_below(const Cell& c, double a, double cut, double& m0, double& m1) {
    m0 = m1 = 0.0;
    if (cut <= c.th_lo) return;
    double hi = std::min(cut, c.th_hi);
    for (std::size_t i = 0; i + 1 < c.th_grid.size(); ++i) {
        double x0 = std::max(c.th_grid[i], c.th_lo), x1 = std::min(c.th_grid[i + 1], hi);
        if (x1 <= x0) continue;
        double f0 = c.f_at(x0, a), f1 = c.f_at(x1, a);
        m0 += 0.5 * (f0 + f1) * (x1 - x0);
        double slope = (f1 - f0) / (x1 - x0);
        double i1 = 0.5 * (x1 * x1 - x0 * x0);
        double i2 = (x1 * x1 * x1 - x0 * x0 * x0) / 3.0;
        m1 += f0 * i1 + slope * (i2 - x0 * i1);
    }
}

}  // namespace detail

// Market split induced by the menu: shares and conditional mean risks of
// each contract's clientele.
struct MenuPartition {
    double nu1 = 0.0, nu2 = 0.0;      // shares choosing contracts 1 and 2
    double eth1 = 0.0, eth2 = 0.0;    // E[theta | contract]
    double a_star = 0.0;
};

inline MenuPartition partition(const ContractPair& p, const Cell& c, std::size_t na = 2001) {
    p.validate(c);
    MenuPartition out;
    out.a_star = frontier_a_star(p, c);
    auto as = linspace(c.a_lo, c.a_hi, na);
    std::vector<double> m0(na), m1(na);
    for (std::size_t j = 0; j < na; ++j) {
        double thf = frontier_theta(p, as[j], c);
        detail::theta_mass_below(c, as[j], thf, m0[j], m1[j]);
    }
    out.nu1 = trapezoid(as, m0);
    double eth1_raw = trapezoid(as, m1);
    double tot0, tot1;
    {
        std::vector<double> r0(na), r1(na);
        for (std::size_t j = 0; j < na; ++j)
            detail::theta_mass_below(c, as[j], c.th_hi, r0[j], r1[j]);
        tot0 = trapezoid(as, r0);
        tot1 = trapezoid(as, r1);
    }
    out.nu1 /= tot0;  // guard against quadrature mass drift
    eth1_raw /= tot0;
    double etot = tot1 / tot0;
    out.nu2 = 1.0 - out.nu1;
    out.eth1 = out.nu1 > 1e-12 ? eth1_raw / out.nu1 : 0.0;
    out.eth2 = out.nu2 > 1e-12 ? (etot - eth1_raw) / out.nu2 : 0.0;
    return out;
}

inline double expected_profit_pair(const ContractPair& p, const Cell& c,
                                   std::size_t na = 2001) {
    MenuPartition mp = partition(p, c, na);
    double pay1 = p.dd1 >= c.dbar() ? 0.0 : expected_payment(c.damage, p.dd1);
    double pay2 = expected_payment(c.damage, p.dd2);
    return mp.nu1 * (p.t1 - mp.eth1 * pay1) + mp.nu2 * (p.t2 - mp.eth2 * pay2);
}

// Premium of contract 1 pinned by the binding participation constraint of
// the least willing buyer (th_lo, a_lo).
inline double ir_premium(double dd1, const Cell& c) {
    const GridDistribution& H = c.damage;
    double tail = exp_moment_range(H, c.a_lo, dd1, H.hi())
                - std::exp(c.a_lo * dd1) * (1.0 - H.cdf(dd1));
    return c.th_lo / c.a_lo * tail;
}

struct MenuResiduals {
    double e_t1 = 0.0, e_dd1 = 0.0, e_t2 = 0.0, e_dd2 = 0.0, e_ir = 0.0;
    double max_abs() const {
        double m = std::abs(e_t1);
        m = std::max(m, std::abs(e_dd1));
        m = std::max(m, std::abs(e_t2));
        m = std::max(m, std::abs(e_dd2));
        return std::max(m, std::abs(e_ir));
    }
};

// First-order conditions of expected profit in the four menu coordinates,
// with rho the multiplier on the binding participation constraint.
inline MenuResiduals menu_foc(const ContractPair& p, double rho, const Cell& c,
                              std::size_t na = 2001) {
    p.validate(c);
    const GridDistribution& H = c.damage;
    MenuPartition mp = partition(p, c, na);
    double pay1 = p.dd1 >= c.dbar() ? 0.0 : expected_payment(H, p.dd1);
    double pay2 = expected_payment(H, p.dd2);
    double sv1 = 1.0 - H.cdf(p.dd1), sv2 = 1.0 - H.cdf(p.dd2);

    // the frontier only contributes where it crosses the type rectangle
    double aU = frontier_a_star(p, c);
    double aL = c.a_lo;
    if (frontier_theta(p, c.a_lo, c) > c.th_hi) {
        if (frontier_theta(p, aU, c) > c.th_hi)
            aL = aU;
        else
            aL = bisect([&](double a) { return frontier_theta(p, a, c) - c.th_hi; },
                        c.a_lo, aU, 1e-13);
    }
    double I_t1 = 0.0, I_t2 = 0.0, I_d1 = 0.0, I_d2 = 0.0;
    if (aU - aL > 1e-12) {
        auto as = linspace(aL, aU, na);
        std::vector<double> g1(na), g2(na), g3(na), g4(na);
        for (std::size_t j = 0; j < na; ++j) {
            double th = frontier_theta(p, as[j], c);
            double fd = c.f_at(std::min(std::max(th, c.th_lo), c.th_hi), as[j]);
            FrontierPartials fp = frontier_partials(p, as[j], c);
            double dp = (p.t1 - th * pay1) - (p.t2 - th * pay2);  // profit gap 1 vs 2
            g1[j] = dp * fp.dt1 * fd;
            g2[j] = dp * fp.dt2 * fd;
            g3[j] = dp * fp.ddd1 * fd;
            g4[j] = dp * fp.ddd2 * fd;
        }
        I_t1 = trapezoid(as, g1);
        I_t2 = trapezoid(as, g2);
        I_d1 = trapezoid(as, g3);
        I_d2 = trapezoid(as, g4);
    }
    MenuResiduals r;
    r.e_t1 = mp.nu1 + I_t1 - rho;
    r.e_dd1 = mp.nu1 * mp.eth1 * sv1 + I_d1 - rho * c.th_lo * std::exp(c.a_lo * p.dd1) * sv1;
    r.e_t2 = mp.nu2 + I_t2;
    r.e_dd2 = mp.nu2 * mp.eth2 * sv2 + I_d2;
    r.e_ir = p.t1 - ir_premium(p.dd1, c);
    return r;
}

// rho that zeroes the t1 condition; the remaining conditions then judge
// the candidate menu.
inline double implied_rho(const ContractPair& p, const Cell& c, std::size_t na = 2001) {
    MenuResiduals r = menu_foc(p, 0.0, c, na);
    return r.e_t1;
}

struct PairSolution {
    ContractPair menu;
    double rho = 0.0;
    MenuPartition split;
    MenuResiduals residuals;
    double profit = 0.0;
    bool corner = false;  // contract 1 degenerated to the null contract
};

// Profit-maximizing two-contract menu under the participation constraint.
// A simplex search over (dd1, t2, dd2) with t1 pinned by participation
// locates the basin; a Newton polish drives the first-order conditions to
// solver precision. On rectangular designs the optimum routinely sits at
// the corner dd1 = dbar (contract 1 is the null contract), where the dd1
// condition holds identically.
inline PairSolution solve_pair(const Cell& c, std::size_t na = 2001) {
    const double db = c.dbar(), dlo = c.damage.lo();
    auto objective = [&](const std::vector<double>& y) {
        double d1 = y[0], t2 = y[1], d2 = y[2];
        if (d1 > db || d2 < dlo || d2 > d1 - 1e-4 * (db - dlo)) return 1e6;
        ContractPair p{ir_premium(d1, c), d1, t2, d2};
        if (p.t2 <= p.t1) return 1e6;
        try {
            return -expected_profit_pair(p, c, 601);
        } catch (const std::domain_error&) {
            return 1e6;
        }
    };
    std::vector<std::vector<double>> seeds = {
        {db, 0.5 * (db - dlo), dlo + 0.2 * (db - dlo)},
        {dlo + 0.9 * (db - dlo), 0.7 * (db - dlo), dlo + 0.3 * (db - dlo)},
        {dlo + 0.6 * (db - dlo), 0.4 * (db - dlo), dlo + 0.1 * (db - dlo)},
    };
    // premium seeds should be on the scale of willingness to pay
    double wtp = c.th_hi * psi(c.a_hi, c.damage);
    for (auto& s : seeds) s[1] = std::min(s[1], 0.9 * wtp);
    std::vector<double> best;
    double bestv = 1e9;
    for (auto seed : seeds) {
        std::vector<double> step = {0.1 * (db - dlo), 0.1 * wtp, 0.05 * (db - dlo)};
        double v = nelder_mead(objective, seed, step, 1e-12, 3000);
        if (v < bestv) {
            bestv = v;
            best = seed;
        }
    }
    if (best.empty() || bestv >= 1e6)
        throw std::domain_error("solve_pair: search failed to find a feasible menu");

    PairSolution sol;
    sol.corner = best[0] > db - 1e-3 * (db - dlo);
    if (sol.corner) {
        // dd1 = dbar: participation pins t1 = 0 and the dd1 condition is
        // identically zero, leaving a 2x2 system in (t2, dd2)
        std::vector<double> x = {best[1], best[2]};
        auto f = [&](const std::vector<double>& y) {
            ContractPair p{0.0, db, y[0], y[1]};
            MenuResiduals r = menu_foc(p, 0.0, c, na);
            return std::vector<double>{r.e_t2, r.e_dd2};
        };
        newton_solve(f, x, 1e-12, 80, 1e-6);
        sol.menu = {0.0, db, x[0], x[1]};
    } else {
        std::vector<double> x = {ir_premium(best[0], c), best[0], best[1], best[2],
                                 implied_rho({ir_premium(best[0], c), best[0], best[1],
                                              best[2]},
                                             c, na)};
        auto f = [&](const std::vector<double>& y) {
            ContractPair p{y[0], y[1], y[2], y[3]};
            MenuResiduals r = menu_foc(p, y[4], c, na);
            return std::vector<double>{r.e_t1, r.e_dd1, r.e_t2, r.e_dd2, r.e_ir};
        };
        newton_solve(f, x, 1e-12, 80, 1e-6);
        sol.menu = {x[0], x[1], x[2], x[3]};
    }
    sol.rho = implied_rho(sol.menu, c, na);
    sol.residuals = menu_foc(sol.menu, sol.rho, c, na);
    sol.split = partition(sol.menu, c, na);
    sol.profit = expected_profit_pair(sol.menu, c, na);
    return sol;
}

// Contract choice of a single type: certainty-equivalent argmax with ties
// resolved toward contract 1, and the outside option always available.
// Returns 0 (no insurance), 1, or 2.
inline int choose_contract(const InsureeType& ty, const ContractPair& p, const Cell& c) {
    double s0 = ce_no_insurance(ty, c);
    double s1 = ce_with_coverage(ty, p.first(), c);
    double s2 = ce_with_coverage(ty, p.second(), c);
    if (s1 >= s0 - 1e-12 && s1 >= s2) return 1;
    if (s2 >= s0 - 1e-12 && s2 > s1) return 2;
    return 0;
}

}  // namespace screenlab
