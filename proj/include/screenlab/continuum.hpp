#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "screenlab/model.hpp"

namespace screenlab {

// Distribution of the no-insurance certainty equivalent s over the type
// rectangle, tabulated on a dense uniform s grid.
struct CEDistribution {
    std::vector<double> s;
    std::vector<double> K;    // CDF
    std::vector<double> k;    // density
    std::vector<double> eth;  // E[theta | s]

    double step() const { return s[1] - s[0]; }

    double interp(const std::vector<double>& y, double v) const {
        if (v <= s.front()) return y.front();
        if (v >= s.back()) return y.back();
        double u = (v - s.front()) / step();
        std::size_t i = std::min(static_cast<std::size_t>(u), s.size() - 2);
        double w = u - static_cast<double>(i);
        return y[i] * (1.0 - w) + y[i + 1] * w;
    }

    double K_at(double v) const { return interp(K, v); }
    double k_at(double v) const { return interp(k, v); }
    double eth_at(double v) const { return interp(eth, v); }
};

// Tabulated psi(a) on a fine grid: cheap evaluation and inversion for the
// inner loops (psi itself costs a full pass over the damage grid).
struct PsiTable {
    std::vector<double> a, v, vp;  // psi and psi'

    explicit PsiTable(const Cell& c, std::size_t n = 8193) {
        a = linspace(c.a_lo, c.a_hi, n);
        v.resize(n);
        vp.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            v[i] = psi(a[i], c.damage);
            vp[i] = psi_prime(a[i], c.damage);
        }
    }

    double step() const { return a[1] - a[0]; }

    double lerp(const std::vector<double>& y, double av) const {
        if (av <= a.front()) return y.front();
        if (av >= a.back()) return y.back();
        double u = (av - a.front()) / step();
        std::size_t i = std::min(static_cast<std::size_t>(u), a.size() - 2);
        double w = u - static_cast<double>(i);
        return y[i] * (1.0 - w) + y[i + 1] * w;
    }

    double psi_at(double av) const { return lerp(v, av); }
    double psi_prime_at(double av) const { return lerp(vp, av); }

    // inverse of the increasing map a -> psi(a), clamped to the table range
    double inverse(double target) const {
        if (target <= v.front()) return a.front();
        if (target >= v.back()) return a.back();
        auto it = std::upper_bound(v.begin(), v.end(), target);
        std::size_t i = static_cast<std::size_t>(it - v.begin()) - 1;
        double w = (target - v[i]) / (v[i + 1] - v[i]);
        return a[i] + w * (a[i + 1] - a[i]);
    }
};

// Push the type density through s = w - theta*psi(a). The s-density is an
// integral along the isocurve: k(s) = int f(theta(s,a), a)/psi(a) da over
// the exact a-interval where the isocurve crosses the rectangle (hard
// clipping on a fixed a-grid leaves node-level noise that the downstream
// root-finder amplifies).
inline CEDistribution derive_K(const Cell& c, std::size_t ns = 16385, std::size_t na = 513) {
    CEDistribution out;
    double s_lo = s_lower(c), s_hi = s_upper(c);
    out.s = linspace(s_lo, s_hi, ns);
    out.k.assign(ns, 0.0);
    out.eth.assign(ns, 0.0);

    PsiTable pt(c);
    for (std::size_t i = 0; i < ns; ++i) {
        double s = out.s[i];
        double ws = c.wealth - s;
        // isocurve inside the rectangle iff psi(a) in [ws/th_hi, ws/th_lo]
        double aL = pt.inverse(ws / c.th_hi);
        double aU = pt.inverse(ws / c.th_lo);
        if (aU - aL < 1e-14) {
            out.eth[i] = i == 0 ? c.th_hi : c.th_lo;
            continue;
        }
        auto agrid = linspace(aL, aU, na);
        std::vector<double> gk(na), ge(na);
        for (std::size_t j = 0; j < na; ++j) {
            double ps = pt.psi_at(agrid[j]);
            double th = std::min(std::max(ws / ps, c.th_lo), c.th_hi);
            double g = c.f_at(th, agrid[j]) / ps;
            gk[j] = g;
            ge[j] = th * g;
        }
        double kd = trapezoid(agrid, gk);
        double en = trapezoid(agrid, ge);
        out.k[i] = kd;
        out.eth[i] = kd > 0.0 ? en / kd : (i == 0 ? c.th_hi : c.th_lo);
    }
    // CDF by cumulative trapezoid, normalized so K(s_hi)=1 exactly
    out.K.assign(ns, 0.0);
    for (std::size_t i = 1; i < ns; ++i)
        out.K[i] = out.K[i - 1] + 0.5 * (out.k[i] + out.k[i - 1]) * out.step();
    double total = out.K.back();
    if (std::abs(total - 1.0) > 1e-4)
        throw std::domain_error("derive_K: mass error, refine the grids");
    for (std::size_t i = 0; i < ns; ++i) out.K[i] /= total;
    for (std::size_t i = 0; i < ns; ++i) out.k[i] /= total;
    return out;
}

// slope of the local incentive constraint: dd'(s) = -eta * t'(s)
inline double eta(double s, double a, double dd, const Cell& c) {
    if (s >= c.wealth) throw std::domain_error("eta: certainty equivalent above wealth");
    if (dd >= c.dbar()) throw std::domain_error("eta: deductible at upper support bound");
    double ph = phi(a, c.damage);
    return (ph - 1.0)
         / (a * (c.wealth - s) * std::exp(a * dd) * (1.0 - c.damage.cdf(dd)));
}

// The solved continuum menu. Participation holds on [s.front(), s_top];
// types with higher certainty equivalents are left at the null contract
// (t=0, dd=dbar), where the binding-IR boundary condition holds identically.
struct ScheduleContinuum {
    double s_bar = 0.0;   // top of the CE support
    double s_top = 0.0;   // last participating CE level
    std::vector<double> s, t, dd, a, e_theta;
    std::vector<double> kratio;   // K(s)/k(s) at the nodes
    std::vector<double> tp, ddp;  // menu slopes: ddp by central differences,
                                  // tp = -ddp/eta (the incentive link)
    CEDistribution ce;

    double dd_at(double sv) const { return interp_on_s(dd, sv); }
    double t_at(double sv) const { return interp_on_s(t, sv); }
    double a_at(double sv) const { return interp_on_s(a, sv); }

    double interp_on_s(const std::vector<double>& y, double v) const {
        if (v <= s.front()) return y.front();
        if (v >= s.back()) return y.back();
        double h = s[1] - s[0];
        double u = (v - s.front()) / h;
        std::size_t i = std::min(static_cast<std::size_t>(u), s.size() - 2);
        double w = u - static_cast<double>(i);
        return y[i] * (1.0 - w) + y[i + 1] * w;
    }
};

namespace detail {

// per-node quantities entering the pointwise optimality condition
struct NodeCoef {
    double a, c1, beta, ap;
};

// binding type: the high-risk-aversion end of the s-isocurve, from the
// exact psi (Newton with bisection fallback; table noise would leak into
// the deductible path)
inline double binding_a(double s, const Cell& c) {
    double target = (c.wealth - s) / c.th_lo;
    if (target >= psi(c.a_hi, c.damage)) return c.a_hi;
    if (target <= psi(c.a_lo, c.damage)) return c.a_lo;
    double a = 0.5 * (c.a_lo + c.a_hi);
    for (int it = 0; it < 60; ++it) {
        double fv = psi(a, c.damage) - target;
        double step = fv / psi_prime(a, c.damage);
        double next = a - step;
        if (next <= c.a_lo || next >= c.a_hi)
            return psi_inverse(target, c.damage, c.a_lo, c.a_hi);
        a = next;
        if (std::abs(step) < 1e-15) break;
    }
    return a;
}

inline NodeCoef node_coef(double s, const Cell& c) {
    NodeCoef n;
    n.a = binding_a(s, c);
    double ph = phi(n.a, c.damage);
    double php = phi_prime(n.a, c.damage);
    n.ap = 0.0;  // slope of the binding-a path
    if (n.a < c.a_hi - 1e-12)
        n.ap = -1.0 / (c.th_lo * psi_prime(n.a, c.damage));
    n.c1 = (ph - 1.0) / (n.a * (c.wealth - s));
    n.beta = 1.0 / (c.wealth - s) + n.ap * (php / (ph - 1.0) - 1.0 / n.a);
    return n;
}

// k(s) and E[theta|s] by direct isocurve integration with exact a-limits
inline void k_eth_direct(double s, const Cell& c, const PsiTable& pt, double& kv, double& ev,
                         std::size_t na = 513) {
    double ws = c.wealth - s;
    double aL = pt.inverse(ws / c.th_hi);
    double aU = pt.inverse(ws / c.th_lo);
    if (aU - aL < 1e-14) {
        kv = 0.0;
        ev = ws / c.th_lo >= pt.v.back() ? c.th_hi : c.th_lo;
        return;
    }
    auto agrid = linspace(aL, aU, na);
    std::vector<double> gk(na), ge(na);
    for (std::size_t j = 0; j < na; ++j) {
        double ps = pt.psi_at(agrid[j]);
        double th = std::min(std::max(ws / ps, c.th_lo), c.th_hi);
        gk[j] = c.f_at(th, agrid[j]) / ps;
        ge[j] = th * gk[j];
    }
    kv = trapezoid(agrid, gk);
    ev = kv > 0.0 ? trapezoid(agrid, ge) / kv : c.th_lo;
}

}  // namespace detail

// pointwise optimality residual in dd at CE level s (Pontryagin condition
// after substituting the local IC slope; the damage CDF cancels)
inline double schedule_residual(double s, double ddv, const Cell& c, double kratio, double eth) {
    auto n = detail::node_coef(s, c);
    return n.c1 * eth * std::exp(-n.a * ddv) + kratio * (n.beta - n.ap * ddv) - 1.0;
}

// node-form residual against the solved schedule's own stored data
inline double schedule_residual(const ScheduleContinuum& sc, std::size_t i, const Cell& c) {
    return schedule_residual(sc.s[i], sc.dd[i], c, sc.kratio[i], sc.e_theta[i]);
}

inline ScheduleContinuum solve_schedule(const Cell& c, std::size_t nodes = 32769,
                                        const CEDistribution* pre = nullptr) {
    ScheduleContinuum out;
    out.ce = pre ? *pre : derive_K(c);
    const CEDistribution& ce = out.ce;
    double s_lo = ce.s.front(), s_hi = ce.s.back();
    out.s_bar = s_hi;
    double dbar = c.dbar();
    PsiTable pt(c);

    // participation boundary: where the optimal deductible reaches dbar
    double eps = 1e-9 * (s_hi - s_lo);
    auto at_top = [&](double s) {
        double kv, ev;
        detail::k_eth_direct(s, c, pt, kv, ev);
        double kr = kv > 0.0 ? ce.K_at(s) / kv : 0.0;
        return schedule_residual(s, dbar, c, kr, ev);
    };
    if (at_top(s_hi - eps) <= 0.0)
        throw std::domain_error("solve_schedule: no participation boundary found");
    out.s_top = at_top(s_lo + eps) >= 0.0
                  ? s_lo + eps
                  : bisect(at_top, s_lo + eps, s_hi - eps, 1e-13);

    out.s = linspace(s_lo, out.s_top, nodes);
    std::size_t n = nodes;
    double h = out.s[1] - out.s[0];
    out.dd.assign(n, 0.0);
    out.a.resize(n);
    out.e_theta.resize(n);
    out.kratio.assign(n, 0.0);

    // K accumulated on the solver grid itself keeps K/k accurate at the
    // smallest scales near s_lo, where the optimal deductible is born
    std::vector<double> kv(n), Kv(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        detail::k_eth_direct(out.s[i], c, pt, kv[i], out.e_theta[i]);
    for (std::size_t i = 1; i < n; ++i)
        Kv[i] = Kv[i - 1] + 0.5 * (kv[i] + kv[i - 1]) * h;

    for (std::size_t i = 0; i < n; ++i) {
        double s = out.s[i];
        auto co = detail::node_coef(s, c);
        out.a[i] = co.a;
        out.kratio[i] = kv[i] > 0.0 ? Kv[i] / kv[i] : 0.0;
        if (i == 0) { out.dd[i] = 0.0; continue; }
        if (i + 1 == n) { out.dd[i] = dbar; continue; }
        double A = co.c1 * out.e_theta[i], B = out.kratio[i];
        auto fn = [&](double d) {
            return A * std::exp(-co.a * d) + B * (co.beta - co.ap * d) - 1.0;
        };
        if (fn(0.0) <= 0.0) { out.dd[i] = 0.0; continue; }
        out.dd[i] = bisect(fn, 0.0, dbar, 1e-15);
    }

    // premium: t'(s) = -dd'(s)/eta integrated backward from t(s_top) = 0
    out.ddp.resize(n);
    out.tp.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        double ddp = (i == 0)       ? (out.dd[1] - out.dd[0]) / h
                     : (i + 1 == n) ? (out.dd[n - 1] - out.dd[n - 2]) / h
                                    : (out.dd[i + 1] - out.dd[i - 1]) / (2.0 * h);
        out.ddp[i] = ddp;
        double ddv = std::min(out.dd[i], dbar - 1e-12);
        out.tp[i] = -ddp / eta(out.s[i], out.a[i], ddv, c);
    }
    out.t.assign(n, 0.0);
    for (std::size_t i = n - 1; i-- > 0;)
        out.t[i] = out.t[i + 1] - 0.5 * (out.tp[i] + out.tp[i + 1]) * h;
    return out;
}

struct MonotoneReport {
    bool ok = true;
    std::size_t first_violation = 0;
};

inline MonotoneReport check_ic_monotone(const ScheduleContinuum& sc) {
    MonotoneReport rep;
    for (std::size_t i = 1; i < sc.dd.size(); ++i) {
        if (sc.dd[i] < sc.dd[i - 1] - 1e-12) {
            rep.ok = false;
            rep.first_violation = i;
            return rep;
        }
    }
    return rep;
}

// expected profit of the solved menu (excluded types contribute zero)
inline double expected_profit_continuum(const ScheduleContinuum& sc, const Cell& c) {
    std::vector<double> integrand(sc.s.size());
    for (std::size_t i = 0; i < sc.s.size(); ++i) {
        double pay = expected_payment(c.damage, sc.dd[i]);
        integrand[i] = (sc.t[i] - sc.e_theta[i] * pay) * sc.ce.k_at(sc.s[i]);
    }
    return trapezoid(sc.s, integrand);
}

}  // namespace screenlab
