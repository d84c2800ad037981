#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "screenlab/continuum.hpp"
#include "screenlab/mixture.hpp"
#include "screenlab/model.hpp"
#include "screenlab/optimize.hpp"
#include "screenlab/population.hpp"

namespace screenlab {

// Deductible-side observables: everything the recovery formulas consume,
// read off the exact schedule at functional level or estimated from records
// at sample level.
struct DeductibleCurves {
    double wealth = 0.0;
    double insured_mass = 1.0;     // population share holding a contract
    std::vector<double> dd;        // interior evaluation grid, increasing
    std::vector<double> G, g;      // deductible CDF and density among the insured
    std::vector<double> tp1, tp2;  // first and second derivatives of the premium in dd
    std::vector<double> e_theta;   // E[theta | dd] from claim counts
};

inline DeductibleCurves curves_from_schedule(const ScheduleContinuum& sc, double wealth,
                                             std::size_t m = 128, double trim = 0.02) {
    DeductibleCurves cur;
    cur.wealth = wealth;
    double ktop = sc.ce.K_at(sc.s_top);
    cur.insured_mass = ktop;
    double span = sc.s_top - sc.s.front();
    auto sv = linspace(sc.s.front() + trim * span, sc.s_top - trim * span, m);
    cur.dd.resize(m);
    cur.G.resize(m);
    cur.g.resize(m);
    cur.tp1.resize(m);
    cur.tp2.resize(m);
    cur.e_theta.resize(m);
    // Differentiate the premium slope along the solver's fine uniform grid and
    // only then interpolate; differencing the coarse nonuniform dd nodes loses
    // accuracy exactly where the slope flattens out.
    std::size_t ns = sc.s.size();
    std::vector<double> tp1s(ns), tp2s(ns);
    for (std::size_t j = 0; j < ns; ++j) tp1s[j] = sc.tp[j] / sc.ddp[j];
    for (std::size_t j = 0; j < ns; ++j) {
        std::size_t lo = j == 0 ? 0 : j - 1, hi = j + 1 == ns ? j : j + 1;
        tp2s[j] = (tp1s[hi] - tp1s[lo]) / (sc.s[hi] - sc.s[lo]) / sc.ddp[j];
    }
    for (std::size_t i = 0; i < m; ++i) {
        double s = sv[i];
        double ddp = sc.interp_on_s(sc.ddp, s);
        if (ddp <= 0.0) throw std::domain_error("curves_from_schedule: flat deductible path");
        cur.dd[i] = sc.dd_at(s);
        cur.G[i] = sc.ce.K_at(s) / ktop;
        cur.g[i] = sc.ce.k_at(s) / (ktop * ddp);
        cur.tp1[i] = sc.interp_on_s(sc.tp, s) / ddp;
        cur.tp2[i] = sc.interp_on_s(tp2s, s);
        cur.e_theta[i] = sc.interp_on_s(sc.e_theta, s);
    }
    return cur;
}

// Inversion of the observed deductible side back into the latent screening
// coordinates: risk aversion, certainty-equivalent level, and its CDF.
struct RecoveredSchedule {
    std::vector<double> dd, a, s, K, k;
    double insured_mass = 1.0;

    double interp(const std::vector<double>& y, double sv) const {
        if (sv <= s.front()) return y.front();
        if (sv >= s.back()) return y.back();
        auto it = std::upper_bound(s.begin(), s.end(), sv);
        std::size_t i = static_cast<std::size_t>(it - s.begin()) - 1;
        double w = (sv - s[i]) / (s[i + 1] - s[i]);
        return y[i] * (1.0 - w) + y[i + 1] * w;
    }
    double k_at(double sv) const { return interp(k, sv); }
    double K_at(double sv) const { return interp(K, sv); }
};

inline RecoveredSchedule recover_schedule(const DeductibleCurves& cur,
                                          const GridDistribution& H) {
    std::size_t m = cur.dd.size();
    RecoveredSchedule out;
    out.insured_mass = cur.insured_mass;
    out.dd = cur.dd;
    out.a.resize(m);
    out.s.resize(m);
    out.K.resize(m);
    for (std::size_t i = 0; i < m; ++i) {
        double dd = cur.dd[i];
        double sv1 = 1.0 - H.cdf(dd);
        double h = H.density(dd);
        if (cur.tp1[i] >= 0.0)
            throw std::domain_error("recover_schedule: premium must decrease in deductible");
        if (sv1 <= 0.0 || cur.G[i] <= 0.0)
            throw std::domain_error("recover_schedule: curve not identified at this node");
        double a = (cur.g[i] / cur.G[i] * (cur.tp1[i] + cur.e_theta[i] * sv1) + cur.tp2[i])
                     / cur.tp1[i]
                 + h / sv1;
        if (a <= 0.0) throw std::domain_error("recover_schedule: nonpositive risk aversion");
        double denom = a * std::exp(a * dd) * sv1;
        double s = cur.wealth + cur.tp1[i] * (phi(a, H) - 1.0) / denom;
        if (s >= cur.wealth)
            throw std::domain_error("recover_schedule: certainty equivalent above wealth");
        out.a[i] = a;
        out.s[i] = s;
        out.K[i] = cur.G[i] * cur.insured_mass;
    }
    if (out.s.back() <= out.s.front())
        throw std::domain_error("recover_schedule: recovered s not increasing");
    // sampling noise can leave small local wiggles; pool adjacent violators
    // so the recovered level is usable as an interpolation coordinate
    {
        std::vector<double> w(m, 1.0);
        std::vector<double> sv = out.s;
        std::size_t i = 0;
        while (i + 1 < sv.size()) {
            if (sv[i + 1] < sv[i]) {
                sv[i] = (w[i] * sv[i] + w[i + 1] * sv[i + 1]) / (w[i] + w[i + 1]);
                w[i] += w[i + 1];
                sv.erase(sv.begin() + i + 1);
                w.erase(w.begin() + i + 1);
                if (i > 0) --i;
            } else {
                ++i;
            }
        }
        std::size_t j = 0;
        double used = 0.0;
        for (std::size_t r = 0; r < m; ++r) {
            out.s[r] = sv[j];
            if (++used >= w[j] && j + 1 < sv.size()) {
                ++j;
                used = 0.0;
            }
        }
        double eps = 1e-9 * (out.s.back() - out.s.front());
        for (std::size_t r = 1; r < m; ++r)
            out.s[r] = std::max(out.s[r], out.s[r - 1] + eps);
    }
    out.k.resize(m);
    for (std::size_t i = 0; i < m; ++i) {
        std::size_t lo = i == 0 ? 0 : i - 1, hi = i + 1 == m ? i : i + 1;
        out.k[i] = (out.K[hi] - out.K[lo]) / (out.s[hi] - out.s[lo]);
    }
    return out;
}

// Damage law from truncated claims: each reported damage D is observed
// subject to D > dd of its record, so the collection is left-truncated data
// and the product-limit estimator applies. Identification is anchored at
// the bottom of the menu where deductibles approach zero.
inline GridDistribution recover_H_case2(const std::vector<ObservationRecord>& recs,
                                        const std::vector<double>& grid,
                                        std::size_t min_risk = 0,
                                        double anchor_limit = 0.05) {
    std::vector<double> dmg, trunc;
    for (const auto& r : recs) {
        if (r.chi != 1 && r.chi != 2) continue;
        for (double d : r.damages) {
            dmg.push_back(d);
            trunc.push_back(r.dd);
        }
    }
    if (dmg.empty()) throw std::domain_error("recover_H_case2: no reported claims");
    // claims near the bottom of the menu are scarce, so the risk-set floor
    // scales with the claim count to keep the early factors stable
    if (min_risk == 0) min_risk = std::max<std::size_t>(50, dmg.size() / 500);
    std::sort(dmg.begin(), dmg.end());
    std::sort(trunc.begin(), trunc.end());
    double span = grid.back() - grid.front();
    std::size_t n = dmg.size();
    // survivor by product limit over ordered damages
    std::vector<double> surv(n);
    double sprod = 1.0;
    bool anchored = false;
    double d_anchor = grid.front();
    for (std::size_t j = 0; j < n; ++j) {
        double d = dmg[j];
        // pairs at risk: damage >= d and truncation point < d
        std::size_t below = static_cast<std::size_t>(
            std::lower_bound(trunc.begin(), trunc.end(), d) - trunc.begin());
        std::size_t risk = below - j;  // damages < d are exactly the first j
        if (!anchored) {
            if (risk >= min_risk) {
                if (d - grid.front() > anchor_limit * span)
                    throw std::domain_error(
                        "recover_H_case2: no near-full-coverage subpopulation; damage law "
                        "not identified");
                anchored = true;
                d_anchor = d;
            } else {
                surv[j] = 1.0;
                continue;
            }
        }
        if (risk > 0) sprod *= 1.0 - 1.0 / static_cast<double>(risk);
        surv[j] = sprod;
    }
    if (!anchored)
        throw std::domain_error("recover_H_case2: too few claims to anchor the estimator");
    // the product limit delivers the law conditional on exceeding the anchor
    // point; complete the short unidentified head by local-linear extension
    // and rescale so the pieces join into one CDF
    auto cond_cdf = [&](double x) {
        auto it = std::upper_bound(dmg.begin(), dmg.end(), x);
        std::size_t j = static_cast<std::size_t>(it - dmg.begin());
        return j == 0 ? 0.0 : 1.0 - surv[j - 1];
    };
    double window = 0.05 * span;
    double slope = cond_cdf(d_anchor + window) / window;
    double head = d_anchor - grid.front();
    double f_anchor = slope * head / (1.0 + slope * head);
    GridDistribution out;
    out.x = grid;
    out.F.resize(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (grid[i] <= d_anchor)
            out.F[i] = head > 0.0 ? f_anchor * (grid[i] - grid.front()) / head : 0.0;
        else
            out.F[i] = f_anchor + (1.0 - f_anchor) * cond_cdf(grid[i]);
    }
    out.F.front() = 0.0;
    out.F.back() = 1.0;
    for (std::size_t i = 1; i < out.F.size(); ++i) out.F[i] = std::max(out.F[i], out.F[i - 1]);
    return out;
}

// theta support of the conditional distribution at CE level s, from the
// known type rectangle and the damage law
inline std::pair<double, double> theta_support_at(double s, double wealth, double th_lo,
                                                  double th_hi, double a_lo, double a_hi,
                                                  const GridDistribution& H) {
    double ws = wealth - s;
    double lo = std::max(th_lo, ws / psi(a_hi, H));
    double hi = std::min(th_hi, ws / psi(a_lo, H));
    return {lo, hi};
}

// noise-free conditional moments E[theta^k | s] along the isocurve —
// the functional-level stand-in for count-moment estimates
inline std::vector<double> conditional_theta_moments(double s, const Cell& c,
                                                     const PsiTable& pt, int K = 8,
                                                     std::size_t na = 513) {
    double ws = c.wealth - s;
    double aL = pt.inverse(ws / c.th_hi);
    double aU = pt.inverse(ws / c.th_lo);
    std::vector<double> mu(static_cast<std::size_t>(K) + 1, 0.0);
    mu[0] = 1.0;
    if (aU - aL < 1e-14) {
        double th = std::min(std::max(ws / pt.psi_at(aL), c.th_lo), c.th_hi);
        for (int k = 1; k <= K; ++k) mu[static_cast<std::size_t>(k)] = std::pow(th, k);
        return mu;
    }
    auto agrid = linspace(aL, aU, na);
    std::vector<std::vector<double>> integ(static_cast<std::size_t>(K) + 1,
                                           std::vector<double>(na));
    for (std::size_t j = 0; j < na; ++j) {
        double ps = pt.psi_at(agrid[j]);
        double th = std::min(std::max(ws / ps, c.th_lo), c.th_hi);
        double base = c.f_at(th, agrid[j]) / ps;
        double pw = base;
        integ[0][j] = base;
        for (int k = 1; k <= K; ++k) {
            pw *= th;
            integ[static_cast<std::size_t>(k)][j] = pw;
        }
    }
    double k0 = trapezoid(agrid, integ[0]);
    if (k0 <= 0.0) throw std::domain_error("conditional_theta_moments: empty isocurve");
    for (int k = 1; k <= K; ++k)
        mu[static_cast<std::size_t>(k)] = trapezoid(agrid, integ[static_cast<std::size_t>(k)]) / k0;
    return mu;
}

// Full Case 1/2 identification output.
struct ContinuumIdentification {
    RecoveredSchedule sched;
    GridDistribution H;
    std::vector<double> s_bins;
    std::vector<MixingDistribution> theta_given_s;
    std::vector<double> th_grid, a_grid;
    std::vector<std::vector<double>> f;  // recovered joint density

    // conditional density f(theta | s) with linear blending across bins
    double theta_density(double th, double sv) const {
        if (s_bins.empty()) throw std::domain_error("theta_density: no bins");
        auto eval = [&](std::size_t b) {
            const MixingDistribution& mx = theta_given_s[b];
            if (th <= mx.grid.front() || th >= mx.grid.back()) return 0.0;
            auto it = std::upper_bound(mx.grid.begin(), mx.grid.end(), th);
            std::size_t i = static_cast<std::size_t>(it - mx.grid.begin()) - 1;
            double w = (th - mx.grid[i]) / (mx.grid[i + 1] - mx.grid[i]);
            return mx.density[i] * (1.0 - w) + mx.density[i + 1] * w;
        };
        if (sv <= s_bins.front()) return eval(0);
        if (sv >= s_bins.back()) return eval(s_bins.size() - 1);
        auto it = std::upper_bound(s_bins.begin(), s_bins.end(), sv);
        std::size_t b = static_cast<std::size_t>(it - s_bins.begin()) - 1;
        double w = (sv - s_bins[b]) / (s_bins[b + 1] - s_bins[b]);
        return eval(b) * (1.0 - w) + eval(b + 1) * w;
    }

    double joint_mass() const {
        std::vector<double> rows(th_grid.size());
        for (std::size_t i = 0; i < th_grid.size(); ++i) rows[i] = trapezoid(a_grid, f[i]);
        return trapezoid(th_grid, rows);
    }
};

// change of variables from (theta | s) conditionals and the CE density back
// to the joint type density: f(theta,a) = f(theta|s) * k(s) * theta * psi'(a)
// evaluated at s = w - theta*psi(a); zero outside the identified s-range
inline void assemble_joint(ContinuumIdentification& out, double wealth, double th_lo,
                           double th_hi, double a_lo, double a_hi,
                           std::size_t out_nodes = 65) {
    out.th_grid = linspace(th_lo, th_hi, out_nodes);
    out.a_grid = linspace(a_lo, a_hi, out_nodes);
    out.f.assign(out_nodes, std::vector<double>(out_nodes, 0.0));
    for (std::size_t j = 0; j < out_nodes; ++j) {
        double a = out.a_grid[j];
        double ps = psi(a, out.H);
        double psp = psi_prime(a, out.H);
        for (std::size_t i = 0; i < out_nodes; ++i) {
            double th = out.th_grid[i];
            double s = wealth - th * ps;
            if (s < out.sched.s.front() || s > out.sched.s.back()) continue;
            double ks = out.sched.k_at(s);
            out.f[i][j] = out.theta_density(th, s) * ks * th * psp;
        }
    }
}

// Case 1/2 pipeline at functional level: exact curves from the schedule and
// exact conditional count moments; support bounds are taken as known.
inline ContinuumIdentification identify_continuum_functional(const ScheduleContinuum& sc,
                                                             const Cell& c,
                                                             const GridDistribution& H,
                                                             std::size_t nbins = 128,
                                                             std::size_t out_nodes = 65) {
    ContinuumIdentification out;
    out.H = H;
    DeductibleCurves cur = curves_from_schedule(sc, c.wealth);
    out.sched = recover_schedule(cur, H);
    PsiTable pt(c);
    out.s_bins = linspace(out.sched.s.front(), out.sched.s.back(), nbins);
    out.theta_given_s.reserve(nbins);
    for (double s : out.s_bins) {
        auto mu = conditional_theta_moments(s, c, pt);
        auto [lo, hi] = theta_support_at(s, c.wealth, c.th_lo, c.th_hi, c.a_lo, c.a_hi, H);
        if (hi - lo < 1e-6) {
            MixingDistribution atom;
            atom.atomic = true;
            atom.grid = {0.5 * (lo + hi)};
            atom.weights = {1.0};
            atom.density = {1.0};
            out.theta_given_s.push_back(atom);
        } else {
            out.theta_given_s.push_back(invert_mixture_smooth(mu, lo, hi));
        }
    }
    assemble_joint(out, c.wealth, c.th_lo, c.th_hi, c.a_lo, c.a_hi, out_nodes);
    return out;
}

// ---- sample-level pipeline ----

inline DeductibleCurves curves_from_records(const std::vector<ObservationRecord>& recs,
                                            const GridDistribution& H, double wealth,
                                            DamageObs obs, std::size_t nbins = 32,
                                            double bw_frac = 0.08) {
    std::vector<std::size_t> ins;
    for (std::size_t i = 0; i < recs.size(); ++i)
        if (recs[i].chi >= 1) ins.push_back(i);
    if (ins.size() < nbins * 20)
        throw std::domain_error("curves_from_records: too few insured records");
    std::sort(ins.begin(), ins.end(),
              [&](std::size_t a, std::size_t b) { return recs[a].dd < recs[b].dd; });
    std::size_t n = ins.size();
    std::vector<double> dds(n), ts(n);
    for (std::size_t i = 0; i < n; ++i) {
        dds[i] = recs[ins[i]].dd;
        ts[i] = recs[ins[i]].t;
    }
    DeductibleCurves cur;
    cur.wealth = wealth;
    cur.insured_mass = static_cast<double>(n) / recs.size();
    double bw = bw_frac * (dds.back() - dds.front());
    for (std::size_t b = 0; b < nbins; ++b) {
        std::size_t lo = b * n / nbins, hi = (b + 1) * n / nbins;
        std::size_t mid = (lo + hi) / 2;
        double ddc = dds[mid];
        // skip degenerate bins hugging the support ends
        if (ddc - dds.front() < 1e-3 || dds.back() - ddc < 1e-3) continue;
        double G = static_cast<double>(mid) / n;
        double glo = static_cast<double>(lo) / n, ghi = static_cast<double>(hi) / n;
        double g = (ghi - glo) / (dds[std::min(hi, n - 1)] - dds[lo]);
        double tp1, tp2;
        local_quadratic(dds, ts, ddc, bw, tp1, tp2);
        double cnt = 0.0, tot = 0.0;
        for (std::size_t i = lo; i < hi; ++i) {
            tot += 1.0;
            cnt += recs[ins[i]].j_star;
        }
        double eth = cnt / tot;
        if (obs == DamageObs::truncated) eth /= 1.0 - H.cdf(ddc);
        cur.dd.push_back(ddc);
        cur.G.push_back(G);
        cur.g.push_back(g);
        cur.tp1.push_back(tp1);
        cur.tp2.push_back(tp2);
        cur.e_theta.push_back(eth);
    }
    if (cur.dd.size() < 8)
        throw std::domain_error("curves_from_records: too few usable deductible bins");
    return cur;
}

inline ContinuumIdentification identify_continuum_sampled(
    const std::vector<ObservationRecord>& recs, const GridDistribution& H, const Cell& c,
    DamageObs obs, std::size_t nbins = 32, std::size_t out_nodes = 65,
    std::size_t moment_order = 1) {
    ContinuumIdentification out;
    out.H = H;
    DeductibleCurves cur = curves_from_records(recs, H, c.wealth, obs, nbins);
    out.sched = recover_schedule(cur, H);
    // the CE density from per-bin differencing inherits the noise of the
    // recovered level; refit it as a smoothed slope of the exact quantile
    // ranks against the recovered level
    {
        double range = out.sched.s.back() - out.sched.s.front();
        for (std::size_t i = 0; i < out.sched.s.size(); ++i) {
            double d1 = 0.0, d2 = 0.0;
            for (double bw = 0.2 * range;; bw *= 1.5) {
                try {
                    local_quadratic(out.sched.s, out.sched.K, out.sched.s[i], bw, d1, d2);
                    break;
                } catch (const std::domain_error&) {
                    if (bw > 4.0 * range) throw;
                }
            }
            out.sched.k[i] = std::max(d1, 0.0);
        }
        std::vector<double> araw = out.sched.a;
        for (std::size_t i = 0; i < out.sched.s.size(); ++i) {
            double d1 = 0.0, d2 = 0.0, v = araw[i];
            for (double bw = 0.2 * range;; bw *= 1.5) {
                try {
                    local_quadratic(out.sched.s, araw, out.sched.s[i], bw, d1, d2, &v);
                    break;
                } catch (const std::domain_error&) {
                    if (bw > 4.0 * range) throw;
                }
            }
            if (v > 0.0) out.sched.a[i] = v;
        }
    }

    // bin insured records by deductible (equivalently by recovered s)
    std::vector<const ObservationRecord*> ins;
    for (const auto& r : recs)
        if (r.chi >= 1) ins.push_back(&r);
    std::sort(ins.begin(), ins.end(),
              [](const ObservationRecord* a, const ObservationRecord* b) {
                  return a->dd < b->dd;
              });
    std::size_t n = ins.size();
    std::vector<std::vector<double>> mu_raw(nbins);
    for (std::size_t b = 0; b < nbins; ++b) {
        std::size_t lo = b * n / nbins, hi = (b + 1) * n / nbins;
        double ddc = ins[(lo + hi) / 2]->dd;
        double sv = 0.0;
        // recovered s at the bin's deductible
        {
            const auto& dv = out.sched.dd;
            if (ddc <= dv.front()) sv = out.sched.s.front();
            else if (ddc >= dv.back()) sv = out.sched.s.back();
            else {
                auto it = std::upper_bound(dv.begin(), dv.end(), ddc);
                std::size_t i = static_cast<std::size_t>(it - dv.begin()) - 1;
                double w = (ddc - dv[i]) / (dv[i + 1] - dv[i]);
                sv = out.sched.s[i] * (1.0 - w) + out.sched.s[i + 1] * w;
            }
        }
        std::vector<int> counts;
        counts.reserve(hi - lo);
        for (std::size_t i = lo; i < hi; ++i) counts.push_back(ins[i]->j_star);
        double thin = obs == DamageObs::full ? 1.0 : 1.0 - H.cdf(ddc);
        mu_raw[b] = mixing_moments(factorial_moments(counts, moment_order), thin);
        out.s_bins.push_back(sv);
    }
    // per-bin count moments are noisy and the narrow conditional support
    // amplifies that noise badly in the inversion, so pool information by
    // smoothing each moment order across neighbouring bins first
    std::vector<std::vector<double>> mu_s = mu_raw;
    {
        double bw = 0.25 * (out.s_bins.back() - out.s_bins.front());
        std::vector<double> yk(nbins);
        for (std::size_t k = 1; k <= moment_order; ++k) {
            for (std::size_t b = 0; b < nbins; ++b) yk[b] = mu_raw[b][k];
            for (std::size_t b = 0; b < nbins; ++b) {
                double d1, d2, v;
                try {
                    local_quadratic(out.s_bins, yk, out.s_bins[b], bw, d1, d2, &v);
                    mu_s[b][k] = v;
                } catch (const std::domain_error&) {
                    // keep the raw moment where the window is too sparse
                }
            }
        }
    }
    for (std::size_t b = 0; b < nbins; ++b) {
        double sv = out.s_bins[b];
        auto [tlo, thi] = theta_support_at(sv, c.wealth, c.th_lo, c.th_hi, c.a_lo, c.a_hi, H);
        if (thi - tlo < 1e-6) {
            MixingDistribution atom;
            atom.atomic = true;
            atom.grid = {0.5 * (tlo + thi)};
            atom.weights = {1.0};
            atom.density = {1.0};
            out.theta_given_s.push_back(atom);
        } else {
            out.theta_given_s.push_back(invert_mixture_smooth(mu_s[b], tlo, thi));
        }
    }
    assemble_joint(out, c.wealth, c.th_lo, c.th_hi, c.a_lo, c.a_hi, out_nodes);
    return out;
}

// L1 distance between the recovered joint density and the cell's truth,
// restricted to the identified region (CE below the participation cutoff)
inline double l1_joint_error(const ContinuumIdentification& est, const Cell& c,
                             double s_cut) {
    double err = 0.0;
    PsiTable pt(c);
    for (std::size_t i = 0; i + 1 < est.th_grid.size(); ++i) {
        for (std::size_t j = 0; j + 1 < est.a_grid.size(); ++j) {
            double th = 0.5 * (est.th_grid[i] + est.th_grid[i + 1]);
            double a = 0.5 * (est.a_grid[j] + est.a_grid[j + 1]);
            double s = c.wealth - th * pt.psi_at(a);
            if (s > s_cut) continue;
            double fh = 0.25 * (est.f[i][j] + est.f[i + 1][j] + est.f[i][j + 1]
                              + est.f[i + 1][j + 1]);
            err += std::abs(fh - c.f_at(th, a)) * (est.th_grid[i + 1] - est.th_grid[i])
                 * (est.a_grid[j + 1] - est.a_grid[j]);
        }
    }
    return err;
}

}  // namespace screenlab
