#pragma once

// Identification with a finite menu of two contracts per cell. The observable
// side is the contract choice, the (reported) accident counts, and the
// (possibly truncated) damages; an excluded variable z shifts the premium gap
// and sweeps the choice frontier across the risk-aversion support. When
// damages below the deductible are unobserved, everything is recovered in the
// rescaled risk coordinate theta-tilde = (1 - H(dd2)) * theta, up to the
// unidentified mass H(dd2).

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "finite.hpp"
#include "mixture.hpp"
#include "optimize.hpp"
#include "population.hpp"

namespace screenlab {

// ---- frontier from an explicit damage law ----

// Indifference risk level between the two contracts when the relevant damage
// law (full, or truncated at dd2) is supplied directly.
inline double frontier_theta_h(const ContractPair& p, double a, const GridDistribution& H) {
    double denom = exp_survival_int(H, a, p.dd2, p.dd1);
    if (denom <= 0.0) throw std::domain_error("frontier_theta_h: degenerate menu");
    return (p.t2 - p.t1) / denom;
}

struct FrontierPoint {
    double a = 0.0;
    int boundary = 0;  // -1: below the search range (theta too high), +1: above, 0: interior
};

// Inverse of the frontier: the risk-aversion level at which a type with the
// given risk is indifferent. The frontier is strictly decreasing in a, so the
// inverse exists wherever the risk lies inside the frontier's range.
inline FrontierPoint frontier_inverse(const ContractPair& p, double theta,
                                      const GridDistribution& H, double a_lo, double a_hi) {
    if (!(theta > 0.0)) throw std::domain_error("frontier_inverse: risk must be positive");
    FrontierPoint out;
    double flo = frontier_theta_h(p, a_lo, H);
    double fhi = frontier_theta_h(p, a_hi, H);
    if (theta >= flo) {
        out.a = a_lo;
        out.boundary = theta > flo ? -1 : 0;
        return out;
    }
    if (theta <= fhi) {
        out.a = a_hi;
        out.boundary = theta < fhi ? 1 : 0;
        return out;
    }
    out.a = bisect([&](double a) { return frontier_theta_h(p, a, H) - theta; }, a_lo, a_hi,
                   1e-13);
    return out;
}

// ---- recovered cell structure ----

// Everything identified from one (cell, z-node) subsample. In the truncated
// case the risk coordinate is theta-tilde and the damage laws are the
// truncated ones; in the full case lambda is 1 and Hstar2 is the damage law.
struct TildeStructure {
    double z = 0.0;
    ContractPair pair;
    double lambda = 1.0;  // (1 - H(dd1)) / (1 - H(dd2))
    double nu1 = 0.0, nu2 = 0.0;
    int k_cap = -1;                             // series-order cap for noisy moments
    std::vector<double> mu1, mu2;               // recovered risk moments by choice
    MixingDistribution f_chi1, f_chi2, f_marg;  // risk densities given the choice / marginal
    double th_lo = 0.0, th_hi = 0.0;            // support bounds of the marginal
    GridDistribution Hstar1, Hstar2;            // reported damage laws by contract
};

// Support bounds of a recovered mixing density: the smallest interval where
// the density clears a fraction of its peak (edge detection is far tighter
// than tail-mass trimming when the series expansion has low-order ripples).
inline std::pair<double, double> mixing_support(const MixingDistribution& mix,
                                                double rel = 0.05) {
    double peak = 0.0;
    for (double d : mix.density) peak = std::max(peak, d);
    double thr = rel * peak;
    double lo = mix.grid.front(), hi = mix.grid.back();
    for (std::size_t i = 0; i < mix.grid.size(); ++i)
        if (mix.density[i] > thr) {
            lo = mix.grid[i];
            break;
        }
    for (std::size_t i = mix.grid.size(); i-- > 0;)
        if (mix.density[i] > thr) {
            hi = mix.grid[i];
            break;
        }
    return {lo, hi};
}

// Invert a moment sequence without knowing the support: start from a generous
// mean +- 4 sd window and tighten it on the recovered density a few times.
inline MixingDistribution invert_adaptive(const std::vector<double>& mu,
                                          std::size_t out_nodes = 201,
                                          double* support_lo = nullptr,
                                          double* support_hi = nullptr, int k_cap = -1) {
    if (mu.size() < 3) throw std::domain_error("invert_adaptive: need two moments");
    for (double v : mu)
        if (!std::isfinite(v)) throw std::domain_error("invert_adaptive: moments not finite");
    double m = mu[1];
    double var = std::max(mu[2] - mu[1] * mu[1], 0.0);
    double sd = std::sqrt(var);
    double lo = std::max(m - 4.0 * std::max(sd, 0.05 * m), 1e-9);
    double hi = m + 4.0 * std::max(sd, 0.05 * m);
    MixingDistribution mix = invert_mixture_smooth(mu, lo, hi, out_nodes, k_cap);
    for (int pass = 0; pass < 8; ++pass) {
        auto [l2, h2] = mixing_support(mix);
        // widen by half a cell so the support is never clipped from inside
        double cell = (hi - lo) / static_cast<double>(out_nodes - 1);
        l2 = std::max(l2 - 0.5 * cell, 1e-9);
        h2 += 0.5 * cell;
        bool done = std::abs(l2 - lo) < 0.25 * cell && std::abs(h2 - hi) < 0.25 * cell;
        lo = l2;
        hi = h2;
        mix = invert_mixture_smooth(mu, lo, hi, out_nodes, k_cap);
        if (done) break;
    }
    if (support_lo) *support_lo = lo;
    if (support_hi) *support_hi = hi;
    return mix;
}

// Upper support bound of a recovered risk density: the quantile leaving a
// small mass (default 1e-3) in the tail, robust to low-level series ripple.
inline double support_upper_bound(const MixingDistribution& mix, double tail_mass = 1e-3) {
    double tot = 0.0;
    std::vector<double> cum(mix.grid.size(), 0.0);
    for (std::size_t i = 1; i < mix.grid.size(); ++i) {
        tot += 0.5 * (std::max(mix.density[i - 1], 0.0) + std::max(mix.density[i], 0.0))
             * (mix.grid[i] - mix.grid[i - 1]);
        cum[i] = tot;
    }
    if (tot <= 0.0) throw std::domain_error("support_upper_bound: empty density");
    double target = (1.0 - tail_mass) * tot;
    for (std::size_t i = 1; i < cum.size(); ++i)
        if (cum[i] >= target) {
            double seg = cum[i] - cum[i - 1];
            double frac = seg > 0.0 ? (target - cum[i - 1]) / seg : 1.0;
            return mix.grid[i - 1] + frac * (mix.grid[i] - mix.grid[i - 1]);
        }
    return mix.grid.back();
}

// Recover the risk density of one covariate cell from reported claim counts
// through its moment generating function. With full damage records the counts
// form an unthinned Poisson mixture and both choice groups pool. With
// truncated records each group's counts are thinned by the survival of its
// own deductible; expressing risk as theta-tilde (risk scaled by the
// contract-2 survival) the mixture MGF is
//   M(u) = nu1 * M_counts|1(log(1 + u/lambda)) + nu2 * M_counts|2(log(1 + u)),
// evaluated on a 24-point u grid over (-min(lambda,1), 3], then inverted on
// the risk grid via a fitted exponential-moment expansion.
inline MixingDistribution recover_risk_density(const std::vector<int>& j1,
                                               const std::vector<int>& j2, double nu1,
                                               double lambda, DamageObs obs,
                                               std::size_t out_nodes = 201,
                                               std::size_t order = 8, int k_cap = -1) {
    if (obs == DamageObs::truncated && !(lambda > 0.0 && lambda < 1.0))
        throw std::domain_error("recover_risk_density: thinning ratio outside (0,1)");
    if (j1.empty() && j2.empty())
        throw std::domain_error("recover_risk_density: no counts");
    auto emp_mgf = [](const std::vector<int>& js, double t) {
        double s = 0.0;
        for (int j : js) s += std::exp(t * j);
        return s / static_cast<double>(js.size());
    };
    double umin = -std::min(lambda, 1.0);
    double eps = 0.05 * (3.0 - umin);
    auto ug = linspace(umin + eps, 3.0, 24);
    std::vector<double> M(ug.size());
    for (std::size_t i = 0; i < ug.size(); ++i) {
        double u = ug[i];
        if (obs == DamageObs::full) {
            // unthinned: both groups report every claim, so they pool
            double m = 0.0, n1 = static_cast<double>(j1.size()),
                   n2 = static_cast<double>(j2.size());
            double t = std::log1p(u);
            if (!j1.empty()) m += n1 * emp_mgf(j1, t);
            if (!j2.empty()) m += n2 * emp_mgf(j2, t);
            M[i] = m / (n1 + n2);
        } else {
            double m = 0.0;
            if (nu1 > 0.0) m += nu1 * emp_mgf(j1, std::log1p(u / lambda));
            if (nu1 < 1.0) m += (1.0 - nu1) * emp_mgf(j2, std::log1p(u));
            M[i] = m;
        }
    }
    // least-squares fit of M(u) = sum_k mu_k u^k / k! on the evaluation grid
    std::size_t K = order + 1;
    std::vector<std::vector<double>> A(K, std::vector<double>(K, 0.0));
    std::vector<double> b(K, 0.0);
    for (std::size_t i = 0; i < ug.size(); ++i) {
        std::vector<double> phi(K);
        double p = 1.0;
        for (std::size_t k = 0; k < K; ++k) {
            phi[k] = p;
            p *= ug[i] / static_cast<double>(k + 1);
        }
        for (std::size_t r = 0; r < K; ++r) {
            b[r] += phi[r] * M[i];
            for (std::size_t cidx = 0; cidx < K; ++cidx) A[r][cidx] += phi[r] * phi[cidx];
        }
    }
    std::vector<double> mu = solve_linear(A, b);
    mu[0] = 1.0;
    return invert_adaptive(mu, out_nodes, nullptr, nullptr, k_cap);
}

// Re-invert the stored risk moments of one structure on a given support.
// A vanishing choice group contributes nothing and stays a point mass
// placeholder with zero density. When the risk-aversion range is supplied,
// each choice group is inverted on its own frontier-implied support: the
// contract-1 density vanishes above the frontier maximum and the contract-2
// density below its minimum, and keeping those hard zeros out of the
// expansion window removes the Gibbs ripples a mid-window jump would cause.
inline void reinvert_on_support(TildeStructure& ts, double lo, double hi,
                                std::size_t out_nodes = 201,
                                double a_lo = std::nan(""), double a_hi = std::nan("")) {
    ts.th_lo = lo;
    ts.th_hi = hi;
    std::vector<double> mum(ts.mu1.size());
    for (std::size_t k = 0; k < ts.mu1.size(); ++k)
        mum[k] = (ts.nu1 > 0.0 ? ts.nu1 * ts.mu1[k] : 0.0)
               + (ts.nu2 > 0.0 ? ts.nu2 * ts.mu2[k] : 0.0);
    ts.f_marg = invert_mixture_smooth(mum, lo, hi, out_nodes, ts.k_cap);
    double hi1 = hi, lo2 = lo;
    if (std::isfinite(a_lo) && std::isfinite(a_hi)) {
        double eps = 1e-3 * (hi - lo);
        hi1 = std::clamp(frontier_theta_h(ts.pair, a_lo, ts.Hstar2), lo + eps, hi);
        lo2 = std::clamp(frontier_theta_h(ts.pair, a_hi, ts.Hstar2), lo, hi - eps);
    }
    auto invert_group = [&](const std::vector<double>& mu, double share, double glo,
                            double ghi) {
        if (share <= 1e-9) {
            MixingDistribution atom;
            atom.atomic = true;
            atom.grid = {0.5 * (lo + hi)};
            atom.weights = {1.0};
            return atom;
        }
        return invert_mixture_smooth(mu, glo, ghi, out_nodes, ts.k_cap);
    };
    ts.f_chi1 = invert_group(ts.mu1, ts.nu1, lo, hi1);
    ts.f_chi2 = invert_group(ts.mu2, ts.nu2, lo2, hi);
}

// Support of the risk marginal read from the choice shares across the sweep:
// the share of contract 1 leaves zero exactly when the frontier enters the
// type rectangle at its lower-left corner and reaches one when it exits at
// the upper-right corner, so the crossing premium gaps pin both edges.
inline std::pair<double, double> support_from_shares(const std::vector<TildeStructure>& cells,
                                                     double a_lo, double a_hi,
                                                     double lvl_lo = 0.01,
                                                     double lvl_hi = 0.12) {
    std::vector<std::pair<double, double>> pts;  // (premium gap, share)
    for (const auto& ts : cells) pts.push_back({ts.pair.t2 - ts.pair.t1, ts.nu1});
    std::sort(pts.begin(), pts.end());
    // near the entry corner the share grows quadratically in the premium gap,
    // so sqrt(share) is locally linear; extrapolate it to zero
    auto corner = [&](bool upper) {
        std::vector<double> gx, gy;
        for (const auto& q : pts) {
            double v = upper ? 1.0 - q.second : q.second;
            if (v > lvl_lo && v < lvl_hi) {
                gx.push_back(q.first);
                gy.push_back(std::sqrt(v));
            }
        }
        if (gx.size() < 2) return std::nan("");
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        for (std::size_t i = 0; i < gx.size(); ++i) {
            sx += gx[i];
            sy += gy[i];
            sxx += gx[i] * gx[i];
            sxy += gx[i] * gy[i];
        }
        double n = static_cast<double>(gx.size());
        double b = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        double a = (sy - b * sx) / n;
        if (b == 0.0) return std::nan("");
        return -a / b;  // gap where the extrapolated share reaches zero
    };
    double gap_lo = corner(false), gap_hi = corner(true);
    const GridDistribution& H = cells.front().Hstar2;
    const ContractPair& p = cells.front().pair;
    double lo = std::isnan(gap_lo)
                    ? std::nan("")
                    : gap_lo / exp_survival_int(H, a_lo, p.dd2, p.dd1);
    double hi = std::isnan(gap_hi)
                    ? std::nan("")
                    : gap_hi / exp_survival_int(H, a_hi, p.dd2, p.dd1);
    return {lo, hi};
}

namespace detail {

// factorial moments of the reported counts in a group, orders 0..K
inline std::vector<double> group_factorial_moments(const std::vector<int>& counts,
                                                   std::size_t K) {
    if (counts.empty()) throw std::domain_error("group_factorial_moments: empty group");
    return factorial_moments(counts, K);
}

}  // namespace detail

// Build the recovered structure from observable ingredients: per-choice raw
// risk moments (already divided by the appropriate thinning power), shares,
// the damage-density ratio, and the reported damage laws.
inline TildeStructure tilde_from_moments(const std::vector<double>& mu1,
                                         const std::vector<double>& mu2, double nu1,
                                         double nu2, double lambda,
                                         const ContractPair& pair,
                                         const GridDistribution& Hstar1,
                                         const GridDistribution& Hstar2, double z = 0.0,
                                         std::size_t out_nodes = 201, int k_cap = -1) {
    if (mu1.size() != mu2.size())
        throw std::domain_error("tilde_from_moments: moment order mismatch");
    if (!(lambda > 0.0) || lambda > 1.0)
        throw std::domain_error("tilde_from_moments: damage-density ratio outside (0,1]");
    TildeStructure ts;
    ts.z = z;
    ts.k_cap = k_cap;
    ts.pair = pair;
    ts.lambda = lambda;
    ts.nu1 = nu1;
    ts.nu2 = nu2;
    ts.Hstar1 = Hstar1;
    ts.Hstar2 = Hstar2;
    ts.mu1 = mu1;
    ts.mu2 = mu2;
    std::vector<double> mum(mu1.size());
    for (std::size_t k = 0; k < mu1.size(); ++k)
        mum[k] = (nu1 > 0.0 ? nu1 * mu1[k] : 0.0) + (nu2 > 0.0 ? nu2 * mu2[k] : 0.0);
    ts.f_marg = invert_adaptive(mum, out_nodes, &ts.th_lo, &ts.th_hi, k_cap);
    reinvert_on_support(ts, ts.th_lo, ts.th_hi, out_nodes);
    return ts;
}

// Damage ingredients shared by every z node: the reported damage laws do not
// depend on the premium shifter, so they are estimated from the pooled
// insured records.
struct PooledDamages {
    GridDistribution Hstar1, Hstar2;
    double lambda = 1.0;
};

inline PooledDamages pool_damages(const std::vector<ObservationRecord>& recs,
                                  const ContractPair& pair, DamageObs obs, double dbar) {
    std::vector<double> d1, d2;
    for (const auto& r : recs) {
        if (r.chi == 1) d1.insert(d1.end(), r.damages.begin(), r.damages.end());
        if (r.chi == 2) d2.insert(d2.end(), r.damages.begin(), r.damages.end());
    }
    PooledDamages out;
    double lo1 = obs == DamageObs::truncated ? pair.dd1 : 0.0;
    double lo2 = obs == DamageObs::truncated ? pair.dd2 : 0.0;
    out.Hstar1 = empirical_distribution(d1, linspace(lo1, dbar, 257));
    out.Hstar2 = empirical_distribution(d2, linspace(lo2, dbar, 257));
    if (obs == DamageObs::truncated) {
        // survivors past dd1 among contract-2 claims estimate the density ratio
        std::size_t past = 0;
        for (double d : d2)
            if (d >= pair.dd1) ++past;
        out.lambda = static_cast<double>(past) / static_cast<double>(d2.size());
        if (!(out.lambda > 0.0) || !(out.lambda < 1.0))
            throw std::domain_error("pool_damages: damage-density ratio outside (0,1)");
    }
    return out;
}

// Recover the structure of one (cell, z-node) subsample from records. A
// choice group may be empty at extreme shifter values; it then enters with
// zero share and placeholder moments.
inline TildeStructure recover_tilde_sampled(const std::vector<const ObservationRecord*>& recs,
                                            const ContractPair& pair, DamageObs obs,
                                            const PooledDamages& pool,
                                            std::size_t moment_order = 4,
                                            std::size_t out_nodes = 201, double z = 0.0) {
    std::vector<int> j1, j2;
    for (const auto* r : recs) {
        if (r->chi == 1) j1.push_back(r->j_star);
        if (r->chi == 2) j2.push_back(r->j_star);
    }
    if (j1.empty() && j2.empty())
        throw std::domain_error("recover_tilde_sampled: no insured records");
    double nu1 = static_cast<double>(j1.size()) / (j1.size() + j2.size());
    std::vector<double> em1(moment_order + 1, 0.0), em2(moment_order + 1, 0.0);
    em1[0] = em2[0] = 1.0;
    if (!j1.empty()) em1 = detail::group_factorial_moments(j1, moment_order);
    if (!j2.empty()) em2 = detail::group_factorial_moments(j2, moment_order);
    if (obs == DamageObs::truncated) {
        // group-1 counts are thinned by lambda relative to group 2
        for (std::size_t k = 1; k < em1.size(); ++k)
            em1[k] /= std::pow(pool.lambda, static_cast<double>(k));
    }
    return tilde_from_moments(em1, em2, nu1, 1.0 - nu1, pool.lambda, pair, pool.Hstar1,
                              pool.Hstar2, z, out_nodes);
}

namespace detail {

// exact integrals of theta^k * f(theta, a) below a cut at fixed a, k = 0..K
inline std::vector<double> theta_poly_below(const Cell& c, double a, double cut,
                                            std::size_t K) {
    std::vector<double> out(K + 1, 0.0);
    if (cut <= c.th_lo) return out;
    double hi = std::min(cut, c.th_hi);
    for (std::size_t i = 0; i + 1 < c.th_grid.size(); ++i) {
        double x0 = std::max(c.th_grid[i], c.th_lo), x1 = std::min(c.th_grid[i + 1], hi);
        if (x1 <= x0) continue;
        double f0 = c.f_at(x0, a), f1 = c.f_at(x1, a);
        double slope = (f1 - f0) / (x1 - x0);
        double b0 = f0 - slope * x0;
        double p0 = x0, p1 = x1;  // powers x^(k+1)
        for (std::size_t k = 0; k <= K; ++k) {
            p0 *= (k == 0 ? 1.0 : x0);
            p1 *= (k == 0 ? 1.0 : x1);
            // p now holds x^(k+1); integral of x^k (b0 + slope x)
            double ik = (p1 - p0) / static_cast<double>(k + 1);
            double ik1 = (p1 * x1 - p0 * x0) / static_cast<double>(k + 2);
            out[k] += b0 * ik + slope * ik1;
        }
    }
    return out;
}

}  // namespace detail

// Exact conditional risk moments given the contract choice, by quadrature
// over the frontier partition of the type rectangle.
inline void choice_conditional_moments(const ContractPair& p, const Cell& c, std::size_t K,
                                       std::vector<double>& mu1, std::vector<double>& mu2,
                                       double& nu1, std::size_t na = 2001) {
    auto as = linspace(c.a_lo, c.a_hi, na);
    std::vector<std::vector<double>> below(K + 1, std::vector<double>(na)),
        total(K + 1, std::vector<double>(na));
    for (std::size_t j = 0; j < na; ++j) {
        double thf = frontier_theta(p, as[j], c);
        auto b = detail::theta_poly_below(c, as[j], thf, K);
        auto t = detail::theta_poly_below(c, as[j], c.th_hi, K);
        for (std::size_t k = 0; k <= K; ++k) {
            below[k][j] = b[k];
            total[k][j] = t[k];
        }
    }
    double tot0 = trapezoid(as, total[0]);
    double b0 = trapezoid(as, below[0]);
    nu1 = b0 / tot0;
    mu1.assign(K + 1, 0.0);
    mu2.assign(K + 1, 0.0);
    mu1[0] = mu2[0] = 1.0;
    // a group with essentially no mass gets zero moments; its share is zero
    // anyway, so it never enters the marginal
    bool has1 = b0 > 1e-12 * tot0, has2 = tot0 - b0 > 1e-12 * tot0;
    for (std::size_t k = 1; k <= K; ++k) {
        double bk = trapezoid(as, below[k]);
        double tk = trapezoid(as, total[k]);
        if (has1) mu1[k] = bk / b0;
        if (has2) mu2[k] = (tk - bk) / (tot0 - b0);
    }
}

// Functional-level recovery: build the observable ingredients exactly from
// the true cell and menu, then run the same inversion as the sampled path.
inline TildeStructure recover_tilde_functional(const ContractPair& pair, const Cell& c,
                                               DamageObs obs, std::size_t moment_order = 8,
                                               std::size_t out_nodes = 201, double z = 0.0) {
    std::vector<double> mth1, mth2;
    double nu1;
    choice_conditional_moments(pair, c, moment_order, mth1, mth2, nu1);
    if (obs == DamageObs::full) {
        return tilde_from_moments(mth1, mth2, nu1, 1.0 - nu1, 1.0, pair, c.damage, c.damage,
                                  z, out_nodes);
    }
    double h1 = c.damage.cdf(pair.dd1), h2 = c.damage.cdf(pair.dd2);
    double lambda = (1.0 - h1) / (1.0 - h2);
    // what the analyst sees: thinned count moments, converted back with the
    // observable ratio only
    std::vector<double> mu1(mth1.size()), mu2(mth2.size());
    for (std::size_t k = 0; k < mth1.size(); ++k) {
        double kk = static_cast<double>(k);
        double em1 = std::pow(1.0 - h1, kk) * mth1[k];  // E[J*^(k) | chi=1]
        double em2 = std::pow(1.0 - h2, kk) * mth2[k];
        mu1[k] = em1 / std::pow(lambda, kk);
        mu2[k] = em2;
    }
    return tilde_from_moments(mu1, mu2, nu1, 1.0 - nu1, lambda, pair,
                              truncate(c.damage, pair.dd1), truncate(c.damage, pair.dd2), z,
                              out_nodes);
}

// ---- Bayes probe and the exclusion sweep ----

// P(choose contract 1 | risk level) at the frontier, from the recovered
// pieces; NaN when the marginal density vanishes at the evaluation point.
inline double frontier_bayes(const TildeStructure& ts, double th) {
    double fm = ts.f_marg.density_at(th);
    double span = ts.th_hi - ts.th_lo;
    if (fm * span < 1e-3) return std::nan("");
    double p = ts.f_chi1.density_at(th) * ts.nu1 / fm;
    return std::clamp(p, 0.0, 1.0);
}

struct SweepPoint {
    double a = 0.0, value = 0.0, z = 0.0;
};

// Conditional CDF of risk aversion at fixed risk, assembled by sweeping the
// frontier with the excluded premium shifter.
struct SweepResult {
    std::vector<SweepPoint> pts;  // sorted by frontier point a
    double theta = 0.0;

    bool covers(double eps) const {
        if (pts.empty()) return false;
        double lo = 1.0, hi = 0.0;
        for (const auto& q : pts) {
            lo = std::min(lo, q.value);
            hi = std::max(hi, q.value);
        }
        return lo <= eps && hi >= 1.0 - eps;
    }
    double a_min() const { return pts.empty() ? 0.0 : pts.front().a; }
    double a_max() const { return pts.empty() ? 0.0 : pts.back().a; }

    // monotone interpolation; clamps to the end values outside the range
    double cdf_at(double a) const {
        if (pts.empty()) throw std::domain_error("sweep: no usable probes");
        if (a <= pts.front().a) return pts.front().value;
        if (a >= pts.back().a) return pts.back().value;
        for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
            if (a <= pts[i + 1].a) {
                double w = (a - pts[i].a) / (pts[i + 1].a - pts[i].a);
                return pts[i].value * (1.0 - w) + pts[i + 1].value * w;
            }
        }
        return pts.back().value;
    }
};

// Sweep the z nodes: each one contributes the frontier point a(theta, z) and
// the Bayes probe value there. A pooled marginal density may be supplied to
// stabilize the probe denominators (the excluded variable does not move the
// risk distribution).
inline SweepResult exclusion_sweep(const std::vector<TildeStructure>& cells, double theta,
                                   double a_lo, double a_hi,
                                   const MixingDistribution* pooled_marg = nullptr) {
    SweepResult out;
    out.theta = theta;
    for (const auto& ts : cells) {
        FrontierPoint fp = frontier_inverse(ts.pair, theta, ts.Hstar2, a_lo, a_hi);
        double val;
        if (fp.boundary < 0) {
            val = 0.0;  // frontier below the whole range: contract 2 for sure
        } else if (fp.boundary > 0) {
            val = 1.0;
        } else if (pooled_marg) {
            double fm = pooled_marg->density_at(theta);
            if (fm <= 0.0) continue;
            val = std::clamp(ts.f_chi1.density_at(theta) * ts.nu1 / fm, 0.0, 1.0);
        } else {
            val = frontier_bayes(ts, theta);
            if (std::isnan(val)) continue;
        }
        out.pts.push_back({fp.a, val, ts.z});
    }
    if (out.pts.empty()) throw std::domain_error("exclusion_sweep: no usable probes");
    std::sort(out.pts.begin(), out.pts.end(),
              [](const SweepPoint& x, const SweepPoint& y) { return x.a < y.a; });
    // the CDF is monotone in a; pool adjacent violators against sampling noise
    std::vector<double> v(out.pts.size()), w(out.pts.size(), 1.0);
    for (std::size_t i = 0; i < out.pts.size(); ++i) v[i] = out.pts[i].value;
    std::size_t i = 0;
    std::vector<std::size_t> len(out.pts.size(), 1);
    std::vector<double> pool(v);
    std::size_t m = pool.size();
    std::vector<double> pv;
    std::vector<std::size_t> pl;
    for (std::size_t r = 0; r < m; ++r) {
        pv.push_back(pool[r]);
        pl.push_back(1);
        while (pv.size() > 1 && pv[pv.size() - 2] > pv.back()) {
            double merged = (pv[pv.size() - 2] * pl[pl.size() - 2] + pv.back() * pl.back())
                          / (pl[pl.size() - 2] + pl.back());
            pl[pl.size() - 2] += pl.back();
            pv[pv.size() - 2] = merged;
            pv.pop_back();
            pl.pop_back();
        }
    }
    i = 0;
    for (std::size_t bidx = 0; bidx < pv.size(); ++bidx)
        for (std::size_t r = 0; r < pl[bidx]; ++r) out.pts[i++].value = pv[bidx];
    return out;
}

// ---- joint assembly ----

struct FiniteIdentification {
    int case_number = 3;
    bool up_to_h2 = false;  // truncated case: risk axis is theta-tilde
    std::vector<double> th_grid, a_grid;
    std::vector<std::vector<double>> f;  // joint density over (risk axis, a)
    MixingDistribution f_marg;
    double lambda = 1.0, nu1 = 0.0;
    GridDistribution Hstar2;
    std::vector<TildeStructure> by_z;

    double joint_mass() const {
        double m = 0.0;
        for (std::size_t i = 0; i + 1 < th_grid.size(); ++i)
            for (std::size_t j = 0; j + 1 < a_grid.size(); ++j)
                m += 0.25 * (f[i][j] + f[i + 1][j] + f[i][j + 1] + f[i + 1][j + 1])
                   * (th_grid[i + 1] - th_grid[i]) * (a_grid[j + 1] - a_grid[j]);
        return m;
    }
};

// Assemble the joint density from the marginal risk density and the swept
// conditional CDFs of risk aversion.
inline FiniteIdentification assemble_joint_finite(const std::vector<TildeStructure>& cells,
                                                  DamageObs obs, double a_lo, double a_hi,
                                                  std::size_t out_nodes = 65,
                                                  const std::vector<double>* marg_moments
                                                  = nullptr,
                                                  double share_lvl_lo = 2e-4,
                                                  double share_lvl_hi = 0.05) {
    if (cells.empty()) throw std::domain_error("assemble_joint_finite: no cells");
    FiniteIdentification out;
    out.case_number = obs == DamageObs::full ? 3 : 4;
    out.up_to_h2 = obs == DamageObs::truncated;
    out.by_z = cells;
    out.lambda = cells.front().lambda;
    out.nu1 = cells.front().nu1;
    out.Hstar2 = cells.front().Hstar2;
    // support from the share crossings where available, else pool the
    // per-node adaptive estimates; re-invert every node on the common support
    auto [slo, shi] = support_from_shares(cells, a_lo, a_hi, share_lvl_lo, share_lvl_hi);
    double lo = 0.0, hi = 0.0;
    for (const auto& ts : cells) {
        lo += ts.th_lo;
        hi += ts.th_hi;
    }
    lo /= cells.size();
    hi /= cells.size();
    if (std::isfinite(slo)) lo = slo;
    if (std::isfinite(shi)) hi = shi;
    for (auto& ts : out.by_z) reinvert_on_support(ts, lo, hi, 201, a_lo, a_hi);
    out.f_marg.grid = linspace(lo, hi, 201);
    out.f_marg.weights.assign(201, 0.0);
    out.f_marg.density.assign(201, 0.0);
    if (marg_moments) {
        // the risk marginal does not depend on the shifter; invert it once
        // from the supplied pooled moments
        out.f_marg = invert_mixture_smooth(*marg_moments, lo, hi, 201,
                                           cells.front().k_cap);
    } else {
        for (const auto& ts : out.by_z)
            for (std::size_t i = 0; i < out.f_marg.grid.size(); ++i)
                out.f_marg.density[i] += ts.f_marg.density_at(out.f_marg.grid[i]) / cells.size();
    }
    {
        double tot = trapezoid(out.f_marg.grid, out.f_marg.density);
        if (tot <= 0.0) throw std::domain_error("assemble_joint_finite: empty marginal");
        for (double& d : out.f_marg.density) d /= tot;
        for (std::size_t i = 0; i < out.f_marg.grid.size(); ++i) {
            double wl = i == 0 ? 0.0
                               : 0.25 * (out.f_marg.density[i - 1] + out.f_marg.density[i])
                                     * (out.f_marg.grid[i] - out.f_marg.grid[i - 1]);
            double wr = i + 1 == out.f_marg.grid.size()
                            ? 0.0
                            : 0.25 * (out.f_marg.density[i] + out.f_marg.density[i + 1])
                                  * (out.f_marg.grid[i + 1] - out.f_marg.grid[i]);
            out.f_marg.weights[i] = wl + wr;
        }
    }
    out.th_grid = linspace(lo, hi, out_nodes);
    out.a_grid = linspace(a_lo, a_hi, out_nodes);
    out.f.assign(out_nodes, std::vector<double>(out_nodes, 0.0));
    for (std::size_t i = 0; i < out_nodes; ++i) {
        double th = out.th_grid[i];
        double fm = out.f_marg.density_at(th);
        if (fm <= 0.0) continue;
        SweepResult sw = exclusion_sweep(out.by_z, th, a_lo, a_hi, &out.f_marg);
        // conditional density of a as the local-quadratic slope of the swept CDF
        std::vector<double> xs(sw.pts.size()), ys(sw.pts.size());
        for (std::size_t q = 0; q < sw.pts.size(); ++q) {
            xs[q] = sw.pts[q].a;
            ys[q] = sw.pts[q].value;
        }
        for (std::size_t j = 0; j < out_nodes; ++j) {
            double bw = 0.35 * (a_hi - a_lo);
            double d1 = 0.0, d2 = 0.0;
            for (;; bw *= 1.5) {
                try {
                    local_quadratic(xs, ys, out.a_grid[j], bw, d1, d2);
                    break;
                } catch (const std::domain_error&) {
                    if (bw > 4.0 * (a_hi - a_lo)) throw;
                }
            }
            out.f[i][j] = std::max(d1, 0.0) * fm;
        }
    }
    // renormalize: the assembly should carry unit mass
    double mass = out.joint_mass();
    if (mass <= 0.0) throw std::domain_error("assemble_joint_finite: empty joint density");
    for (auto& row : out.f)
        for (double& v : row) v /= mass;
    return out;
}

// Express a truncated-case structure in natural risk units for a candidate
// value of the unidentified deductible mass.
inline FiniteIdentification instantiate_h2(const FiniteIdentification& t, double h2) {
    if (!t.up_to_h2) return t;
    if (!(h2 >= 0.0) || !(h2 < 1.0))
        throw std::domain_error("instantiate_h2: candidate mass outside [0,1)");
    double s = 1.0 - h2;
    FiniteIdentification out = t;
    out.up_to_h2 = false;
    for (double& th : out.th_grid) th /= s;
    for (auto& row : out.f)
        for (double& v : row) v *= s;
    for (double& g : out.f_marg.grid) g /= s;
    for (double& d : out.f_marg.density) d *= s;
    // damage law on [dd2, dbar]: H(d) = 1 - (1-h2)(1 - Hstar2(d))
    for (double& F : out.Hstar2.F) F = 1.0 - s * (1.0 - F);
    return out;
}

// L1 distance between a recovered joint (in natural units) and the cell truth.
inline double l1_finite_error(const FiniteIdentification& est, const Cell& c) {
    double err = 0.0;
    for (std::size_t i = 0; i + 1 < est.th_grid.size(); ++i) {
        for (std::size_t j = 0; j + 1 < est.a_grid.size(); ++j) {
            double th = 0.5 * (est.th_grid[i] + est.th_grid[i + 1]);
            double a = 0.5 * (est.a_grid[j] + est.a_grid[j + 1]);
            double fh = 0.25
                      * (est.f[i][j] + est.f[i + 1][j] + est.f[i][j + 1] + est.f[i + 1][j + 1]);
            double ft = (th >= c.th_lo && th <= c.th_hi && a >= c.a_lo && a <= c.a_hi)
                            ? c.f_at(th, a)
                            : 0.0;
            err += std::abs(fh - ft) * (est.th_grid[i + 1] - est.th_grid[i])
                 * (est.a_grid[j + 1] - est.a_grid[j]);
        }
    }
    return err;
}

// ---- likelihood refinement of the sampled joint ----

// EM over node masses on the recovered support box. Each insured record
// contributes its contract choice (a frontier region at its shifter value)
// and its reported count (a thinned Poisson in the risk coordinate), so
// records collapse into (z node, choice, count) classes. The frontier is
// decreasing in risk aversion, so each choice region is a per-row prefix of
// the a-grid, which keeps one EM sweep linear in the class and node counts.
inline void em_refine_joint(FiniteIdentification& out,
                            const std::vector<std::vector<const ObservationRecord*>>& groups,
                            const std::vector<double>& zg, const FiniteMenuOffer& offer,
                            double thin1, double thin2, int iters = 300) {
    std::size_t ni = out.th_grid.size(), nj = out.a_grid.size(), nz = zg.size();
    // class histogram: counts per (z node, choice, reported count)
    int jmax = 0;
    for (const auto& g : groups)
        for (const auto* r : g) jmax = std::max(jmax, r->j_star);
    std::vector<std::vector<std::vector<double>>> cnt(
        nz, std::vector<std::vector<double>>(2, std::vector<double>(jmax + 1, 0.0)));
    for (std::size_t iz = 0; iz < nz; ++iz)
        for (const auto* r : groups[iz])
            if (r->chi == 1 || r->chi == 2) cnt[iz][r->chi - 1][r->j_star] += 1.0;
    // frontier prefix: for each (z, risk row) the number of leading a nodes
    // choosing contract 1
    std::vector<std::vector<std::size_t>> pref(nz, std::vector<std::size_t>(ni, 0));
    for (std::size_t iz = 0; iz < nz; ++iz) {
        ContractPair p = offer.at(zg[iz]);
        std::vector<double> thf(nj);
        for (std::size_t j = 0; j < nj; ++j)
            thf[j] = frontier_theta_h(p, out.a_grid[j], out.Hstar2);
        for (std::size_t i = 0; i < ni; ++i) {
            std::size_t J = 0;
            while (J < nj && out.th_grid[i] < thf[J]) ++J;
            pref[iz][i] = J;
        }
    }
    // Poisson class likelihoods per risk row
    auto pois_table = [&](double thin) {
        std::vector<std::vector<double>> t(jmax + 1, std::vector<double>(ni));
        for (std::size_t i = 0; i < ni; ++i) {
            double rate = thin * out.th_grid[i];
            double p = std::exp(-rate);
            for (int k = 0; k <= jmax; ++k) {
                t[k][i] = p;
                p *= rate / (k + 1);
            }
        }
        return t;
    };
    auto pois1 = pois_table(thin1), pois2 = pois_table(thin2);
    // node masses from the current density estimate (uniform box if empty)
    std::vector<std::vector<double>> w(ni, std::vector<double>(nj, 1.0));
    double tot = 0.0;
    for (auto& row : w)
        for (double v : row) tot += v;
    for (auto& row : w)
        for (double& v : row) v /= tot;
    std::vector<std::vector<double>> prefw(ni, std::vector<double>(nj + 1, 0.0));
    for (int it = 0; it < iters; ++it) {
        for (std::size_t i = 0; i < ni; ++i)
            for (std::size_t j = 0; j < nj; ++j) prefw[i][j + 1] = prefw[i][j] + w[i][j];
        // per-row multiplier accumulated as a difference array over a
        std::vector<std::vector<double>> dmul(ni, std::vector<double>(nj + 1, 0.0));
        for (std::size_t iz = 0; iz < nz; ++iz) {
            for (int chi = 0; chi < 2; ++chi) {
                const auto& pois = chi == 0 ? pois1 : pois2;
                for (int k = 0; k <= jmax; ++k) {
                    double n = cnt[iz][chi][k];
                    if (n == 0.0) continue;
                    double denom = 0.0;
                    for (std::size_t i = 0; i < ni; ++i) {
                        std::size_t J = pref[iz][i];
                        double mass = chi == 0 ? prefw[i][J] : prefw[i][nj] - prefw[i][J];
                        denom += pois[k][i] * mass;
                    }
                    if (denom <= 0.0) continue;
                    for (std::size_t i = 0; i < ni; ++i) {
                        double coeff = n * pois[k][i] / denom;
                        std::size_t J = pref[iz][i];
                        if (chi == 0) {
                            dmul[i][0] += coeff;
                            dmul[i][J] -= coeff;
                        } else {
                            dmul[i][J] += coeff;
                            dmul[i][nj] -= coeff;
                        }
                    }
                }
            }
        }
        double ntot = 0.0, mass = 0.0;
        for (std::size_t iz = 0; iz < nz; ++iz)
            for (int chi = 0; chi < 2; ++chi)
                for (int k = 0; k <= jmax; ++k) ntot += cnt[iz][chi][k];
        for (std::size_t i = 0; i < ni; ++i) {
            double acc = 0.0;
            for (std::size_t j = 0; j < nj; ++j) {
                acc += dmul[i][j];
                w[i][j] *= acc / ntot;
                mass += w[i][j];
            }
        }
        for (auto& row : w)
            for (double& v : row) v /= mass;
    }
    // node masses back to a density over the box
    double dth = out.th_grid[1] - out.th_grid[0], da = out.a_grid[1] - out.a_grid[0];
    for (std::size_t i = 0; i < ni; ++i) {
        double fi = (i == 0 || i + 1 == ni) ? 0.5 : 1.0;
        for (std::size_t j = 0; j < nj; ++j) {
            double fj = (j == 0 || j + 1 == nj) ? 0.5 : 1.0;
            out.f[i][j] = w[i][j] / (dth * da * fi * fj);
        }
    }
    double m = out.joint_mass();
    for (auto& row : out.f)
        for (double& v : row) v /= m;
}

// ---- end-to-end pipelines ----

inline FiniteIdentification identify_finite_sampled(const std::vector<ObservationRecord>& recs,
                                                    const FiniteMenuOffer& offer,
                                                    DamageObs obs, double dbar, double a_lo,
                                                    double a_hi, std::size_t moment_order = 4,
                                                    std::size_t out_nodes = 65,
                                                    int series_cap = 3, int em_iters = 20) {
    auto zg = offer.z_grid();
    std::vector<std::vector<const ObservationRecord*>> groups(zg.size());
    for (const auto& r : recs) {
        if (r.chi < 1) continue;
        std::size_t best = 0;
        double bd = std::abs(r.z - zg[0]);
        for (std::size_t i = 1; i < zg.size(); ++i) {
            double d = std::abs(r.z - zg[i]);
            if (d < bd) {
                bd = d;
                best = i;
            }
        }
        groups[best].push_back(&r);
    }
    PooledDamages pool = pool_damages(recs, offer.base, obs, dbar);
    // raw per-node shares and choice-conditional risk moments
    std::size_t nz = zg.size();
    std::vector<double> nu_raw(nz), n1(nz, 0.0), n2(nz, 0.0);
    std::vector<std::vector<double>> m1(moment_order + 1, std::vector<double>(nz, 0.0));
    std::vector<std::vector<double>> m2 = m1;
    for (std::size_t i = 0; i < nz; ++i) {
        std::vector<int> j1, j2;
        for (const auto* r : groups[i]) {
            if (r->chi == 1) j1.push_back(r->j_star);
            if (r->chi == 2) j2.push_back(r->j_star);
        }
        n1[i] = static_cast<double>(j1.size());
        n2[i] = static_cast<double>(j2.size());
        if (j1.empty() && j2.empty())
            throw std::domain_error("identify_finite_sampled: empty shifter node");
        nu_raw[i] = n1[i] / (n1[i] + n2[i]);
        if (!j1.empty()) {
            auto em = detail::group_factorial_moments(j1, moment_order);
            double thin = obs == DamageObs::truncated ? pool.lambda : 1.0;
            for (std::size_t k = 0; k <= moment_order; ++k)
                m1[k][i] = em[k] / std::pow(thin, static_cast<double>(k));
        }
        if (!j2.empty()) {
            auto em = detail::group_factorial_moments(j2, moment_order);
            for (std::size_t k = 0; k <= moment_order; ++k) m2[k][i] = em[k];
        }
    }
    // the shares and conditional moments are smooth in the shifter, so a
    // weighted cross-node local-quadratic fit trades per-node noise for
    // pooled information before any inversion
    double zspan = zg.back() - zg.front();
    auto smooth = [&](const std::vector<double>& y, const std::vector<double>& w,
                      double z0) {
        double d1, d2, v;
        for (double bw = 0.12 * zspan;; bw *= 1.5) {
            try {
                local_quadratic(zg, y, z0, bw, d1, d2, &v, &w);
                return v;
            } catch (const std::domain_error&) {
                if (bw > 4.0 * zspan) throw;
            }
        }
    };
    // pooled marginal risk moments: the marginal is shifter-invariant, so
    // every record contributes regardless of its z node
    std::vector<double> mum(moment_order + 1, 0.0);
    double ntot = 0.0;
    for (std::size_t i = 0; i < nz; ++i) {
        double ni = n1[i] + n2[i];
        ntot += ni;
        for (std::size_t k = 0; k <= moment_order; ++k)
            mum[k] += n1[i] * m1[k][i] + n2[i] * m2[k][i];
    }
    for (double& v : mum) v /= ntot;
    std::vector<double> all(nz);
    for (std::size_t i = 0; i < nz; ++i) all[i] = n1[i] + n2[i];
    std::vector<TildeStructure> cells;
    for (std::size_t i = 0; i < nz; ++i) {
        if (groups[i].size() < 50) continue;
        double nu = std::clamp(smooth(nu_raw, all, zg[i]), 0.0, 1.0);
        std::vector<double> mu1(moment_order + 1, 0.0), mu2(moment_order + 1, 0.0);
        mu1[0] = mu2[0] = 1.0;
        for (std::size_t k = 1; k <= moment_order; ++k) {
            if (nu > 1e-9) mu1[k] = smooth(m1[k], n1, zg[i]);
            if (nu < 1.0 - 1e-9) mu2[k] = smooth(m2[k], n2, zg[i]);
        }
        cells.push_back(tilde_from_moments(mu1, mu2, nu, 1.0 - nu, pool.lambda,
                                           offer.at(zg[i]), pool.Hstar1, pool.Hstar2,
                                           zg[i], 201, series_cap));
    }
    // sampled shares carry a smoothing noise floor, so the corner fit needs a
    // window above it
    FiniteIdentification out =
        assemble_joint_finite(cells, obs, a_lo, a_hi, out_nodes, &mum, 0.01, 0.12);
    double thin1 = obs == DamageObs::truncated ? pool.lambda : 1.0;
    em_refine_joint(out, groups, zg, offer, thin1, 1.0, em_iters);
    return out;
}

inline FiniteIdentification identify_finite_functional(const Cell& c,
                                                       const FiniteMenuOffer& offer,
                                                       DamageObs obs,
                                                       std::size_t moment_order = 8,
                                                       std::size_t out_nodes = 65) {
    std::vector<TildeStructure> cells;
    for (double z : offer.z_grid())
        cells.push_back(recover_tilde_functional(offer.at(z), c, obs, moment_order, 201, z));
    return assemble_joint_finite(cells, obs, c.a_lo, c.a_hi, out_nodes);
}

// ---- observational-equivalence construction ----

namespace detail {

// refine a damage grid so the two deductibles are exact nodes
inline GridDistribution with_nodes(const GridDistribution& H, double dd2, double dd1) {
    GridDistribution out;
    std::vector<double> xs = H.x;
    for (double v : {dd2, dd1}) {
        bool found = false;
        for (double x : xs)
            if (std::abs(x - v) < 1e-15) found = true;
        if (!found) xs.push_back(v);
    }
    std::sort(xs.begin(), xs.end());
    out.x = xs;
    out.F.resize(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) out.F[i] = H.cdf(xs[i]);
    return out;
}

// exact integrals of e^{u theta} f(theta, a) below a cut at fixed a
inline double exp_mass_below(const Cell& c, double a, double cut, double u) {
    double m = 0.0;
    if (cut <= c.th_lo) return 0.0;
    double hi = std::min(cut, c.th_hi);
    for (std::size_t i = 0; i + 1 < c.th_grid.size(); ++i) {
        double x0 = std::max(c.th_grid[i], c.th_lo), x1 = std::min(c.th_grid[i + 1], hi);
        if (x1 <= x0) continue;
        double f0 = c.f_at(x0, a), f1 = c.f_at(x1, a);
        double slope = (f1 - f0) / (x1 - x0);
        double b0 = f0 - slope * x0;
        if (std::abs(u) < 1e-12) {
            m += 0.5 * (f0 + f1) * (x1 - x0);
            continue;
        }
        double e0 = std::exp(u * x0), e1 = std::exp(u * x1);
        double i0 = (e1 - e0) / u;
        double i1 = (x1 * e1 - x0 * e0) / u - i0 / u;
        m += b0 * i0 + slope * i1;
    }
    return m;
}

}  // namespace detail

// MGF of risk given the contract choice, by quadrature over the partition.
inline double mgf_theta_given_choice(const ContractPair& p, const Cell& c, double u, int chi,
                                     std::size_t na = 2001) {
    auto as = linspace(c.a_lo, c.a_hi, na);
    std::vector<double> num(na), den(na);
    for (std::size_t j = 0; j < na; ++j) {
        double thf = frontier_theta(p, as[j], c);
        double below_e = detail::exp_mass_below(c, as[j], thf, u);
        double below_m = detail::exp_mass_below(c, as[j], thf, 0.0);
        double tot_e = detail::exp_mass_below(c, as[j], c.th_hi, u);
        double tot_m = detail::exp_mass_below(c, as[j], c.th_hi, 0.0);
        num[j] = chi == 1 ? below_e : tot_e - below_e;
        den[j] = chi == 1 ? below_m : tot_m - below_m;
    }
    return trapezoid(as, num) / trapezoid(as, den);
}

// Scaled structure from the nonidentification construction: risk multiplied
// by kappa, damage survivor divided by kappa above the low deductible, and a
// proportional completion below it.
inline Cell kappa_cell(const Cell& c, const ContractPair& p, double kappa) {
    double h2 = c.damage.cdf(p.dd2);
    if (!(kappa > 1.0 - h2))
        throw std::domain_error("kappa_cell: scale must exceed the survivor mass at dd2");
    if (h2 <= 0.0)
        throw std::domain_error("kappa_cell: no damage mass below the low deductible");
    Cell out = c;
    out.th_lo *= kappa;
    out.th_hi *= kappa;
    for (double& t : out.th_grid) t *= kappa;
    for (auto& row : out.f)
        for (double& v : row) v /= kappa;
    GridDistribution base = detail::with_nodes(c.damage, p.dd2, p.dd1);
    GridDistribution scaled = base;
    double head_scale = (1.0 - (1.0 - h2) / kappa) / h2;
    for (std::size_t i = 0; i < base.x.size(); ++i) {
        if (base.x[i] <= p.dd2 + 1e-15 && base.F[i] <= h2 + 1e-15)
            scaled.F[i] = base.F[i] * head_scale;
        else
            scaled.F[i] = 1.0 - (1.0 - base.F[i]) / kappa;
    }
    out.damage = scaled;
    return out;
}

// One observational functional comparison between the original structure and
// its kappa construction.
struct KappaReport {
    double dev_nu = 0.0;        // contract shares
    double dev_lambda = 0.0;    // damage-density ratio
    double dev_hstar = 0.0;     // truncated damage laws, sup over grid
    double dev_mgf = 0.0;       // reported-count MGF on the test grid
    double dev_frontier = 0.0;  // rescaled frontier, sup over a grid
    double dev_foc = 0.0;       // menu first-order conditions with the same multiplier
    double dev_ir = 0.0;        // participation premium

    double max_dev() const {
        return std::max({dev_nu, dev_lambda, dev_hstar, dev_mgf, dev_frontier, dev_foc,
                         dev_ir});
    }
};

inline KappaReport kappa_check(const Cell& c0, const ContractPair& p, double rho,
                               double kappa) {
    Cell base = c0;
    base.damage = detail::with_nodes(c0.damage, p.dd2, p.dd1);
    Cell alt = kappa_cell(base, p, kappa);
    KappaReport rep;

    MenuPartition pa = partition(p, base), pb = partition(p, alt);
    rep.dev_nu = std::abs(pa.nu1 - pb.nu1);

    double l0 = (1.0 - base.damage.cdf(p.dd1)) / (1.0 - base.damage.cdf(p.dd2));
    double l1 = (1.0 - alt.damage.cdf(p.dd1)) / (1.0 - alt.damage.cdf(p.dd2));
    rep.dev_lambda = std::abs(l0 - l1);

    for (int chi = 1; chi <= 2; ++chi) {
        double ddc = chi == 1 ? p.dd1 : p.dd2;
        GridDistribution t0 = truncate(base.damage, ddc);
        GridDistribution t1 = truncate(alt.damage, ddc);
        for (double d : linspace(ddc, base.damage.hi(), 41))
            rep.dev_hstar = std::max(rep.dev_hstar, std::abs(t0.cdf(d) - t1.cdf(d)));
    }

    for (double t : {-1.0, -0.5, 0.5}) {
        for (int chi = 1; chi <= 2; ++chi) {
            double ddc = chi == 1 ? p.dd1 : p.dd2;
            double u0 = (1.0 - base.damage.cdf(ddc)) * (std::exp(t) - 1.0);
            double u1 = (1.0 - alt.damage.cdf(ddc)) * (std::exp(t) - 1.0);
            double m0 = mgf_theta_given_choice(p, base, u0, chi);
            double m1 = mgf_theta_given_choice(p, alt, u1, chi);
            rep.dev_mgf = std::max(rep.dev_mgf, std::abs(m0 - m1));
        }
    }

    for (double a : linspace(base.a_lo, base.a_hi, 21)) {
        double f0 = frontier_theta(p, a, base);
        double f1 = frontier_theta(p, a, alt);
        rep.dev_frontier = std::max(rep.dev_frontier, std::abs(f1 / kappa - f0));
    }

    MenuResiduals r0 = menu_foc(p, rho, base), r1 = menu_foc(p, rho, alt);
    rep.dev_foc = std::max({std::abs(r0.e_t1 - r1.e_t1), std::abs(r0.e_dd1 - r1.e_dd1),
                            std::abs(r0.e_t2 - r1.e_t2), std::abs(r0.e_dd2 - r1.e_dd2)});
    rep.dev_ir = std::abs(ir_premium(p.dd1, base) - ir_premium(p.dd1, alt));
    return rep;
}

}  // namespace screenlab
