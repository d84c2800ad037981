#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

#include "screenlab/grid.hpp"
#include "screenlab/optimize.hpp"

namespace screenlab {

// ---- count moments ----

// factorial moments m_k = E[J(J-1)...(J-k+1)], k = 0..K; for a Poisson(theta)
// mixture these equal the raw moments E[theta^k] of the mixing distribution,
// and thinning by lambda scales them by lambda^k
inline std::vector<double> factorial_moments(const std::vector<int>& counts, int K) {
    if (counts.empty()) throw std::domain_error("factorial_moments: no counts");
    std::vector<double> m(static_cast<std::size_t>(K) + 1, 0.0);
    for (int j : counts) {
        double prod = 1.0;
        m[0] += 1.0;
        for (int k = 1; k <= K; ++k) {
            prod *= j - (k - 1);
            if (j < k) { prod = 0.0; }
            m[static_cast<std::size_t>(k)] += prod;
        }
    }
    for (double& v : m) v /= static_cast<double>(counts.size());
    return m;
}

// raw mixing moments implied by count factorial moments under thinning
inline std::vector<double> mixing_moments(const std::vector<double>& fact, double thinning) {
    if (thinning <= 0.0 || thinning > 1.0)
        throw std::domain_error("mixing_moments: thinning factor in (0,1] required");
    std::vector<double> mu(fact.size());
    double lk = 1.0;
    for (std::size_t k = 0; k < fact.size(); ++k) {
        mu[k] = fact[k] / lk;
        lk *= thinning;
    }
    return mu;
}

// ---- recovered mixing distribution ----

struct MixingDistribution {
    std::vector<double> grid;     // theta nodes (atom locations when atomic)
    std::vector<double> weights;  // node masses, nonnegative, sum 1
    std::vector<double> density;  // node densities (smooth mode only)
    bool atomic = false;

    double moment(int k) const {
        double s = 0.0;
        for (std::size_t i = 0; i < grid.size(); ++i)
            s += weights[i] * std::pow(grid[i], k);
        return s;
    }
    double mean() const { return moment(1); }

    // interpolated density (smooth mode); zero outside the grid
    double density_at(double x) const {
        if (atomic || grid.size() < 2) return 0.0;
        if (x < grid.front() || x > grid.back()) return 0.0;
        auto it = std::upper_bound(grid.begin(), grid.end(), x);
        std::size_t i = it == grid.end() ? grid.size() - 2
                                         : (it == grid.begin() ? 0 : (std::size_t)(it - grid.begin()) - 1);
        double w = (x - grid[i]) / (grid[i + 1] - grid[i]);
        return density[i] * (1.0 - w) + density[i + 1] * w;
    }

    GridDistribution cdf() const {
        GridDistribution g;
        g.x = grid;
        g.F.resize(grid.size());
        double acc = 0.0;
        for (std::size_t i = 0; i < grid.size(); ++i) {
            acc += weights[i];
            g.F[i] = acc;
        }
        g.F[0] = atomic ? g.F[0] : 0.0;
        for (double& v : g.F) v = std::min(v, 1.0);
        g.F.back() = 1.0;
        return g;
    }
};

namespace detail {

// monomial coefficients of the Legendre polynomials up to order K
inline std::vector<std::vector<double>> legendre_coeffs(int K) {
    std::vector<std::vector<double>> P(static_cast<std::size_t>(K) + 1);
    P[0] = {1.0};
    if (K >= 1) P[1] = {0.0, 1.0};
    for (int k = 2; k <= K; ++k) {
        auto& pk = P[static_cast<std::size_t>(k)];
        pk.assign(static_cast<std::size_t>(k) + 1, 0.0);
        const auto& p1 = P[static_cast<std::size_t>(k - 1)];
        const auto& p2 = P[static_cast<std::size_t>(k - 2)];
        for (std::size_t j = 0; j < p1.size(); ++j)
            pk[j + 1] += (2.0 * k - 1.0) / k * p1[j];
        for (std::size_t j = 0; j < p2.size(); ++j)
            pk[j] -= (k - 1.0) / k * p2[j];
    }
    return P;
}

}  // namespace detail

// Smooth backend: orthogonal-series density on the known support from raw
// mixing moments. The expansion order is capped so that the moment-noise
// amplification of the highest term stays below half a percent.
// k_cap < 0 selects the order from the numerical-noise heuristic (exact
// moments); a nonnegative cap pins the order for noisy sample moments, where
// the window-to-support amplification makes high orders worthless.
inline MixingDistribution invert_mixture_smooth(const std::vector<double>& mu, double lo,
                                                double hi, std::size_t out_nodes = 201,
                                                int k_cap = -1) {
    if (mu.size() < 2 || !(hi > lo))
        throw std::domain_error("invert_mixture_smooth: need moments and a real interval");
    double c = 0.5 * (lo + hi), r = 0.5 * (hi - lo);
    int kmax = std::min<int>(16, static_cast<int>(mu.size()) - 1);
    double base = 2.0 * std::max(std::abs(lo), std::abs(hi)) / (hi - lo) + 1.0;
    int K = 0;
    for (int k = 1; k <= kmax; ++k)
        if (std::pow(base, k + 1) * 1e-12 < 0.005) K = k;
    if (k_cap >= 0) K = std::min(K, k_cap);
    // moments of u = (theta - c)/r by binomial expansion
    std::vector<double> um(static_cast<std::size_t>(K) + 1, 0.0);
    for (int m = 0; m <= K; ++m) {
        double binom = 1.0, acc = 0.0;
        for (int i = 0; i <= m; ++i) {
            acc += binom * std::pow(-c, m - i) * mu[static_cast<std::size_t>(i)];
            binom *= static_cast<double>(m - i) / (i + 1);
        }
        um[static_cast<std::size_t>(m)] = acc / std::pow(r, m);
    }
    auto P = detail::legendre_coeffs(K);
    std::vector<double> coef(static_cast<std::size_t>(K) + 1, 0.0);
    for (int k = 0; k <= K; ++k) {
        double e = 0.0;
        for (std::size_t j = 0; j < P[static_cast<std::size_t>(k)].size(); ++j)
            e += P[static_cast<std::size_t>(k)][j] * um[j];
        coef[static_cast<std::size_t>(k)] = (2.0 * k + 1.0) / 2.0 * e;
    }
    MixingDistribution out;
    out.grid = linspace(lo, hi, out_nodes);
    out.density.resize(out_nodes);
    for (std::size_t i = 0; i < out_nodes; ++i) {
        double u = (out.grid[i] - c) / r;
        // evaluate each Legendre polynomial by the recurrence
        double p0 = 1.0, p1 = u, val = coef[0] * p0;
        if (K >= 1) val += coef[1] * p1;
        for (int k = 2; k <= K; ++k) {
            double p2 = ((2.0 * k - 1.0) * u * p1 - (k - 1.0) * p0) / k;
            val += coef[static_cast<std::size_t>(k)] * p2;
            p0 = p1;
            p1 = p2;
        }
        out.density[i] = std::max(val / r, 0.0);  // clip negative ripples
    }
    double mass = trapezoid(out.grid, out.density);
    if (mass <= 0.0) throw std::domain_error("invert_mixture_smooth: degenerate density");
    for (double& v : out.density) v /= mass;
    // node masses by trapezoid split
    out.weights.assign(out_nodes, 0.0);
    for (std::size_t i = 0; i + 1 < out_nodes; ++i) {
        double seg = 0.5 * (out.density[i] + out.density[i + 1]) * (out.grid[i + 1] - out.grid[i]);
        out.weights[i] += 0.5 * seg;
        out.weights[i + 1] += 0.5 * seg;
    }
    return out;
}

namespace detail {

// all roots of a monic real polynomial by Durand-Kerner iteration
inline std::vector<std::complex<double>> poly_roots(const std::vector<double>& monic) {
    std::size_t p = monic.size();  // coefficients of x^0..x^{p-1}; leading 1 implicit
    std::vector<std::complex<double>> z(p);
    for (std::size_t i = 0; i < p; ++i)
        z[i] = std::pow(std::complex<double>(0.4, 0.9), static_cast<double>(i + 1));
    auto eval = [&](std::complex<double> x) {
        std::complex<double> v{1.0, 0.0};
        for (std::size_t j = p; j-- > 0;) v = v * x + monic[j];
        return v;
    };
    for (int it = 0; it < 300; ++it) {
        double move = 0.0;
        for (std::size_t i = 0; i < p; ++i) {
            std::complex<double> denom{1.0, 0.0};
            for (std::size_t j = 0; j < p; ++j)
                if (j != i) denom *= z[i] - z[j];
            std::complex<double> step = eval(z[i]) / denom;
            z[i] -= step;
            move = std::max(move, std::abs(step));
        }
        if (move < 1e-14) break;
    }
    return z;
}

}  // namespace detail

// Atomic backend: locations from the linear recurrence the moments of a
// p-atom distribution must satisfy, weights from the Vandermonde system.
inline MixingDistribution invert_mixture_atomic(const std::vector<double>& mu, int n_atoms) {
    std::size_t p = static_cast<std::size_t>(n_atoms);
    if (n_atoms < 1 || mu.size() < 2 * p + 1)
        throw std::domain_error("invert_mixture_atomic: need 2p moments for p atoms");
    // solve sum_j c_j mu_{k+j} = -mu_{k+p} for the monic polynomial with the
    // atoms as roots
    std::vector<std::vector<double>> A(p, std::vector<double>(p));
    std::vector<double> b(p);
    for (std::size_t k = 0; k < p; ++k) {
        for (std::size_t j = 0; j < p; ++j) A[k][j] = mu[k + j];
        b[k] = -mu[k + p];
    }
    std::vector<double> cpoly = solve_linear(A, b);
    auto roots = detail::poly_roots(cpoly);
    std::vector<double> loc;
    for (const auto& zc : roots) {
        if (std::abs(zc.imag()) > 1e-6 * (1.0 + std::abs(zc.real())))
            throw std::domain_error("invert_mixture_atomic: complex atom locations");
        loc.push_back(zc.real());
    }
    std::sort(loc.begin(), loc.end());
    // weights from the first p moments
    std::vector<std::vector<double>> V(p, std::vector<double>(p));
    std::vector<double> rhs(p);
    for (std::size_t k = 0; k < p; ++k) {
        for (std::size_t j = 0; j < p; ++j) V[k][j] = std::pow(loc[j], static_cast<double>(k));
        rhs[k] = mu[k];
    }
    std::vector<double> w = solve_linear(V, rhs);
    MixingDistribution out;
    out.atomic = true;
    out.grid = loc;
    out.weights = w;
    double tot = 0.0;
    for (double& v : out.weights) {
        v = std::max(v, 0.0);
        tot += v;
    }
    if (tot <= 0.0) throw std::domain_error("invert_mixture_atomic: no positive weight");
    for (double& v : out.weights) v /= tot;
    return out;
}

// EM refinement of an atomic mixture against the observed thinned counts
inline MixingDistribution em_refine(const std::vector<int>& counts, MixingDistribution mix,
                                    double thinning, int iters = 200) {
    if (!mix.atomic) throw std::domain_error("em_refine: atomic mixture required");
    int jmax = 0;
    for (int j : counts) jmax = std::max(jmax, j);
    std::vector<double> hist(static_cast<std::size_t>(jmax) + 1, 0.0);
    for (int j : counts) hist[static_cast<std::size_t>(j)] += 1.0;
    double n = static_cast<double>(counts.size());
    std::size_t p = mix.grid.size();
    for (int it = 0; it < iters; ++it) {
        std::vector<double> wsum(p, 0.0), jsum(p, 0.0);
        for (int j = 0; j <= jmax; ++j) {
            if (hist[static_cast<std::size_t>(j)] == 0.0) continue;
            std::vector<double> resp(p);
            double tot = 0.0;
            for (std::size_t i = 0; i < p; ++i) {
                double rate = thinning * mix.grid[i];
                double logp = -rate + j * std::log(std::max(rate, 1e-300))
                            - std::lgamma(static_cast<double>(j) + 1.0);
                resp[i] = mix.weights[i] * std::exp(logp);
                tot += resp[i];
            }
            if (tot <= 0.0) continue;
            for (std::size_t i = 0; i < p; ++i) {
                double r = resp[i] / tot * hist[static_cast<std::size_t>(j)];
                wsum[i] += r;
                jsum[i] += r * j;
            }
        }
        double move = 0.0;
        for (std::size_t i = 0; i < p; ++i) {
            double nw = wsum[i] / n;
            double nt = wsum[i] > 0.0 ? jsum[i] / (thinning * wsum[i]) : mix.grid[i];
            move = std::max({move, std::abs(nw - mix.weights[i]), std::abs(nt - mix.grid[i])});
            mix.weights[i] = nw;
            mix.grid[i] = nt;
        }
        if (move < 1e-12) break;
    }
    return mix;
}

enum class MixtureMode { smooth, atomic };

// Full inversion from raw claim counts: counts are Poisson draws whose rate
// is theta thinned by the claim-reporting probability; the mixing law of
// theta on [lo,hi] is recovered from the count moments.
inline MixingDistribution invert_poisson_mixture(const std::vector<int>& counts,
                                                 double thinning, double lo, double hi,
                                                 MixtureMode mode = MixtureMode::smooth,
                                                 int n_atoms = 2) {
    int K = mode == MixtureMode::smooth ? 8 : 2 * n_atoms;
    auto mu = mixing_moments(factorial_moments(counts, K), thinning);
    if (mode == MixtureMode::smooth) return invert_mixture_smooth(mu, lo, hi);
    MixingDistribution mix = invert_mixture_atomic(mu, n_atoms);
    return em_refine(counts, mix, thinning);
}

}  // namespace screenlab
