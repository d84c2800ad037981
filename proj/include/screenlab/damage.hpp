#pragma once

#include <cmath>
#include <stdexcept>

#include "screenlab/grid.hpp"

namespace screenlab {

// ---- exact segment integrals against piecewise-linear CDFs ----
//
// All damage integrals reduce to integrals of e^{aD}(alpha + beta*D) over
// grid segments, which have closed forms. Small-a branches avoid the 1/a^2
// cancellation.

// integral of e^{aD} over [x0,x1]
inline double exp_int(double a, double x0, double x1) {
    if (x1 <= x0) return 0.0;
    if (std::abs(a) < 1e-12) return x1 - x0;
    return std::exp(a * x0) * std::expm1(a * (x1 - x0)) / a;
}

// integral of D*e^{aD} over [x0,x1]
inline double exp_int_d(double a, double x0, double x1) {
    if (x1 <= x0) return 0.0;
    if (std::abs(a) < 1e-4) {
        // series so the 1/a^2 terms never meet
        auto P = [a](double x) {
            return x * x / 2.0 + a * x * x * x / 3.0 + a * a * x * x * x * x / 8.0
                 + a * a * a * x * x * x * x * x / 30.0;
        };
        return P(x1) - P(x0);
    }
    auto G = [a](double x) { return std::exp(a * x) * (x / a - 1.0 / (a * a)); };
    return G(x1) - G(x0);
}

// integral of e^{aD} dH(D) over [lo,hi] for a piecewise-linear CDF H
inline double exp_moment_range(const GridDistribution& H, double a, double lo, double hi) {
    if (hi <= lo) return 0.0;
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < H.x.size(); ++i) {
        double x0 = std::max(H.x[i], lo), x1 = std::min(H.x[i + 1], hi);
        if (x1 <= x0) continue;
        double slope = (H.F[i + 1] - H.F[i]) / (H.x[i + 1] - H.x[i]);
        total += slope * exp_int(a, x0, x1);
    }
    return total;
}

// integral of D*e^{aD} dH(D) over the full support
inline double exp_moment_d(const GridDistribution& H, double a) {
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < H.x.size(); ++i) {
        double slope = (H.F[i + 1] - H.F[i]) / (H.x[i + 1] - H.x[i]);
        total += slope * exp_int_d(a, H.x[i], H.x[i + 1]);
    }
    return total;
}

// integral of e^{aD} (1 - H(D)) dD over [lo,hi]
inline double exp_survival_int(const GridDistribution& H, double a, double lo, double hi) {
    if (hi <= lo) return 0.0;
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < H.x.size(); ++i) {
        double x0 = std::max(H.x[i], lo), x1 = std::min(H.x[i + 1], hi);
        if (x1 <= x0) continue;
        double slope = (H.F[i + 1] - H.F[i]) / (H.x[i + 1] - H.x[i]);
        // 1 - H(D) = alpha + beta*D on this segment
        double beta = -slope;
        double alpha = 1.0 - H.F[i] + slope * H.x[i];
        total += alpha * exp_int(a, x0, x1) + beta * exp_int_d(a, x0, x1);
    }
    return total;
}

// ---- damage-model operations ----

// expected insurer payment per accident under deductible dd
inline double expected_payment(const GridDistribution& H, double dd) {
    if (dd < H.lo() - 1e-12 || dd > H.hi() + 1e-12)
        throw std::domain_error("expected_payment: deductible outside damage support");
    return exp_survival_int(H, 0.0, std::max(dd, H.lo()), H.hi());
}

// renormalized upper tail of H above cutoff dd; the cutoff becomes an exact
// grid node so no interpolation error enters the renormalization
inline GridDistribution truncate(const GridDistribution& H, double dd) {
    if (dd >= H.hi()) throw std::domain_error("truncate: empty support above cutoff");
    if (dd <= H.lo()) return H;
    double Hc = H.cdf(dd);
    if (1.0 - Hc <= 0.0) throw std::domain_error("truncate: no mass above cutoff");
    GridDistribution out;
    out.x.push_back(dd);
    out.F.push_back(0.0);
    std::size_t i0 = H.segment(dd);
    for (std::size_t k = i0 + 1; k < H.x.size(); ++k) {
        if (H.x[k] <= dd + 1e-15 * (H.hi() - H.lo())) continue;
        out.x.push_back(H.x[k]);
        out.F.push_back((H.F[k] - Hc) / (1.0 - Hc));
    }
    out.F.back() = 1.0;
    return out;
}

// ratio of truncated damage densities: (1-H(dd1))/(1-H(dd2)) for dd2 < dd1
inline double lambda_ratio(const GridDistribution& H, double dd1, double dd2) {
    if (!(dd2 < dd1) || dd1 >= H.hi())
        throw std::domain_error("lambda_ratio: requires dd2 < dd1 < upper damage bound");
    return (1.0 - H.cdf(dd1)) / (1.0 - H.cdf(dd2));
}

}  // namespace screenlab
