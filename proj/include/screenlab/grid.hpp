#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace screenlab {

// Piecewise-linear CDF on a fixed grid: the universal nonparametric
// representation for one-dimensional distributions in this library.
// The CDF values are the single source of truth; densities are segment
// slopes.
struct GridDistribution {
    std::vector<double> x;  // strictly increasing grid nodes
    std::vector<double> F;  // CDF values, F.front()==0, F.back()==1

    double lo() const { return x.front(); }
    double hi() const { return x.back(); }

    // index of the segment [x[i], x[i+1]] containing v (clamped)
    std::size_t segment(double v) const {
        if (v <= x.front()) return 0;
        if (v >= x.back()) return x.size() - 2;
        auto it = std::upper_bound(x.begin(), x.end(), v);
        return static_cast<std::size_t>(it - x.begin()) - 1;
    }

    double cdf(double v) const {
        if (v <= x.front()) return F.front();
        if (v >= x.back()) return F.back();
        std::size_t i = segment(v);
        double w = (v - x[i]) / (x[i + 1] - x[i]);
        return F[i] + w * (F[i + 1] - F[i]);
    }

    double density(double v) const {
        std::size_t i = segment(v);
        return (F[i + 1] - F[i]) / (x[i + 1] - x[i]);
    }

    double quantile(double u) const {
        if (u <= F.front()) return x.front();
        if (u >= F.back()) return x.back();
        auto it = std::upper_bound(F.begin(), F.end(), u);
        std::size_t i = static_cast<std::size_t>(it - F.begin()) - 1;
        while (i + 2 < F.size() && F[i + 1] <= F[i]) ++i;  // skip flat runs
        double df = F[i + 1] - F[i];
        if (df <= 0.0) return x[i];
        return x[i] + (u - F[i]) / df * (x[i + 1] - x[i]);
    }

    // node-wise density by central differences (one-sided at the ends)
    std::vector<double> density_nodes() const {
        std::size_t n = x.size();
        std::vector<double> d(n);
        d[0] = (F[1] - F[0]) / (x[1] - x[0]);
        d[n - 1] = (F[n - 1] - F[n - 2]) / (x[n - 1] - x[n - 2]);
        for (std::size_t i = 1; i + 1 < n; ++i)
            d[i] = (F[i + 1] - F[i - 1]) / (x[i + 1] - x[i - 1]);
        return d;
    }

    bool valid() const {
        if (x.size() < 2 || x.size() != F.size()) return false;
        if (std::abs(F.front()) > 1e-12 || std::abs(F.back() - 1.0) > 1e-12) return false;
        for (std::size_t i = 1; i < x.size(); ++i) {
            if (!(x[i] > x[i - 1])) return false;
            if (F[i] < F[i - 1] - 1e-14) return false;
        }
        return true;
    }
};

inline std::vector<double> linspace(double lo, double hi, std::size_t n) {
    if (n < 2) throw std::invalid_argument("linspace needs n >= 2");
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i)
        v[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    v.back() = hi;
    return v;
}

inline GridDistribution uniform_distribution(double lo, double hi, std::size_t n = 512) {
    GridDistribution g;
    g.x = linspace(lo, hi, n);
    g.F.resize(n);
    for (std::size_t i = 0; i < n; ++i) g.F[i] = (g.x[i] - lo) / (hi - lo);
    return g;
}

// empirical CDF of samples evaluated at the given grid
inline GridDistribution empirical_distribution(std::vector<double> samples,
                                               const std::vector<double>& grid) {
    if (samples.empty()) throw std::invalid_argument("no samples");
    std::sort(samples.begin(), samples.end());
    GridDistribution g;
    g.x = grid;
    g.F.resize(grid.size());
    double n = static_cast<double>(samples.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        auto it = std::upper_bound(samples.begin(), samples.end(), grid[i]);
        g.F[i] = static_cast<double>(it - samples.begin()) / n;
    }
    g.F.front() = std::min(g.F.front(), 0.0);
    g.F[0] = 0.0;
    g.F.back() = 1.0;
    for (std::size_t i = 1; i < g.F.size(); ++i) g.F[i] = std::max(g.F[i], g.F[i - 1]);
    return g;
}

// composite trapezoid over node values on a (possibly nonuniform) grid
inline double trapezoid(const std::vector<double>& x, const std::vector<double>& y) {
    double s = 0.0;
    for (std::size_t i = 1; i < x.size(); ++i)
        s += 0.5 * (y[i] + y[i - 1]) * (x[i] - x[i - 1]);
    return s;
}

// bisection root finder for a continuous function with a sign change on [a,b]
template <class Fn>
double bisect(Fn&& f, double a, double b, double tol = 1e-13, int maxit = 200) {
    double fa = f(a), fb = f(b);
    if (fa == 0.0) return a;
    if (fb == 0.0) return b;
    if (fa * fb > 0.0) throw std::domain_error("bisect: no sign change in bracket");
    for (int it = 0; it < maxit && (b - a) > tol; ++it) {
        double m = 0.5 * (a + b), fm = f(m);
        if (fm == 0.0) return m;
        if (fa * fm < 0.0) { b = m; fb = fm; }
        else { a = m; fa = fm; }
    }
    return 0.5 * (a + b);
}

}  // namespace screenlab
