#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace screenlab {

// Gaussian elimination with partial pivoting; A is destroyed.
inline std::vector<double> solve_linear(std::vector<std::vector<double>> A,
                                        std::vector<double> b) {
    std::size_t n = b.size();
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(A[r][col]) > std::abs(A[piv][col])) piv = r;
        if (std::abs(A[piv][col]) < 1e-300)
            throw std::domain_error("solve_linear: singular matrix");
        std::swap(A[piv], A[col]);
        std::swap(b[piv], b[col]);
        for (std::size_t r = col + 1; r < n; ++r) {
            double m = A[r][col] / A[col][col];
            for (std::size_t c = col; c < n; ++c) A[r][c] -= m * A[col][c];
            b[r] -= m * b[col];
        }
    }
    std::vector<double> x(n);
    for (std::size_t i = n; i-- > 0;) {
        double s = b[i];
        for (std::size_t c = i + 1; c < n; ++c) s -= A[i][c] * x[c];
        x[i] = s / A[i][i];
    }
    return x;
}

// local quadratic least squares: value, slope and curvature of y(x) at x0,
// optionally weighted
inline void local_quadratic(const std::vector<double>& x, const std::vector<double>& y,
                            double x0, double bw, double& d1, double& d2,
                            double* value = nullptr,
                            const std::vector<double>* weight = nullptr) {
    std::vector<std::vector<double>> A(3, std::vector<double>(3, 0.0));
    std::vector<double> b(3, 0.0);
    std::size_t used = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        double u = x[i] - x0;
        if (std::abs(u) > bw) continue;
        double w = weight ? (*weight)[i] : 1.0;
        if (w <= 0.0) continue;
        ++used;
        double p[3] = {1.0, u, u * u};
        for (int r = 0; r < 3; ++r) {
            for (int cc = 0; cc < 3; ++cc) A[r][cc] += w * p[r] * p[cc];
            b[r] += w * p[r] * y[i];
        }
    }
    if (used < 6) throw std::domain_error("local_quadratic: too few points in window");
    auto beta = solve_linear(A, b);
    d1 = beta[1];
    d2 = 2.0 * beta[2];
    if (value) *value = beta[0];
}

// Damped Newton on a vector residual with a finite-difference Jacobian.
// Returns the final max-abs residual; x holds the best point found.
template <class Fn>
double newton_solve(Fn&& f, std::vector<double>& x, double tol = 1e-12, int maxit = 60,
                    double fd = 1e-6) {
    std::size_t n = x.size();
    auto norm = [](const std::vector<double>& r) {
        double m = 0.0;
        for (double v : r) m = std::max(m, std::abs(v));
        return m;
    };
    std::vector<double> r = f(x);
    double best = norm(r);
    for (int it = 0; it < maxit && best > tol; ++it) {
        std::vector<std::vector<double>> J(n, std::vector<double>(n));
        for (std::size_t j = 0; j < n; ++j) {
            double h = fd * std::max(1.0, std::abs(x[j]));
            auto xp = x;
            xp[j] += h;
            auto rp = f(xp);
            for (std::size_t i = 0; i < n; ++i) J[i][j] = (rp[i] - r[i]) / h;
        }
        std::vector<double> dx;
        try {
            dx = solve_linear(J, r);
        } catch (const std::domain_error&) {
            break;
        }
        double lambda = 1.0;
        bool improved = false;
        for (int half = 0; half < 25; ++half, lambda *= 0.5) {
            auto xt = x;
            for (std::size_t j = 0; j < n; ++j) xt[j] -= lambda * dx[j];
            std::vector<double> rt;
            try {
                rt = f(xt);
            } catch (const std::domain_error&) {
                continue;
            }
            double nt = norm(rt);
            if (nt < best) {
                x = xt;
                r = rt;
                best = nt;
                improved = true;
                break;
            }
        }
        if (!improved) break;
    }
    return best;
}

// Nelder-Mead simplex minimization; x holds the best vertex on return.
template <class Fn>
double nelder_mead(Fn&& f, std::vector<double>& x, const std::vector<double>& step,
                   double tol = 1e-12, int maxit = 4000) {
    std::size_t n = x.size();
    std::vector<std::vector<double>> pts(n + 1, x);
    std::vector<double> fv(n + 1);
    for (std::size_t i = 0; i < n; ++i) pts[i + 1][i] += step[i];
    for (std::size_t i = 0; i <= n; ++i) fv[i] = f(pts[i]);
    for (int it = 0; it < maxit; ++it) {
        // order the simplex
        std::vector<std::size_t> idx(n + 1);
        for (std::size_t i = 0; i <= n; ++i) idx[i] = i;
        std::sort(idx.begin(), idx.end(),
                  [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
        std::size_t lo = idx[0], hi = idx[n], nh = idx[n - 1];
        if (std::abs(fv[hi] - fv[lo]) < tol * (std::abs(fv[lo]) + tol)) break;
        std::vector<double> cen(n, 0.0);
        for (std::size_t i = 0; i <= n; ++i)
            if (i != hi)
                for (std::size_t j = 0; j < n; ++j) cen[j] += pts[i][j] / static_cast<double>(n);
        auto move = [&](double coef) {
            std::vector<double> p(n);
            for (std::size_t j = 0; j < n; ++j)
                p[j] = cen[j] + coef * (pts[hi][j] - cen[j]);
            return p;
        };
        auto pr = move(-1.0);
        double fr = f(pr);
        if (fr < fv[lo]) {
            auto pe = move(-2.0);
            double fe = f(pe);
            if (fe < fr) { pts[hi] = pe; fv[hi] = fe; }
            else { pts[hi] = pr; fv[hi] = fr; }
        } else if (fr < fv[nh]) {
            pts[hi] = pr;
            fv[hi] = fr;
        } else {
            auto pc = move(fr < fv[hi] ? -0.5 : 0.5);
            double fc = f(pc);
            if (fc < std::min(fr, fv[hi])) { pts[hi] = pc; fv[hi] = fc; }
            else {
                for (std::size_t i = 0; i <= n; ++i) {
                    if (i == lo) continue;
                    for (std::size_t j = 0; j < n; ++j)
                        pts[i][j] = pts[lo][j] + 0.5 * (pts[i][j] - pts[lo][j]);
                    fv[i] = f(pts[i]);
                }
            }
        }
    }
    std::size_t lo = 0;
    for (std::size_t i = 1; i <= n; ++i)
        if (fv[i] < fv[lo]) lo = i;
    x = pts[lo];
    return fv[lo];
}

}  // namespace screenlab
