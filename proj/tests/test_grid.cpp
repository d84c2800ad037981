#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "screenlab/grid.hpp"
#include "screenlab/rng.hpp"

using namespace screenlab;

TEST_CASE("uniform distribution basics") {
    auto g = uniform_distribution(0.0, 1.0, 512);
    CHECK(g.valid());
    CHECK(g.cdf(0.25) == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(g.quantile(0.7) == doctest::Approx(0.7).epsilon(1e-12));
    CHECK(g.density(0.4) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("cdf/quantile round trip on a nonuniform cdf") {
    GridDistribution g;
    g.x = linspace(0.0, 2.0, 257);
    g.F.resize(g.x.size());
    for (std::size_t i = 0; i < g.x.size(); ++i) {
        double u = g.x[i] / 2.0;
        g.F[i] = u * u;  // density rises linearly
    }
    g.F.back() = 1.0;
    CHECK(g.valid());
    for (double u : {0.05, 0.3, 0.5, 0.77, 0.99}) {
        double v = g.quantile(u);
        CHECK(g.cdf(v) == doctest::Approx(u).epsilon(1e-9));
    }
}

TEST_CASE("empirical distribution approaches truth") {
    Rng rng(42);
    std::vector<double> xs(200000);
    for (auto& v : xs) v = rng.uniform();
    auto g = empirical_distribution(xs, linspace(0.0, 1.0, 512));
    double worst = 0.0;
    for (double v : {0.1, 0.35, 0.5, 0.8, 0.95})
        worst = std::max(worst, std::abs(g.cdf(v) - v));
    CHECK(worst < 0.01);
}

TEST_CASE("trapezoid matches a known integral") {
    auto x = linspace(0.0, 1.0, 2001);
    std::vector<double> y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] * x[i];
    CHECK(trapezoid(x, y) == doctest::Approx(1.0 / 3.0).epsilon(1e-6));
}

TEST_CASE("bisect finds roots and rejects bad brackets") {
    double r = bisect([](double v) { return v * v - 2.0; }, 0.0, 2.0);
    CHECK(r == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
    CHECK_THROWS_AS(bisect([](double v) { return v + 3.0; }, 0.0, 1.0), std::domain_error);
}

TEST_CASE("rng determinism and poisson moments") {
    Rng r1(7, 3), r2(7, 3);
    for (int i = 0; i < 10; ++i) CHECK(r1.uniform() == r2.uniform());

    Rng r(123);
    int n = 200000;
    double sum = 0.0, sum2 = 0.0, zeros = 0.0;
    for (int i = 0; i < n; ++i) {
        int j = r.poisson(1.0);
        sum += j;
        sum2 += j * j;
        if (j == 0) zeros += 1.0;
    }
    double mean = sum / n;
    double var = sum2 / n - mean * mean;
    CHECK(mean == doctest::Approx(1.0).epsilon(0.01));
    CHECK(var == doctest::Approx(1.0).epsilon(0.02));
    CHECK(zeros / n == doctest::Approx(std::exp(-1.0)).epsilon(0.02));
}
