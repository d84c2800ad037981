#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "screenlab/designs.hpp"
#include "screenlab/model.hpp"

using namespace screenlab;

static const Primitives uprim = make_u_design();
static const Cell& ucell = uprim.cell();

TEST_CASE("cara utility") {
    CHECK(cara_utility(0.0, 1.0) == doctest::Approx(-1.0));
    CHECK(cara_utility(10.0, 1.0) == doctest::Approx(-4.5399929762484854e-05).epsilon(1e-12));
    CHECK(cara_utility(1.0, 1.0) > cara_utility(0.0, 1.0));
    CHECK_THROWS_AS(cara_utility(1.0, 0.0), std::domain_error);
}

TEST_CASE("phi on the uniform damage law") {
    const auto& H = ucell.damage;
    // E[e^D] for D~U[0,1] is e-1
    CHECK(phi(1.0, H) == doctest::Approx(std::exp(1.0) - 1.0).epsilon(1e-12));
    // point mass: a two-node CDF concentrated near d gives ~e^{ad}
    GridDistribution point;
    point.x = {0.6999999, 0.7};
    point.F = {0.0, 1.0};
    CHECK(phi(1.0, point) == doctest::Approx(std::exp(0.7)).epsilon(1e-6));
    CHECK(phi(2.0, H) > 1.0);
}

TEST_CASE("phi_star on the uniform damage law") {
    const auto& H = ucell.damage;
    CHECK(phi_star(1.0, 0.0, H) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(phi_star(1.0, 1.0, H) == doctest::Approx(phi(1.0, H)).epsilon(1e-12));
    double expect = (std::exp(0.5) - 1.0) + 0.5 * std::exp(0.5);
    CHECK(phi_star(1.0, 0.5, H) == doctest::Approx(expect).epsilon(1e-12));
    CHECK_THROWS_AS(phi_star(1.0, 2.0, H), std::domain_error);
    // nondecreasing in dd, pinned between 1 and phi
    double prev = 1.0;
    for (double dd = 0.0; dd <= 1.0; dd += 0.05) {
        double v = phi_star(1.3, dd, H);
        CHECK(v >= prev - 1e-13);
        CHECK(v <= phi(1.3, H) + 1e-13);
        prev = v;
    }
}

TEST_CASE("certainty equivalents") {
    InsureeType ty{1.0, 1.0};
    CHECK(ce_no_insurance(ty, ucell)
          == doctest::Approx(10.0 - (std::exp(1.0) - 2.0)).epsilon(1e-12));
    CHECK(ce_no_insurance({1.2, 1.0}, ucell) < ce_no_insurance({1.0, 1.0}, ucell));
    CHECK(ce_no_insurance({1.0, 1.2}, ucell) < ce_no_insurance({1.0, 1.0}, ucell));

    // full insurance: w - t regardless of type
    CHECK(ce_with_coverage({0.7, 1.4}, {0.3, 0.0}, ucell) == doctest::Approx(9.7).epsilon(1e-12));
    // null coverage reproduces the uninsured CE
    CHECK(ce_with_coverage(ty, {0.0, 1.0}, ucell)
          == doctest::Approx(ce_no_insurance(ty, ucell)).epsilon(1e-12));
    double expect = 10.0 - 0.2 - (phi_star(1.0, 0.5, ucell.damage) - 1.0);
    CHECK(ce_with_coverage(ty, {0.2, 0.5}, ucell) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("premium separability and certainty-equivalent monotonicity on a grid") {
    for (double th : {0.6, 1.0, 1.4}) {
        for (double a : {0.6, 1.0, 1.4}) {
            InsureeType ty{th, a};
            double c1 = ce_with_coverage(ty, {0.1, 0.4}, ucell) + 0.1;
            double c2 = ce_with_coverage(ty, {0.5, 0.4}, ucell) + 0.5;
            CHECK(c1 == doctest::Approx(c2).epsilon(1e-12));
            // strict decrease along both type coordinates
            CHECK(ce_no_insurance({th + 0.05, a}, ucell) < ce_no_insurance(ty, ucell) - 1e-12);
            CHECK(ce_no_insurance({th, a + 0.05}, ucell) < ce_no_insurance(ty, ucell) - 1e-12);
            CHECK(ce_with_coverage({th + 0.05, a}, {0.2, 0.5}, ucell)
                  < ce_with_coverage(ty, {0.2, 0.5}, ucell) - 1e-12);
            CHECK(ce_with_coverage({th, a + 0.05}, {0.2, 0.5}, ucell)
                  < ce_with_coverage(ty, {0.2, 0.5}, ucell) - 1e-12);
        }
    }
}

TEST_CASE("s-isocurves are decreasing theta(a) graphs") {
    double s_lo = s_lower(ucell), s_hi = s_upper(ucell);
    CHECK(s_lo == doctest::Approx(8.678873953107956).epsilon(1e-9));
    CHECK(s_hi == doctest::Approx(9.702557458599744).epsilon(1e-9));
    for (double frac : {0.2, 0.35, 0.5, 0.65, 0.8}) {
        double s = s_lo + frac * (s_hi - s_lo);
        double prev = 1e300;
        for (double a = ucell.a_lo; a <= ucell.a_hi + 1e-9; a += 0.1) {
            double th = theta_on_isocurve(s, a, ucell);
            CHECK(th < prev);
            // the isocurve point indeed attains s
            CHECK(ce_no_insurance({th, a}, ucell) == doctest::Approx(s).epsilon(1e-10));
            prev = th;
        }
    }
}

TEST_CASE("psi inverse round trip") {
    const auto& H = ucell.damage;
    for (double a : {0.55, 0.9, 1.25, 1.45}) {
        double v = psi(a, H);
        CHECK(psi_inverse(v, H, 0.5, 1.5) == doctest::Approx(a).epsilon(1e-10));
    }
    // psi_prime against finite differences
    double h = 1e-6;
    for (double a : {0.7, 1.1}) {
        double fd = (psi(a + h, H) - psi(a - h, H)) / (2 * h);
        CHECK(psi_prime(a, H) == doctest::Approx(fd).epsilon(1e-6));
    }
}

TEST_CASE("A2 check") {
    // identical lotteries: passes vacuously
    auto rep0 = check_a2({0.0, 1.0}, ucell);
    CHECK(rep0.ok);
    // modest full insurance passes on the canonical design
    auto rep1 = check_a2({0.2, 0.0}, ucell);
    CHECK(rep1.ok);
    // ruinous premium: the gain is hugely negative and falls with a
    auto rep2 = check_a2({6.0, 0.0}, ucell);
    CHECK_FALSE(rep2.ok);
    CHECK(rep2.worst < 0.0);
}

TEST_CASE("primitive validation") {
    CHECK_NOTHROW(uprim.validate());
    CHECK_NOTHROW(make_corr_neg_design().validate());
    Primitives bad = make_u_design();
    bad.cells[0].f[3][4] += 5.0;
    CHECK_THROWS_AS(bad.validate(), std::domain_error);
}
