#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "screenlab/designs.hpp"
#include "screenlab/finite.hpp"
#include "screenlab/rng.hpp"

using namespace screenlab;

static const Primitives uprim = make_u_design();
static const Cell& ucell = uprim.cell();

static const PairSolution& solved() {
    static PairSolution sol = solve_pair(ucell);
    return sol;
}

TEST_CASE("frontier matches the small-a closed form") {
    // for a -> 0 the indifference threshold is dt / integral of (1-H)
    ContractPair p{0.05, 0.6, 0.15, 0.1};
    double a = 1e-9;
    double denom = (0.6 - 0.1) - 0.5 * (0.36 - 0.01);
    CHECK(frontier_theta(p, a, ucell) == doctest::Approx(0.1 / denom).epsilon(1e-6));
    // and it decreases in risk aversion
    CHECK(frontier_theta(p, 1.4, ucell) < frontier_theta(p, 0.6, ucell));
}

TEST_CASE("frontier partials agree with finite differences") {
    ContractPair p{0.1, 0.7, 0.5, 0.2};
    for (double a : {0.6, 1.0, 1.4}) {
        FrontierPartials g = frontier_partials(p, a, ucell);
        double h = 1e-6;
        auto bump = [&](double dt1, double dd1, double dt2, double dd2) {
            ContractPair q{p.t1 + dt1, p.dd1 + dd1, p.t2 + dt2, p.dd2 + dd2};
            return frontier_theta(q, a, ucell);
        };
        CHECK(g.dt1 == doctest::Approx((bump(h, 0, 0, 0) - bump(-h, 0, 0, 0)) / (2 * h))
                           .epsilon(1e-6));
        CHECK(g.dt2 == doctest::Approx((bump(0, 0, h, 0) - bump(0, 0, -h, 0)) / (2 * h))
                           .epsilon(1e-6));
        CHECK(g.ddd1 == doctest::Approx((bump(0, h, 0, 0) - bump(0, -h, 0, 0)) / (2 * h))
                            .epsilon(1e-5));
        CHECK(g.ddd2 == doctest::Approx((bump(0, 0, 0, h) - bump(0, 0, 0, -h)) / (2 * h))
                            .epsilon(1e-5));
    }
}

TEST_CASE("participation premium closed form on the uniform design") {
    // with a uniform damage law, the integral of (e^{aD} - e^{a dd}) dH
    // over [dd, 1] is ((e^a - e^{a dd})/a - e^{a dd} (1 - dd))
    double a = ucell.a_lo, th = ucell.th_lo, dd = 0.3;
    double tail = (std::exp(a) - std::exp(a * dd)) / a - std::exp(a * dd) * (1.0 - dd);
    CHECK(ir_premium(dd, ucell) == doctest::Approx(th / a * tail).epsilon(1e-8));
    CHECK(ir_premium(1.0, ucell) == doctest::Approx(0.0));
    // the pinned buyer is exactly indifferent
    double t1 = ir_premium(dd, ucell);
    InsureeType worst{ucell.th_lo, ucell.a_lo};
    CHECK(ce_with_coverage(worst, {t1, dd}, ucell)
          == doctest::Approx(ce_no_insurance(worst, ucell)).epsilon(1e-12));
}

TEST_CASE("partition shares match Monte Carlo choice frequencies") {
    ContractPair p{0.1, 0.7, 0.5, 0.2};
    MenuPartition mp = partition(p, ucell);
    CHECK(mp.nu1 + mp.nu2 == doctest::Approx(1.0).epsilon(1e-10));

    Rng rng(23);
    const int n = 200000;
    int n1 = 0, n2 = 0;
    double sum1 = 0.0, sum2 = 0.0;
    for (int i = 0; i < n; ++i) {
        InsureeType ty{rng.uniform(0.5, 1.5), rng.uniform(0.5, 1.5)};
        double th_f = frontier_theta(p, ty.a, ucell);
        if (ty.theta <= th_f) {
            ++n1;
            sum1 += ty.theta;
        } else {
            ++n2;
            sum2 += ty.theta;
        }
    }
    CHECK(mp.nu1 == doctest::Approx(static_cast<double>(n1) / n).epsilon(0.01));
    CHECK(mp.eth1 == doctest::Approx(sum1 / n1).epsilon(0.01));
    CHECK(mp.eth2 == doctest::Approx(sum2 / n2).epsilon(0.01));
    // the certainty-equivalent argmax reproduces the frontier split for
    // participating types
    int agree = 0, checked = 0;
    Rng rng2(29);
    for (int i = 0; i < 20000; ++i) {
        InsureeType ty{rng2.uniform(0.5, 1.5), rng2.uniform(0.5, 1.5)};
        int pick = choose_contract(ty, p, ucell);
        if (pick == 0) continue;
        ++checked;
        double th_f = frontier_theta(p, ty.a, ucell);
        if ((pick == 1) == (ty.theta <= th_f)) ++agree;
    }
    CHECK(checked > 8000);
    CHECK(static_cast<double>(agree) / checked > 0.999);
}

TEST_CASE("optimal menu on the uniform design") {
    const PairSolution& sol = solved();
    // the optimum degenerates: contract 1 is the null contract
    CHECK(sol.corner);
    CHECK(sol.menu.t1 == doctest::Approx(0.0));
    CHECK(sol.menu.dd1 == doctest::Approx(1.0));
    CHECK(sol.menu.t2 == doctest::Approx(0.623770).epsilon(5e-4));
    CHECK(sol.menu.dd2 == doctest::Approx(0.153463).epsilon(5e-3));
    CHECK(sol.split.nu1 == doctest::Approx(0.6116).epsilon(2e-3));
    CHECK(sol.profit == doctest::Approx(0.0647256).epsilon(1e-3));
    CHECK(sol.rho == doctest::Approx(1.0).epsilon(1e-2));
}

TEST_CASE("first-order conditions hold at the solved menu") {
    const PairSolution& sol = solved();
    CHECK(sol.residuals.max_abs() < 1e-8);
    // the degenerate contract-1 conditions hold identically at the corner
    CHECK(std::abs(sol.residuals.e_dd1) < 1e-14);
    CHECK(std::abs(sol.residuals.e_ir) < 1e-14);
}

TEST_CASE("solved menu is a local profit maximum") {
    const PairSolution& sol = solved();
    double base = sol.profit;
    double eps = 1e-3;
    auto profit_at = [&](double d1, double t2, double d2) {
        ContractPair p{ir_premium(d1, ucell), d1, t2, d2};
        return expected_profit_pair(p, ucell, 2001);
    };
    // feasible perturbations never beat the solved menu
    CHECK(profit_at(1.0, sol.menu.t2 + eps, sol.menu.dd2) < base + 1e-10);
    CHECK(profit_at(1.0, sol.menu.t2 - eps, sol.menu.dd2) < base + 1e-10);
    CHECK(profit_at(1.0, sol.menu.t2, sol.menu.dd2 + eps) < base + 1e-10);
    CHECK(profit_at(1.0, sol.menu.t2, sol.menu.dd2 - eps) < base + 1e-10);
    CHECK(profit_at(1.0 - eps, sol.menu.t2, sol.menu.dd2) < base + 1e-10);
}

TEST_CASE("monte carlo profit agrees with the quadrature value") {
    const PairSolution& sol = solved();
    Rng rng(31);
    const int n = 100000;
    double tot = 0.0, tot2 = 0.0;
    double pay2 = expected_payment(ucell.damage, sol.menu.dd2);
    for (int i = 0; i < n; ++i) {
        InsureeType ty{rng.uniform(0.5, 1.5), rng.uniform(0.5, 1.5)};
        int pick = choose_contract(ty, sol.menu, ucell);
        double v = 0.0;
        if (pick == 2) v = sol.menu.t2 - ty.theta * pay2;
        tot += v;
        tot2 += v * v;
    }
    double mean = tot / n;
    double se = std::sqrt((tot2 / n - mean * mean) / n);
    CHECK(std::abs(mean - sol.profit) < 3.0 * se);
}

TEST_CASE("partition is invariant to density rescaling and grid refinement") {
    ContractPair p{0.1, 0.7, 0.5, 0.2};
    MenuPartition base = partition(p, ucell, 2001);
    // doubling the density and renormalizing is a no-op
    Cell scaled = ucell;
    for (auto& row : scaled.f)
        for (double& v : row) v *= 2.0;
    double mass = scaled.f_mass();
    for (auto& row : scaled.f)
        for (double& v : row) v /= mass;
    MenuPartition b = partition(p, scaled, 2001);
    CHECK(b.nu1 == doctest::Approx(base.nu1).epsilon(1e-12));
    CHECK(b.eth1 == doctest::Approx(base.eth1).epsilon(1e-12));
    // refining the quadrature barely moves the answer
    MenuPartition fine = partition(p, ucell, 4001);
    CHECK(fine.nu1 == doctest::Approx(base.nu1).epsilon(1e-7));
    CHECK(fine.eth2 == doctest::Approx(base.eth2).epsilon(1e-7));
}

TEST_CASE("menu validation rejects malformed pairs") {
    CHECK_THROWS_AS(partition({0.1, 0.2, 0.5, 0.7}, ucell), std::domain_error);
    CHECK_THROWS_AS(partition({0.5, 0.7, 0.1, 0.2}, ucell), std::domain_error);
    CHECK_THROWS_AS(partition({0.1, 1.4, 0.5, 0.2}, ucell), std::domain_error);
}
