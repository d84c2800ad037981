#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "screenlab/designs.hpp"
#include "screenlab/ident_continuum.hpp"

using namespace screenlab;

static const Primitives uprim = make_u_design();
static const Cell& ucell = uprim.cell();

static const ScheduleContinuum& solved() {
    static ScheduleContinuum sc = solve_schedule(ucell);
    return sc;
}

TEST_CASE("risk aversion and certainty equivalent recovered from the curves") {
    const auto& sc = solved();
    DeductibleCurves cur = curves_from_schedule(sc, ucell.wealth);
    RecoveredSchedule rec = recover_schedule(cur, ucell.damage);
    REQUIRE(rec.dd.size() == cur.dd.size());
    double worst_a = 0.0, worst_s = 0.0;
    for (std::size_t i = 0; i < rec.dd.size(); ++i) {
        double s_true = 0.0;
        {  // invert the forward schedule at this deductible
            auto it = std::upper_bound(sc.dd.begin(), sc.dd.end(), rec.dd[i]);
            std::size_t j = static_cast<std::size_t>(it - sc.dd.begin()) - 1;
            double w = (rec.dd[i] - sc.dd[j]) / (sc.dd[j + 1] - sc.dd[j]);
            s_true = sc.s[j] * (1.0 - w) + sc.s[j + 1] * w;
        }
        double a_true = sc.a_at(s_true);
        worst_a = std::max(worst_a, std::abs(rec.a[i] - a_true) / a_true);
        worst_s = std::max(worst_s,
                           std::abs(rec.s[i] - s_true) / (ucell.wealth - s_true));
        CHECK(rec.a[i] > 0.0);
    }
    CHECK(worst_a < 0.01);
    CHECK(worst_s < 0.01);
    // recovered s increases in dd as the menu requires
    for (std::size_t i = 1; i < rec.s.size(); ++i) CHECK(rec.s[i] > rec.s[i - 1]);
}

TEST_CASE("CE distribution recovered within a percent") {
    const auto& sc = solved();
    DeductibleCurves cur = curves_from_schedule(sc, ucell.wealth);
    RecoveredSchedule rec = recover_schedule(cur, ucell.damage);
    double sup = 0.0;
    for (std::size_t i = 0; i < rec.s.size(); ++i)
        sup = std::max(sup, std::abs(rec.K[i] - sc.ce.K_at(rec.s[i])));
    CHECK(sup < 1e-2);
    CHECK(rec.K.front() < 0.05);
    CHECK(std::abs(rec.K.back() - rec.insured_mass) < 0.05);
}

TEST_CASE("conditional theta moments match direct quadrature") {
    PsiTable pt(ucell);
    double s = 9.0;
    auto mu = conditional_theta_moments(s, ucell, pt, 4);
    CHECK(mu[0] == doctest::Approx(1.0));
    // brute-force check by integrating over the rectangle in a thin s-slab
    double ds = 1e-4;
    double m0 = 0.0, m1 = 0.0, m2 = 0.0;
    auto ths = linspace(ucell.th_lo, ucell.th_hi, 2001);
    for (double th : ths) {
        for (double a : linspace(ucell.a_lo, ucell.a_hi, 2001)) {
            double sv = ucell.wealth - th * psi(a, ucell.damage);
            if (std::abs(sv - s) > 0.5 * ds) continue;
            double f = ucell.f_at(th, a);
            m0 += f;
            m1 += th * f;
            m2 += th * th * f;
        }
    }
    REQUIRE(m0 > 0.0);
    CHECK(mu[1] == doctest::Approx(m1 / m0).epsilon(2e-3));
    CHECK(mu[2] == doctest::Approx(m2 / m0).epsilon(4e-3));
    // theta support at this level
    auto [lo, hi] = theta_support_at(s, ucell.wealth, ucell.th_lo, ucell.th_hi,
                                     ucell.a_lo, ucell.a_hi, ucell.damage);
    CHECK(lo >= ucell.th_lo);
    CHECK(hi <= ucell.th_hi);
    CHECK(mu[1] > lo);
    CHECK(mu[1] < hi);
}

TEST_CASE("functional round trip recovers the joint type density") {
    const auto& sc = solved();
    ContinuumIdentification est =
        identify_continuum_functional(sc, ucell, ucell.damage);
    CHECK(l1_joint_error(est, ucell, sc.s_top) < 0.05);
    // mass on the identified region approximates the participating share
    CHECK(est.joint_mass() == doctest::Approx(sc.ce.K_at(sc.s_top)).epsilon(0.05));
}

TEST_CASE("product-limit damage recovery from truncated claims") {
    const auto& sc = solved();
    MenuSystem menu{{sc}, {}};
    Scenario scen{MenuKind::continuum, DamageObs::truncated};
    auto recs = simulate(uprim, scen, menu, 600000, 71);
    std::size_t claims = 0;
    for (const auto& r : recs) claims += r.damages.size();
    CHECK(claims > 100000);
    GridDistribution Hhat = recover_H_case2(recs, linspace(0.0, 1.0, 201));
    double ks = 0.0;
    for (double d : linspace(0.01, 0.99, 99))
        ks = std::max(ks, std::abs(Hhat.cdf(d) - d));
    CHECK(ks < 0.01);
    // damaged data with no low-deductible records is declared unidentified
    std::vector<ObservationRecord> gap;
    for (const auto& r : recs)
        if (r.dd > 0.3) gap.push_back(r);
    CHECK_THROWS_AS(recover_H_case2(gap, linspace(0.0, 1.0, 201)), std::domain_error);
}

TEST_CASE("sampled pipelines: truncated case tracks the full-observation case") {
    const auto& sc = solved();
    MenuSystem menu{{sc}, {}};
    const std::size_t n = 400000;
    auto full = simulate(uprim, {MenuKind::continuum, DamageObs::full}, menu, n, 77);
    auto trunc = simulate(uprim, {MenuKind::continuum, DamageObs::truncated}, menu, n, 77);

    ContinuumIdentification c1 =
        identify_continuum_sampled(full, ucell.damage, ucell, DamageObs::full);
    GridDistribution Hhat = recover_H_case2(trunc, linspace(0.0, 1.0, 201));
    ContinuumIdentification c2 =
        identify_continuum_sampled(trunc, Hhat, ucell, DamageObs::truncated);

    double e1 = l1_joint_error(c1, ucell, sc.s_top);
    double e2 = l1_joint_error(c2, ucell, sc.s_top);
    CHECK(e1 < 0.30);
    CHECK(e2 < 2.0 * e1 + 0.05);
}
