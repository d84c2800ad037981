#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>

#include "screenlab/designs.hpp"
#include "screenlab/io.hpp"
#include "screenlab/population.hpp"

using namespace screenlab;

static const Primitives uprim = make_u_design();
static const Cell& ucell = uprim.cell();

static const FiniteMenuOffer& offer() {
    static FiniteMenuOffer off = [] {
        PairSolution sol = solve_pair(ucell);
        return FiniteMenuOffer{sol.menu, 0.0, 0.0, 1};
    }();
    return off;
}

static MenuSystem finite_menu() { return MenuSystem{{}, {offer()}}; }

TEST_CASE("scenario case numbering round trips") {
    for (int k = 1; k <= 4; ++k) CHECK(scenario_from_case(k).case_number() == k);
    CHECK_THROWS_AS(scenario_from_case(5), std::domain_error);
    CHECK(scenario_from_case(2).menu_kind == MenuKind::continuum);
    CHECK(scenario_from_case(2).damage_obs == DamageObs::truncated);
    CHECK(scenario_from_case(3).menu_kind == MenuKind::finite);
}

TEST_CASE("claim filtering") {
    std::vector<double> d = {0.1, 0.6, 0.3, 0.9};
    auto [jf, full] = filter_claims(d, 0.5, DamageObs::full);
    CHECK(jf == 4);
    CHECK(full == d);
    auto [jt, trunc] = filter_claims(d, 0.5, DamageObs::truncated);
    CHECK(jt == 2);
    CHECK(trunc == std::vector<double>{0.6, 0.9});
    CHECK(filter_claims(d, 0.0, DamageObs::truncated).first == 4);
    CHECK(filter_claims(d, 1.0, DamageObs::truncated).first == 0);

    // thinning rate: uniform damages and dd=0.5 report half the accidents
    Rng rng(5);
    int total = 0, kept = 0;
    auto H = uniform_distribution(0.0, 1.0);
    for (int i = 0; i < 20000; ++i) {
        int j = draw_accidents(1.0, rng);
        std::vector<double> dm(static_cast<std::size_t>(j));
        for (auto& v : dm) v = rng.sample(H);
        total += j;
        kept += filter_claims(dm, 0.5, DamageObs::truncated).first;
    }
    double frac = static_cast<double>(kept) / total;
    double se = std::sqrt(0.25 / total);
    CHECK(std::abs(frac - 0.5) < 3.0 * se);
}

TEST_CASE("accident counts are Poisson") {
    Rng rng(7);
    const int n = 200000;
    double sum = 0.0, sum2 = 0.0;
    int zeros = 0;
    for (int i = 0; i < n; ++i) {
        int j = draw_accidents(1.0, rng);
        sum += j;
        sum2 += static_cast<double>(j) * j;
        if (j == 0) ++zeros;
    }
    double mean = sum / n, var = sum2 / n - mean * mean;
    CHECK(mean == doctest::Approx(1.0).epsilon(0.01));
    CHECK(var == doctest::Approx(1.0).epsilon(0.02));
    CHECK(static_cast<double>(zeros) / n == doctest::Approx(std::exp(-1.0)).epsilon(0.02));
    CHECK_THROWS_AS(draw_accidents(0.0, rng), std::domain_error);
}

TEST_CASE("type sampler matches the uniform design") {
    CellSampler smp(ucell);
    Rng rng(13);
    const int n = 100000;
    double sum_th = 0.0, sum_a = 0.0, cross = 0.0;
    int th_low = 0;
    for (int i = 0; i < n; ++i) {
        InsureeType ty = smp.draw(rng);
        CHECK(ty.theta >= 0.5);
        CHECK(ty.theta <= 1.5);
        CHECK(ty.a >= 0.5);
        CHECK(ty.a <= 1.5);
        sum_th += ty.theta;
        sum_a += ty.a;
        cross += (ty.theta - 1.0) * (ty.a - 1.0);
        if (ty.theta < 1.0) ++th_low;
    }
    double sig = std::sqrt(1.0 / 12.0);
    CHECK(std::abs(sum_th / n - 1.0) < 3.0 * sig / std::sqrt(n));
    CHECK(std::abs(sum_a / n - 1.0) < 3.0 * sig / std::sqrt(n));
    CHECK(std::abs(cross / n) < 0.002);  // independent coordinates
    CHECK(static_cast<double>(th_low) / n == doctest::Approx(0.5).epsilon(0.02));
}

TEST_CASE("simulation is deterministic in the seed") {
    Scenario sc{MenuKind::finite, DamageObs::truncated};
    MenuSystem menu = finite_menu();
    auto a = simulate(uprim, sc, menu, 500, 99);
    auto b = simulate(uprim, sc, menu, 500, 99);
    auto c = simulate(uprim, sc, menu, 500, 100);
    REQUIRE(a.size() == b.size());
    bool same = true, diff = false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        same = same && a[i].type.theta == b[i].type.theta && a[i].chi == b[i].chi
             && a[i].damages == b[i].damages;
        diff = diff || a[i].type.theta != c[i].type.theta;
    }
    CHECK(same);
    CHECK(diff);
}

TEST_CASE("finite-menu shares match the partition") {
    Scenario sc{MenuKind::finite, DamageObs::truncated};
    auto recs = simulate(uprim, sc, finite_menu(), 100000, 17);
    int n1 = 0, n0 = 0;
    for (const auto& r : recs) {
        if (r.chi == 1) ++n1;
        if (r.chi == 0) ++n0;
    }
    MenuPartition mp = partition(offer().base, ucell);
    CHECK(n0 == 0);  // the null contract absorbs non-participants
    CHECK(static_cast<double>(n1) / recs.size() == doctest::Approx(mp.nu1).epsilon(0.008));
}

TEST_CASE("thinning identity on simulated data") {
    MenuSystem menu = finite_menu();
    auto full = simulate(uprim, {MenuKind::finite, DamageObs::full}, menu, 60000, 21);
    auto trunc = simulate(uprim, {MenuKind::finite, DamageObs::truncated}, menu, 60000, 21);
    // same seed, same latent accidents
    double sj = 0.0, sjs = 0.0, sjs2 = 0.0;
    int n2 = 0;
    for (std::size_t i = 0; i < full.size(); ++i) {
        CHECK(full[i].j_star == full[i].j_true);
        if (full[i].chi != 2) continue;
        ++n2;
        sj += full[i].j_true;
        sjs += trunc[i].j_star;
        sjs2 += static_cast<double>(trunc[i].j_star) * trunc[i].j_star;
        for (double d : trunc[i].damages) CHECK(d > trunc[i].dd);
    }
    double dd2 = offer().base.dd2;
    double surv = 1.0 - ucell.damage.cdf(dd2);
    double mean = sjs / n2;
    double se = std::sqrt((sjs2 / n2 - mean * mean) / n2);
    CHECK(std::abs(mean - surv * sj / n2) < 3.0 * se);
}

TEST_CASE("reported damages are independent of the latent type") {
    Scenario sc{MenuKind::finite, DamageObs::truncated};
    auto recs = simulate(uprim, sc, finite_menu(), 80000, 33);
    // correlation between theta and the first reported damage within chi=2
    double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
    int n = 0;
    for (const auto& r : recs) {
        if (r.chi != 2 || r.damages.empty()) continue;
        double x = r.type.theta, y = r.damages.front();
        ++n;
        sx += x; sy += y; sxx += x * x; syy += y * y; sxy += x * y;
    }
    double corr = (sxy / n - sx / n * sy / n)
                / std::sqrt((sxx / n - sx / n * sx / n) * (syy / n - sy / n * sy / n));
    CHECK(n > 10000);
    CHECK(std::abs(corr) < 0.02);
}

TEST_CASE("continuum assignment follows the schedule") {
    static ScheduleContinuum sch = solve_schedule(ucell, 8193);
    MenuSystem menu{{sch}, {}};
    Scenario sc{MenuKind::continuum, DamageObs::full};
    auto recs = simulate(uprim, sc, menu, 20000, 41);
    int excluded = 0;
    for (const auto& r : recs) {
        double s = ce_no_insurance(r.type, ucell);
        if (s > sch.s_top) {
            ++excluded;
            CHECK(r.chi == 0);
            CHECK(r.t == 0.0);
        } else {
            CHECK(r.chi == 1);
            CHECK(r.t == doctest::Approx(sch.t_at(s)).epsilon(1e-12));
            CHECK(r.dd == doctest::Approx(sch.dd_at(s)).epsilon(1e-12));
        }
    }
    // the excluded share equals the CE mass above the participation cutoff
    double pex = 1.0 - sch.ce.K_at(sch.s_top);
    CHECK(static_cast<double>(excluded) / recs.size() == doctest::Approx(pex).epsilon(0.05));
}

TEST_CASE("dataset files round trip exactly") {
    Scenario sc{MenuKind::finite, DamageObs::truncated};
    FiniteMenuOffer off = offer();
    off.z_lo = -0.2;
    off.z_hi = 0.2;
    off.z_nodes = 5;
    auto recs = simulate(uprim, sc, MenuSystem{{}, {off}}, 2000, 55);
    DatasetManifest man;
    man.seed = 55;
    man.n = recs.size();
    man.scenario_case = sc.case_number();
    man.menu_kind = menu_kind_name(sc.menu_kind);
    man.damage_obs = damage_obs_name(sc.damage_obs);
    man.primitive_fingerprint = fingerprint(uprim);
    man.z_lo = off.z_lo;
    man.z_hi = off.z_hi;
    man.z_nodes = off.z_nodes;
    std::string path = "tmp_dataset.csv";
    write_dataset(recs, path, man);
    auto back = read_dataset(path);
    REQUIRE(back.size() == recs.size());
    bool all = true;
    for (std::size_t i = 0; i < recs.size(); ++i) {
        all = all && back[i].id == recs[i].id && back[i].x_cell == recs[i].x_cell
           && back[i].z == recs[i].z && back[i].chi == recs[i].chi && back[i].t == recs[i].t
           && back[i].dd == recs[i].dd && back[i].j_star == recs[i].j_star
           && back[i].damages == recs[i].damages;
    }
    CHECK(all);
    DatasetManifest m2 = read_manifest(path);
    CHECK(m2.seed == man.seed);
    CHECK(m2.scenario_case == 4);
    CHECK(m2.primitive_fingerprint == fingerprint(uprim));
    CHECK(m2.z_nodes == 5);
    std::remove(path.c_str());
    std::remove((path + ".manifest.json").c_str());

    // the z shifter actually moves the premium gap
    bool zmoves = false;
    for (const auto& r : recs)
        if (r.chi == 2 && std::abs(r.t - off.base.t2) > 1e-9) zmoves = true;
    CHECK(zmoves);
}
