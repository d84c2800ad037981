#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "screenlab/continuum.hpp"
#include "screenlab/finite.hpp"
#include "screenlab/model.hpp"
#include "screenlab/rng.hpp"

namespace screenlab {

enum class MenuKind { continuum, finite };
enum class DamageObs { full, truncated };

// The four data scenarios: what menu generated the data and whether all
// accident damages or only above-deductible claims are recorded.
struct Scenario {
    MenuKind menu_kind = MenuKind::continuum;
    DamageObs damage_obs = DamageObs::full;

    int case_number() const {
        return (menu_kind == MenuKind::continuum ? 1 : 3)
             + (damage_obs == DamageObs::truncated ? 1 : 0);
    }
};

inline Scenario scenario_from_case(int k) {
    switch (k) {
        case 1: return {MenuKind::continuum, DamageObs::full};
        case 2: return {MenuKind::continuum, DamageObs::truncated};
        case 3: return {MenuKind::finite, DamageObs::full};
        case 4: return {MenuKind::finite, DamageObs::truncated};
    }
    throw std::domain_error("scenario_from_case: case must be 1..4");
}

inline std::string menu_kind_name(MenuKind m) {
    return m == MenuKind::continuum ? "continuum" : "finite";
}
inline std::string damage_obs_name(DamageObs d) {
    return d == DamageObs::full ? "full" : "truncated";
}

// A two-contract offer whose premium gap is scaled by an exogenous shifter
// z observed in the data: t2(z) - t1 = (1+z) * (t2 - t1).
struct FiniteMenuOffer {
    ContractPair base;
    double z_lo = 0.0, z_hi = 0.0;
    std::size_t z_nodes = 1;

    std::vector<double> z_grid() const {
        if (z_nodes <= 1) return {0.5 * (z_lo + z_hi)};
        return linspace(z_lo, z_hi, z_nodes);
    }

    ContractPair at(double z) const {
        ContractPair p = base;
        p.t2 = base.t1 + (base.t2 - base.t1) * (1.0 + z);
        return p;
    }
};

struct ObservationRecord {
    std::uint64_t id = 0;
    int x_cell = 0;
    double z = 0.0;
    int chi = 0;  // 0 = uninsured, otherwise contract index
    double t = 0.0, dd = 0.0;
    int j_star = 0;
    std::vector<double> damages;  // reported damages

    // latent bookkeeping, never part of the observable file
    int j_true = 0;
    std::vector<double> damages_true;
    InsureeType type{0.0, 0.0};
};

// ---- type sampling ----

// Inverse-CDF sampler for a bilinear cell density: theta from its marginal,
// then a from the conditional slice.
struct CellSampler {
    const Cell* cell = nullptr;
    GridDistribution th_marg;

    explicit CellSampler(const Cell& c) : cell(&c) {
        std::vector<double> md(c.th_grid.size());
        for (std::size_t i = 0; i < c.th_grid.size(); ++i)
            md[i] = trapezoid(c.a_grid, c.f[i]);
        th_marg = detail_cdf(c.th_grid, md);
    }

    InsureeType draw(Rng& rng) const {
        double th = th_marg.quantile(rng.uniform());
        std::vector<double> fa(cell->a_grid.size());
        for (std::size_t j = 0; j < fa.size(); ++j) fa[j] = cell->f_at(th, cell->a_grid[j]);
        GridDistribution cond = detail_cdf(cell->a_grid, fa);
        return {th, cond.quantile(rng.uniform())};
    }

    static GridDistribution detail_cdf(const std::vector<double>& x,
                                       const std::vector<double>& dens) {
        GridDistribution g;
        g.x = x;
        g.F.resize(x.size(), 0.0);
        for (std::size_t i = 1; i < x.size(); ++i)
            g.F[i] = g.F[i - 1] + 0.5 * (dens[i] + dens[i - 1]) * (x[i] - x[i - 1]);
        double tot = g.F.back();
        if (tot <= 0.0) throw std::domain_error("CellSampler: density has no mass");
        for (double& v : g.F) v /= tot;
        g.F.back() = 1.0;
        return g;
    }
};

inline int draw_accidents(double theta, Rng& rng) {
    if (theta <= 0.0) throw std::domain_error("draw_accidents: theta must be positive");
    return rng.poisson(theta);
}

// Keep all damages under full observation; under truncation a damage is
// reported only when it exceeds the deductible, so the reported count is
// a Binomial(J, 1 - H(dd)) thinning of the accident count.
inline std::pair<int, std::vector<double>> filter_claims(const std::vector<double>& damages,
                                                         double dd, DamageObs obs) {
    if (obs == DamageObs::full) return {static_cast<int>(damages.size()), damages};
    std::vector<double> kept;
    for (double d : damages)
        if (d > dd) kept.push_back(d);
    return {static_cast<int>(kept.size()), kept};
}

// Menus offered in each covariate cell.
struct MenuSystem {
    std::vector<ScheduleContinuum> schedules;  // continuum scenarios
    std::vector<FiniteMenuOffer> offers;       // finite scenarios
};

inline std::vector<ObservationRecord> simulate(const Primitives& prim, const Scenario& sc,
                                               const MenuSystem& menu, std::size_t n,
                                               std::uint64_t seed) {
    if (n < 1) throw std::domain_error("simulate: need at least one record");
    std::size_t ncell = prim.cells.size();
    bool cont = sc.menu_kind == MenuKind::continuum;
    if ((cont && menu.schedules.size() != ncell) || (!cont && menu.offers.size() != ncell))
        throw std::domain_error("simulate: one menu per covariate cell required");
    std::vector<CellSampler> samplers;
    samplers.reserve(ncell);
    for (const auto& c : prim.cells) samplers.emplace_back(c);

    std::vector<ObservationRecord> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        Rng rng(seed, i + 1);
        ObservationRecord& r = out[i];
        r.id = i;
        r.x_cell = ncell == 1 ? 0
                              : std::min<int>(static_cast<int>(rng.uniform() * ncell),
                                              static_cast<int>(ncell) - 1);
        const Cell& c = prim.cells[static_cast<std::size_t>(r.x_cell)];
        r.type = samplers[static_cast<std::size_t>(r.x_cell)].draw(rng);

        if (cont) {
            const ScheduleContinuum& sch = menu.schedules[static_cast<std::size_t>(r.x_cell)];
            double s = ce_no_insurance(r.type, c);
            if (s <= sch.s_top) {
                r.chi = 1;
                r.t = sch.t_at(s);
                r.dd = sch.dd_at(s);
            } else {
                r.chi = 0;
                r.t = 0.0;
                r.dd = c.dbar();
            }
        } else {
            const FiniteMenuOffer& off = menu.offers[static_cast<std::size_t>(r.x_cell)];
            auto zg = off.z_grid();
            std::size_t zi = 0;
            if (zg.size() > 1)
                zi = std::min<std::size_t>(static_cast<std::size_t>(rng.uniform() * zg.size()),
                                           zg.size() - 1);
            r.z = zg[zi];
            ContractPair p = off.at(r.z);
            r.chi = choose_contract(r.type, p, c);
            if (r.chi == 1) { r.t = p.t1; r.dd = p.dd1; }
            else if (r.chi == 2) { r.t = p.t2; r.dd = p.dd2; }
            else { r.t = 0.0; r.dd = c.dbar(); }
        }

        r.j_true = draw_accidents(r.type.theta, rng);
        r.damages_true.resize(static_cast<std::size_t>(r.j_true));
        for (auto& d : r.damages_true) d = rng.sample(c.damage);
        auto [js, rep] = filter_claims(r.damages_true, r.dd, sc.damage_obs);
        r.j_star = js;
        r.damages = std::move(rep);
    }
    return out;
}

}  // namespace screenlab
