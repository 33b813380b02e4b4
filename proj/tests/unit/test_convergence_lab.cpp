#include "gen.hpp"

#include "stifflab/convergence_lab.hpp"
#include "stifflab/errors.hpp"
#include "stifflab/snapping_mc.hpp"

#include <doctest.h>

#include <cmath>

using namespace stifflab;

namespace {

SweepSpec lejay_sweep(double alpha_exponent, double kappa = 1.0)
{
    SweepSpec s;
    s.base = Scenario::brownian(phase::Continuous{}, 5.0, 0.01);
    s.barrier = BarrierFamily::lejay(kappa, alpha_exponent);
    s.probes = {probes::gauss(), probes::odd_exp()};
    s.alphas = {1.0};
    return s;
}

const SweepVerdict& verdict_for(const SweepReport& r, const std::string& id)
{
    for (const auto& v : r.verdicts)
        if (v.f_id == id)
            return v;
    FAIL("no verdict for " << id);
    return r.verdicts.front();
}

} // namespace

TEST_CASE("Lejay family: limits and total resistances")
{
    CHECK(BarrierFamily::lejay(1.0, -1.0).limit_gamma_bar() == doctest::Approx(2.0));
    CHECK(BarrierFamily::lejay(3.0, -1.0).limit_gamma_bar() == doctest::Approx(2.0 / 3.0));
    CHECK(BarrierFamily::lejay(1.0, 0.0).limit_gamma_bar() == 0.0);
    CHECK(std::isinf(BarrierFamily::lejay(1.0, -2.0).limit_gamma_bar()));
    auto f = BarrierFamily::lejay(1.0, 0.0);
    for (double eps : {0.2, 0.1, 0.05})
        CHECK(f.gamma_bar(eps) == doctest::Approx(2.0 * eps));
    CHECK(f.make(0.1).total_resistance() == doctest::Approx(f.gamma_bar(0.1)));
}

TEST_CASE("semi-permeable sweep converges to the snapping form")
{
    SweepReport r = run_phase_sweep(lejay_sweep(-1.0));
    CHECK(r.target_gamma_bar == doctest::Approx(2.0));
    CHECK(r.target_phase.find("snapping") == 0);
    const auto& v = verdict_for(r, "gauss");
    CHECK(v.decreasing);
    CHECK(v.final_error < 1e-2);
    CHECK(r.pass());
    CHECK(r.rows.size() == 7 * 2);
    for (const auto& row : r.rows) {
        CHECK(row.gamma_bar_n == doctest::Approx(2.0));
        CHECK(row.box_L == 5.0);
        CHECK(row.grid_h == doctest::Approx(0.01));
    }
}

TEST_CASE("constant-density barrier goes to the continuous phase")
{
    SweepReport r = run_phase_sweep(lejay_sweep(0.0));
    CHECK(r.target_phase == "continuous");
    for (const auto& row : r.rows)
        CHECK(row.gamma_bar_n == doctest::Approx(2.0 * row.eps));
    CHECK(r.pass());
}

TEST_CASE("steep barrier goes to the separate phase and mass stops crossing")
{
    SweepSpec s = lejay_sweep(-2.0);
    s.probes = {probes::plus_side()};
    SweepReport r = run_phase_sweep(s);
    CHECK(r.target_phase == "separate");
    CHECK(r.pass());

    const Grid G = base_doubled_grid(s.base);
    const DiscreteForm metric = assemble(Scenario::brownian(phase::Separate{}, 5.0, 0.01), G);
    double prev = INFINITY;
    for (int n = 0; n <= 6; ++n) {
        DiscreteForm form = assemble_barrier_form(s.base, s.barrier.make(s.eps(n)));
        auto u = resolvent(form, 1.0, sample_for(form, probes::plus_side().f)).solution;
        auto v = to_doubled_view(form, u, G);
        double minus_mass = 0.0;
        for (std::size_t i = 0; i < G.size(); ++i)
            if (G.side(i) == Side::Minus)
                minus_mass += metric.mass()[i] * v[i];
        CHECK(minus_mass < prev);
        prev = minus_mass;
    }
}

TEST_CASE("sweep refuses an unresolved barrier")
{
    SweepSpec s = lejay_sweep(-1.0);
    s.base.grid.barrier_cells = 4;
    CHECK_THROWS_AS(run_phase_sweep(s), ParameterError);
    try {
        run_phase_sweep(s);
    } catch (const ParameterError& e) {
        CHECK(std::string(e.what()).find("8 cells") != std::string::npos);
    }
}

TEST_CASE("transport maps the doubled grid onto the shifted nodes")
{
    Scenario base = Scenario::brownian(phase::Continuous{}, 1.0, 0.25);
    Grid G = base_doubled_grid(base);
    Grid E = Grid::barrier_grid(G, 0.1, 16);
    auto idx = transport_indices(G, E);
    REQUIRE(idx.size() == G.size());
    for (std::size_t i = 0; i < G.size(); ++i) {
        double expect = G.side(i) == Side::Minus ? G[i] - 0.1 : G[i] + 0.1;
        CHECK(E[idx[i]] == doctest::Approx(expect).epsilon(1e-14));
    }
}

TEST_CASE("phase trichotomy: the three limits genuinely differ")
{
    Scenario base = Scenario::brownian(phase::Continuous{}, 5.0, 0.01);
    const Grid G = base_doubled_grid(base);
    const DiscreteForm metric = assemble(Scenario::brownian(phase::Separate{}, 5.0, 0.01), G);
    std::vector<std::vector<double>> sols;
    for (double gb : {kInfinity, 2.0, 0.0}) {
        DiscreteForm f = assemble_limit(base, gb);
        auto u = resolvent(f, 1.0, sample_for(f, probes::odd_exp().f)).solution;
        sols.push_back(to_doubled_view(f, u, G));
    }
    CHECK(l2_distance(metric, sols[0], sols[1]) > 0.05);
    CHECK(l2_distance(metric, sols[1], sols[2]) > 0.05);
    CHECK(l2_distance(metric, sols[0], sols[2]) > 0.05);
}

TEST_CASE("resolvent identity: exact at the discrete level")
{
    Scenario sc = Scenario::brownian(phase::Separate{}, 5.0, 0.01);
    auto r = check_resolvent_identity(sc, 2.0, 1.0, probes::gauss().f);
    CHECK(r.max_abs_error < 1e-9);
    CHECK(r.denominator > 0.0);
    CHECK(r.denominator < 1.0);
    CHECK(r.uam_gap < 1e-10);

    auto zero = check_resolvent_identity(sc, 2.0, 1.0, probes::constant(0.0).f);
    CHECK(zero.max_abs_error == 0.0);

    auto r2 = check_resolvent_identity(Scenario::brownian(phase::Separate{}, 5.0, 0.0025), 2.0, 1.0, probes::gauss().f);
    CHECK(r2.max_abs_error < 1e-9);
    CHECK(r2.uam_gap < 1e-10);

    gen::Rng rng(91);
    for (int t = 0; t < 20; ++t) {
        double kappa = rng.uniform(0.05, 50.0), alpha = rng.uniform(0.05, 10.0);
        Scenario s = sc;
        s.resistance = MeasureSpec::from_conductivity(Conductivity::power_cusp(rng.uniform(0.1, 0.9)));
        auto c = check_resolvent_identity(s, kappa, alpha, probes::odd_exp().f, probes::indicator(-1.0, 0.5).f);
        CHECK(c.max_abs_error < 1e-9);
        CHECK(c.uam_gap < 1e-10);
    }
}

TEST_CASE("gamma continuity")
{
    Scenario base = Scenario::brownian(phase::Continuous{}, 5.0, 0.01);
    std::vector<double> constant(5, 1.3);
    for (const auto& row : run_gamma_continuity(base, constant, 1.3, 1.0, probes::odd_exp().f))
        CHECK(row.l2_error == 0.0);

    std::vector<double> seq;
    for (int l = 0; l <= 6; ++l)
        seq.push_back(1.0 + std::ldexp(1.0, -l));
    auto rows = run_gamma_continuity(base, seq, 1.0, 1.0, probes::odd_exp().f);
    for (std::size_t l = 1; l < rows.size(); ++l) {
        double ratio = rows[l].l2_error / rows[l - 1].l2_error;
        CHECK(ratio > 0.3);
        CHECK(ratio < 0.7);
    }

    std::vector<double> up;
    for (int l = 0; l <= 8; ++l)
        up.push_back(std::ldexp(1.0, l));
    auto grow = run_gamma_continuity(base, up, kInfinity, 1.0, probes::odd_exp().f);
    const double sep_jump = run_gamma_continuity(base, {1e12}, kInfinity, 1.0, probes::odd_exp().f)[0].jump;
    for (std::size_t l = 1; l < grow.size(); ++l) {
        CHECK(std::abs(grow[l].jump) > std::abs(grow[l - 1].jump));
        CHECK(std::abs(grow[l].jump) < std::abs(sep_jump) + 1e-9);
    }
    CHECK(std::abs(grow.back().jump - sep_jump) < 0.05 * std::abs(sep_jump));
}

TEST_CASE("two-time functionals")
{
    SweepSpec s = lejay_sweep(-1.0);
    s.base.grid.h = 0.02;
    auto h = probes::gaussian(0.0, 0.25).f;
    CHECK_THROWS_AS(run_fdd_check(s, 0.5, 0.5, probes::gauss().f, probes::gauss().f, h), ArgumentError);
    CHECK_THROWS_AS(run_fdd_check(s, 0.5, 0.2, probes::gauss().f, probes::gauss().f, h), ArgumentError);

    // f2 = 1 collapses to the one-time marginal
    DiscreteForm form = assemble_limit(s.base, 2.0);
    double two = two_time_functional(form, 0.3, 0.8, probes::indicator(0.5, 1.5).f, probes::constant(1.0).f, h, 1e-3);
    HeatOptions o;
    o.dt = 1e-3;
    o.t_end = 0.3;
    auto p = step_heat(form, sample(form.grid(), probes::indicator(0.5, 1.5).f), o).final;
    auto hv = sample(form.grid(), h);
    std::vector<double> one(form.size(), 1.0);
    double marginal = inner_m(form, hv, p) / inner_m(form, hv, one);
    CHECK(two == doctest::Approx(marginal).epsilon(1e-9));
}

TEST_CASE("two-time functional agrees with Monte Carlo from a point start")
{
    Scenario sc = Scenario::brownian(phase::Snapping{2.0}, 6.0, 0.005);
    DiscreteForm form = assemble(sc);
    // a narrow band around 0.5 on the plus side approximates the point start
    auto band = probes::indicator(0.49, 0.51).f;
    double pde = two_time_functional(form, 0.25, 0.75, probes::indicator(0.5, 1.5).f, probes::minus_side().f, band, 1e-3);

    McOptions opt;
    opt.snapshot_times = {0.25, 0.75};
    opt.record_events = false;
    auto e = run_snob(GPoint{Side::Plus, 0.5, false}, 2.0, 1e-3, 0.75, 40000, 99, opt);
    auto est = estimate(e, functional::ProductAt{0.25, probes::indicator(0.5, 1.5).f, 0.75, probes::minus_side().f});
    CHECK(pde > 0.01);
    CHECK(std::abs(est.value - pde) < 3.0 * est.std_error + 2e-3);
}

TEST_CASE("kappa lock lands on 2/gamma_bar")
{
    auto r = kappa_lock(lejay_sweep(-1.0), 6, probes::odd_exp(), 1.0);
    CHECK(r.kappa_ref == doctest::Approx(1.0));
    CHECK(r.j.size() == 17);
    CHECK(r.best_j == 0);
}

TEST_CASE("hypothesis quantity")
{
    Scenario base = Scenario::brownian(phase::Continuous{}, 5.0, 0.01);
    // Lebesgue m and lambda: m* = lambda* = eps
    CHECK(hypothesis_quantity(base, 0.1, 2.0) == doctest::Approx(0.1 * 2.0 + 0.1 * 0.1).epsilon(1e-3));
    auto semi = run_phase_sweep(lejay_sweep(-1.0));
    CHECK(semi.hypothesis_decreasing);
    CHECK_FALSE(semi.hypothesis_flagged);
    auto imp = run_phase_sweep(lejay_sweep(-2.0));
    CHECK(imp.hypothesis_decreasing);
    CHECK(imp.hypothesis_flagged);
}
