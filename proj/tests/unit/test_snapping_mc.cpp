#include "gen.hpp"
#include "oracles.hpp"

#include "stifflab/errors.hpp"
#include "stifflab/evolve.hpp"
#include "stifflab/functions.hpp"
#include "stifflab/snapping_mc.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace stifflab;

namespace {

// sup |F_n - F| against a reference cdf
template <class Cdf>
double ks_one_sample(std::vector<double> xs, Cdf F)
{
    std::sort(xs.begin(), xs.end());
    double d = 0.0, n = static_cast<double>(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
        double f = F(xs[i]);
        d = std::max({d, std::abs((i + 1) / n - f), std::abs(i / n - f)});
    }
    return d;
}

double ks_two_sample(std::vector<double> a, std::vector<double> b)
{
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        double x = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= x)
            ++i;
        while (j < b.size() && b[j] <= x)
            ++j;
        d = std::max(d, std::abs(double(i) / a.size() - double(j) / b.size()));
    }
    return d;
}

} // namespace

TEST_CASE("reflected step far from the origin never touches it")
{
    PathRng rng = path_rng(1, 0);
    std::size_t touched = 0;
    const std::size_t n = 200000;
    for (std::size_t i = 0; i < n; ++i)
        if (sample_reflected_step(6.0, 1e-2, rng).d_local > 0.0)
            ++touched;
    // analytic P = 2 Phi(-60), far below 1e-6
    CHECK(2.0 * oracle::normal_cdf(-6.0 / 0.1) < 1e-6);
    CHECK(touched == 0);
}

TEST_CASE("local time from the origin over one step has mean sqrt(2h/pi)")
{
    PathRng rng = path_rng(2, 0);
    const double h = 0.01;
    const std::size_t n = 100000;
    double s = 0.0, ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        auto st = sample_reflected_step(0.0, h, rng);
        CHECK(st.x >= 0.0);
        s += st.d_local;
        ss += st.d_local * st.d_local;
    }
    double mean = s / n, se = std::sqrt((ss / n - mean * mean) / n);
    CHECK(std::abs(mean - std::sqrt(2.0 * h / M_PI)) < 3.0 * se);
}

TEST_CASE("tiny kappa: plain reflected Brownian motion")
{
    McOptions opt;
    opt.snapshot_times = {1.0};
    auto e = run_snob(GPoint{Side::Plus, 1.0, false}, 1e-9, 1e-2, 1.0, 5000, 3, opt);
    CHECK(e.count(EventKind::Rebirth) == 0);
    std::vector<double> xs;
    for (const auto& p : e.snapshots[0]) {
        CHECK(p.side == Side::Plus);
        xs.push_back(p.coord);
    }
    double d = ks_one_sample(xs, [](double y) { return oracle::reflected_cdf(1.0, 1.0, y); });
    CHECK(d < 1.63 / std::sqrt(5000.0));
}

TEST_CASE("SNOB from 0+: minus-side probability matches the renewal closed form")
{
    McOptions opt;
    opt.snapshot_times = {1.0};
    auto e = run_snob(GPoint{Side::Plus, 0.0, false}, 2.0, 1e-3, 1.0, 20000, 4, opt);
    auto est = estimate(e, functional::MeanAt{1.0, probes::minus_side().f});
    double exact = oracle::snob_minus_from_zero(2.0, 1.0);
    CHECK(exact == doctest::Approx(0.3319).epsilon(1e-3));
    CHECK(std::abs(est.value - exact) < 3.0 * est.std_error + 1e-3);
}

TEST_CASE("SNOB side symmetry")
{
    McOptions opt;
    opt.snapshot_times = {0.5};
    opt.record_events = false;
    auto a = run_snob(GPoint{Side::Plus, 0.0, false}, 1.5, 1e-3, 0.5, 10000, 5, opt);
    auto b = run_snob(GPoint{Side::Minus, 0.0, false}, 1.5, 1e-3, 0.5, 10000, 6, opt);
    std::vector<double> xa, xb;
    for (const auto& p : a.snapshots[0])
        xa.push_back(p.side == Side::Plus ? p.coord : -p.coord - 1e-300);
    for (const auto& p : b.snapshots[0])
        xb.push_back(p.side == Side::Minus ? p.coord : -p.coord - 1e-300);
    CHECK(ks_two_sample(xa, xb) < 1.63 * std::sqrt(2.0 / 10000.0));
}

TEST_CASE("rebirth sides are balanced and event times increase per path")
{
    McOptions opt;
    opt.snapshot_times = {2.0};
    auto e = run_snob(GPoint{Side::Plus, 0.3, false}, 4.0, 1e-3, 2.0, 4000, 7, opt);
    std::size_t n = 0, plus = 0;
    for (std::size_t i = 0; i < e.events.size(); ++i) {
        const auto& ev = e.events[i];
        if (ev.kind == EventKind::Rebirth) {
            ++n;
            plus += ev.side == Side::Plus;
        }
        if (i > 0 && e.events[i - 1].path == ev.path)
            CHECK(ev.time > e.events[i - 1].time);
        if (i > 0)
            CHECK(ev.path >= e.events[i - 1].path);
    }
    REQUIRE(n > 1000);
    double frac = double(plus) / n, sigma = std::sqrt(0.25 / n);
    CHECK(std::abs(frac - 0.5) < 3.0 * sigma);
}

TEST_CASE("seed determinism and schedule independence")
{
    McOptions opt;
    opt.snapshot_times = {0.25, 0.5};
    opt.threads = 1;
    auto a = run_snob(GPoint{Side::Plus, 0.0, false}, 3.0, 1e-3, 0.5, 500, 42, opt);
    opt.threads = 3;
    auto b = run_snob(GPoint{Side::Plus, 0.0, false}, 3.0, 1e-3, 0.5, 500, 42, opt);
    CHECK(a.snapshots == b.snapshots);
    REQUIRE(a.events.size() == b.events.size());
    for (std::size_t i = 0; i < a.events.size(); ++i) {
        CHECK(a.events[i].time == b.events[i].time);
        CHECK(a.events[i].side == b.events[i].side);
        CHECK(a.events[i].path == b.events[i].path);
    }
    auto c = run_snob(GPoint{Side::Plus, 0.0, false}, 3.0, 1e-3, 0.5, 500, 43, opt);
    CHECK(c.snapshots != a.snapshots);
}

TEST_CASE("run_snob guards")
{
    CHECK_THROWS_AS(run_snob(GPoint{}, 0.0, 1e-3, 1.0, 10, 1), ParameterError);
    CHECK_THROWS_AS(run_snob(GPoint{}, -1.0, 1e-3, 1.0, 10, 1), ParameterError);
    McOptions opt;
    opt.max_work = 1e4;
    CHECK_THROWS_AS(run_snob(GPoint{}, 1.0, 1e-3, 1.0, 100, 1, opt), ResourceError);
}

TEST_CASE("two-node chain occupancy matches the closed form")
{
    const double r = 0.8, T = 0.7;
    Grid g = Grid::from_nodes({0.0, 1.0}, OriginMode::Single);
    DiscreteForm f(g, {1.0, 1.0}, {r}, {0.0, 0.0}, PhaseTag{});
    McOptions opt;
    opt.snapshot_times = {T};
    auto e = run_ctmc(f, 0, T, 40000, 8, opt);
    std::size_t stay = 0;
    for (long node : e.snapshot_nodes[0])
        stay += node == 0;
    double p = double(stay) / e.n_paths, se = std::sqrt(p * (1 - p) / e.n_paths);
    CHECK(std::abs(p - oracle::two_state_stay(r, T)) < 3.0 * se);
}

TEST_CASE("CTMC on the separate phase never crosses")
{
    DiscreteForm f = assemble(Scenario::brownian(phase::Separate{}, 2.0, 0.05));
    McOptions opt;
    opt.snapshot_times = {1.0};
    auto e = run_ctmc(f, f.grid().zero_plus(), 1.0, 2000, 9, opt);
    CHECK(e.count(EventKind::Crossing) == 0);
    for (const auto& p : e.snapshots[0])
        CHECK(p.side == Side::Plus);
}

TEST_CASE("CTMC crossing frequency is linear in small kappa with the predicted slope")
{
    const double T = 1.0, h = 0.05;
    DiscreteForm sep = assemble(Scenario::brownian(phase::Separate{}, 3.0, h));
    const std::size_t zp = sep.grid().zero_plus();
    // first order: E[crossings] = (kappa/4)/m(0+) * int_0^T P(X_t = 0+) dt under the separate chain
    std::vector<double> e_zp(sep.size(), 0.0);
    e_zp[zp] = 1.0;
    HeatOptions ho;
    ho.dt = 1e-3;
    ho.t_end = T;
    ho.scheme = Scheme::ImplicitEuler;
    for (int k = 1; k <= 1000; ++k)
        ho.snapshot_times.push_back(k * 1e-3);
    HeatRun run = step_heat(sep, e_zp, ho);
    double occ = 0.5 * 1e-3 * (1.0 + run.snapshots.back()[zp]);
    for (std::size_t k = 0; k + 1 < run.snapshots.size(); ++k)
        occ += 1e-3 * run.snapshots[k][zp];
    const double slope = occ / (4.0 * sep.mass()[zp]);

    double sxy = 0.0, sxx = 0.0;
    for (double kappa : {0.025, 0.05, 0.1}) {
        DiscreteForm f = assemble(Scenario::brownian(phase::Snapping{kappa}, 3.0, h));
        McOptions opt;
        opt.snapshot_times = {T};
        auto e = run_ctmc(f, zp, T, 40000, 10, opt);
        double y = double(e.count(EventKind::Crossing)) / e.n_paths;
        sxy += kappa * y;
        sxx += kappa * kappa;
    }
    CHECK(sxy / sxx == doctest::Approx(slope).epsilon(0.10));
}

TEST_CASE("CTMC refuses negative rates")
{
    Grid g = Grid::from_nodes({0.0, 1.0, 2.0}, OriginMode::Single);
    DiscreteForm f(g, {1.0, 1.0, 1.0}, {1.0, -0.5}, {0.0, 0.0, 0.0}, PhaseTag{});
    CHECK_THROWS_AS(run_ctmc(f, 0, 1.0, 10, 1), InvariantViolation);
}

TEST_CASE("CTMC killing sends paths to the cemetery")
{
    DiscreteForm f = kill(assemble(Scenario::brownian(phase::Separate{}, 1.0, 0.1)),
                          std::vector<std::pair<std::size_t, double>>{{5, 50.0}});
    McOptions opt;
    opt.snapshot_times = {5.0};
    auto e = run_ctmc(f, 5, 5.0, 500, 11, opt);
    CHECK(e.count(EventKind::Killed) > 400);
    auto est = estimate(e, functional::MeanAt{5.0, probes::constant(1.0).f});
    CHECK(est.value < 0.2);
}

TEST_CASE("estimators")
{
    McOptions opt;
    opt.snapshot_times = {0.5, 1.0};
    auto e = run_snob(GPoint{Side::Plus, 0.5, false}, 2.0, 1e-2, 1.0, 300, 12, opt);
    auto one = estimate(e, functional::MeanAt{1.0, probes::constant(1.0).f});
    CHECK(one.value == 1.0);
    CHECK(one.std_error == 0.0);
    auto prod = estimate(e, functional::ProductAt{0.5, probes::constant(1.0).f, 1.0, probes::plus_side().f});
    auto single = estimate(e, functional::MeanAt{1.0, probes::plus_side().f});
    CHECK(prod.value == single.value);
    CHECK_THROWS_AS(estimate(e, functional::MeanAt{0.3, probes::constant(1.0).f}), ArgumentError);
    CHECK_THROWS_AS(estimate(e, functional::HittingBefore{2.0}), ArgumentError);
}

TEST_CASE("hitting 0- from 0+ follows the thinned-renewal law and grows with T")
{
    double prev = 0.0;
    for (double T : {0.5, 1.0, 2.0}) {
        McOptions opt;
        opt.hit_target = GPoint{Side::Minus, 0.0, false};
        opt.record_events = false;
        auto e = run_snob(GPoint{Side::Plus, 0.0, false}, 2.0, 1e-3, T, 5000, 13 + static_cast<std::uint64_t>(T * 10), opt);
        auto est = estimate(e, functional::HittingBefore{T});
        double exact = 1.0 - oracle::snob_no_minus_visit(2.0, T);
        CHECK(std::abs(est.value - exact) < 3.0 * est.std_error + 5e-3);
        CHECK(est.value > prev);
        prev = est.value;
    }
}

TEST_CASE("ergodic average of 1_[0,1] decays")
{
    double prev = 1.0;
    for (double t : {10.0, 100.0, 1000.0}) {
        McOptions opt;
        opt.occupation_f = probes::indicator(0.0, 1.0).f;
        opt.occupation_times = {t};
        opt.record_events = false;
        auto e = run_snob(GPoint{Side::Plus, 0.5, false}, 2.0, 2e-2, t, 200, 14, opt);
        auto est = estimate(e, functional::ErgodicAverage{t});
        CHECK(est.value < prev);
        prev = est.value;
    }
    CHECK(prev < 0.05);
}
