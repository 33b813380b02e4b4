#include "stifflab/convergence_lab.hpp"

#include "stifflab/errors.hpp"
#include "stifflab/parallel.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <map>

namespace stifflab {

// ---------------------------------------------------------------- families

BarrierFamily BarrierFamily::lejay(double kappa, double alpha_exponent)
{
    if (!(kappa > 0.0))
        throw ParameterError(fmt::format("barrier kappa={} must be positive", kappa));
    BarrierFamily f;
    f.kind = Kind::Lejay;
    f.kappa = kappa;
    f.alpha_exponent = alpha_exponent;
    return f;
}

BarrierSpec BarrierFamily::make(double eps) const
{
    if (kind == Kind::Lejay)
        return BarrierSpec::lejay(eps, kappa, alpha_exponent);
    std::vector<double> nodes = profile_nodes, values = profile_values;
    const double scale = std::pow(eps, -exponent);
    for (auto& x : nodes)
        x *= eps;
    for (auto& v : values)
        v *= scale;
    return BarrierSpec::from_conductivity(eps, Conductivity::custom_table(std::move(nodes), std::move(values)));
}

double BarrierFamily::gamma_bar(double eps) const
{
    if (kind == Kind::Lejay)
        return 2.0 * std::pow(kappa, alpha_exponent) * std::pow(eps, alpha_exponent + 1.0);
    return make(eps).total_resistance();
}

double BarrierFamily::limit_gamma_bar() const
{
    double p = kind == Kind::Lejay ? alpha_exponent : exponent;
    if (p < -1.0)
        return kInfinity;
    if (p > -1.0)
        return 0.0;
    return gamma_bar(1.0);
}

// ---------------------------------------------------------------- forms

Grid base_doubled_grid(const Scenario& base)
{
    if (base.grid.nodes > 0)
        return Grid::with_count(base.box_half_width, base.grid.nodes, OriginMode::Doubled);
    return Grid::uniform(base.box_half_width, base.grid.h, OriginMode::Doubled);
}

DiscreteForm assemble_limit(const Scenario& base, double gamma_bar)
{
    Scenario s = base;
    if (!(gamma_bar >= 0.0))
        throw ParameterError(fmt::format("total resistance {} must be nonnegative", gamma_bar));
    if (gamma_bar == 0.0)
        s.phase = phase::Continuous{};
    else if (std::isinf(gamma_bar))
        s.phase = phase::Separate{};
    else
        s.phase = phase::Snapping{kappa_from_gamma_bar(gamma_bar)};
    return assemble(s, make_grid(s));
}

DiscreteForm assemble_barrier_form(const Scenario& base, const BarrierSpec& barrier)
{
    Scenario s = base;
    s.phase = phase::EpsBarrier{barrier};
    Grid g = Grid::barrier_grid(base_doubled_grid(base), barrier.epsilon(), base.grid.barrier_cells);
    return assemble(s, g);
}

std::vector<std::size_t> transport_indices(const Grid& doubled, const Grid& eps_grid)
{
    if (!doubled.doubled() || eps_grid.doubled())
        throw ShapeError("transport maps an ε grid onto a doubled-origin grid");
    if (eps_grid.size() < doubled.size())
        throw ShapeError("ε grid is smaller than the doubled grid it should contain");
    const std::size_t offset = eps_grid.size() - doubled.size();
    std::vector<std::size_t> idx(doubled.size());
    for (std::size_t i = 0; i < doubled.size(); ++i)
        idx[i] = i <= doubled.zero_minus() ? i : i + offset;
    return idx;
}

std::vector<double> to_doubled_view(const DiscreteForm& form, std::span<const double> u, const Grid& doubled)
{
    const Grid& g = form.grid();
    if (form.tag().kind == PhaseTag::Kind::EpsBarrier) {
        auto idx = transport_indices(doubled, g);
        std::vector<double> v(idx.size());
        for (std::size_t i = 0; i < idx.size(); ++i)
            v[i] = u[idx[i]];
        return v;
    }
    if (g.doubled()) {
        if (g.size() != doubled.size())
            throw ShapeError("doubled grids of different sizes");
        return {u.begin(), u.end()};
    }
    if (g.size() + 1 != doubled.size())
        throw ShapeError("single-origin grid does not match the doubled grid");
    std::vector<double> v(doubled.size());
    const std::size_t zm = doubled.zero_minus();
    for (std::size_t i = 0; i < doubled.size(); ++i)
        v[i] = i <= zm ? u[i] : u[i - 1];
    return v;
}

std::vector<double> sample_for(const DiscreteForm& form, const GridFunction& f)
{
    if (form.tag().kind == PhaseTag::Kind::EpsBarrier)
        return sample_transported(form.grid(), form.tag().epsilon, f);
    return sample(form.grid(), f);
}

double l2_distance(const DiscreteForm& metric, std::span<const double> u, std::span<const double> v)
{
    double s = 0.0;
    for (std::size_t i = 0; i < metric.size(); ++i)
        s += metric.mass()[i] * (u[i] - v[i]) * (u[i] - v[i]);
    return std::sqrt(s);
}

namespace {

DiscreteForm metric_form(const Scenario& base)
{
    Scenario s = base;
    s.phase = phase::Separate{};
    return assemble(s, base_doubled_grid(base));
}

std::vector<double> solve_view(const DiscreteForm& form, double alpha, const GridFunction& f, const Grid& doubled)
{
    auto u = resolvent(form, alpha, sample_for(form, f)).solution;
    return to_doubled_view(form, u, doubled);
}

} // namespace

// ---------------------------------------------------------------- sweeps

double SweepSpec::eps(int n) const
{
    return std::ldexp(eps0, -n);
}

double SweepSpec::target() const
{
    return target_gamma_bar ? *target_gamma_bar : barrier.limit_gamma_bar();
}

bool SweepReport::pass() const
{
    return !verdicts.empty() && std::all_of(verdicts.begin(), verdicts.end(), [](const SweepVerdict& v) { return v.pass; });
}

double hypothesis_quantity(const Scenario& base, double eps, double gamma_bar)
{
    const double L = base.box_half_width;
    double m_star = window_sup(base.speed.build(-L, L), eps);
    double l_star = window_sup(base.resistance.build(-L, L), eps);
    return gamma_bar * m_star + l_star * m_star;
}

SweepReport run_phase_sweep(const SweepSpec& spec)
{
    if (spec.probes.empty() || spec.alphas.empty())
        throw ParameterError("a sweep needs at least one probe and one alpha");
    if (spec.n_max < spec.n_min || spec.n_min < 0)
        throw ParameterError(fmt::format("sweep range n={}..{} is empty", spec.n_min, spec.n_max));
    if (!(spec.eps0 > 0.0))
        throw ParameterError(fmt::format("eps0={} must be positive", spec.eps0));
    for (double a : spec.alphas)
        if (!(a > 0.0))
            throw ParameterError(fmt::format("resolvent rate alpha={} must be positive", a));
    if (spec.base.grid.barrier_cells < 8)
        throw ParameterError(fmt::format("barrier resolved by {} cells; at least 8 cells across the barrier are required",
                                         spec.base.grid.barrier_cells));

    const Grid G = base_doubled_grid(spec.base);
    const DiscreteForm metric = metric_form(spec.base);
    const double target = spec.target();
    const DiscreteForm limit = assemble_limit(spec.base, target);

    SweepReport report;
    report.run_id = spec.run_id;
    report.target_gamma_bar = target;
    report.target_phase = target == 0.0 ? "continuous" : (std::isinf(target) ? "separate" : fmt::format("snapping(kappa={:.6g})", 2.0 / target));

    const std::size_t np = spec.probes.size(), na = spec.alphas.size();
    std::vector<std::vector<double>> limit_u(np * na);
    for (std::size_t p = 0; p < np; ++p)
        for (std::size_t a = 0; a < na; ++a)
            limit_u[p * na + a] = solve_view(limit, spec.alphas[a], spec.probes[p].f, G);

    const int count = spec.n_max - spec.n_min + 1;
    std::vector<std::vector<SweepRow>> by_n(static_cast<std::size_t>(count));
    parallel_for(static_cast<std::size_t>(count), resolve_threads(spec.threads), [&](std::size_t k) {
        const int n = spec.n_min + static_cast<int>(k);
        const double eps = spec.eps(n);
        const BarrierSpec barrier = spec.barrier.make(eps);
        const DiscreteForm form = assemble_barrier_form(spec.base, barrier);
        const auto idx = transport_indices(G, form.grid());
        const std::size_t ia = idx[G.zero_minus()], ib = idx[G.zero_plus()];
        const auto& w = form.conductance();
        const double gb = barrier.total_resistance();
        const double hq = hypothesis_quantity(spec.base, eps, gb);
        for (std::size_t p = 0; p < np; ++p)
            for (std::size_t a = 0; a < na; ++a) {
                auto u = resolvent(form, spec.alphas[a], sample_for(form, spec.probes[p].f)).solution;
                auto v = to_doubled_view(form, u, G);
                SweepRow row;
                row.run_id = spec.run_id;
                row.n = n;
                row.eps = eps;
                row.gamma_bar_n = gb;
                row.hypothesis_qty = hq;
                row.f_id = spec.probes[p].id;
                row.alpha = spec.alphas[a];
                row.l2_error = l2_distance(metric, v, limit_u[p * na + a]);
                row.jump = u[ib] - u[ia];
                double flux_minus = (u[ia] - u[ia - 1]) * 2.0 * w[ia - 1];
                double flux_plus = (u[ib + 1] - u[ib]) * 2.0 * w[ib];
                if (target == 0.0) {
                    row.flux_res_minus = row.flux_res_plus = flux_plus - flux_minus;
                } else {
                    double law = std::isinf(target) ? 0.0 : row.jump / target; // (kappa/2) jump with kappa = 2/gamma_bar
                    row.flux_res_minus = flux_minus - law;
                    row.flux_res_plus = flux_plus - law;
                }
                row.grid_h = G.max_spacing();
                row.box_L = spec.base.box_half_width;
                by_n[k].push_back(std::move(row));
            }
    });
    for (auto& rows : by_n)
        for (auto& r : rows)
            report.rows.push_back(std::move(r));

    for (std::size_t p = 0; p < np; ++p)
        for (std::size_t a = 0; a < na; ++a) {
            std::vector<double> errs;
            for (const auto& rows : by_n)
                errs.push_back(rows[p * na + a].l2_error);
            SweepVerdict v;
            v.f_id = spec.probes[p].id;
            v.alpha = spec.alphas[a];
            v.final_error = errs.back();
            std::size_t start = errs.size() >= 3 ? errs.size() - 3 : 0;
            v.decreasing = errs.size() >= 2;
            for (std::size_t i = start + 1; i < errs.size(); ++i)
                v.decreasing = v.decreasing && errs[i] < errs[i - 1];
            v.pass = v.decreasing && v.final_error < spec.tolerance;
            report.verdicts.push_back(v);
        }

    std::vector<double> hq;
    for (const auto& rows : by_n)
        hq.push_back(rows.front().hypothesis_qty);
    report.hypothesis_decreasing = true;
    for (std::size_t i = 1; i < hq.size(); ++i)
        report.hypothesis_decreasing = report.hypothesis_decreasing && hq[i] < hq[i - 1];
    report.hypothesis_flagged = !report.hypothesis_decreasing || !(hq.back() <= 0.5 * hq.front());
    return report;
}

KappaLockResult kappa_lock(const SweepSpec& spec, int n, const Probe& f, double alpha)
{
    const Grid G = base_doubled_grid(spec.base);
    const DiscreteForm metric = metric_form(spec.base);
    const BarrierSpec barrier = spec.barrier.make(spec.eps(n));
    const DiscreteForm form = assemble_barrier_form(spec.base, barrier);
    const auto v = solve_view(form, alpha, f.f, G);
    KappaLockResult r;
    r.kappa_ref = kappa_from_gamma_bar(barrier.total_resistance());
    double best = kInfinity;
    for (int j = -8; j <= 8; ++j) {
        double kappa = r.kappa_ref * std::exp2(j / 8.0);
        Scenario s = spec.base;
        s.phase = phase::Snapping{kappa};
        double err = l2_distance(metric, v, solve_view(assemble(s, G), alpha, f.f, G));
        r.j.push_back(j);
        r.kappa.push_back(kappa);
        r.error.push_back(err);
        if (err < best) {
            best = err;
            r.best_j = j;
        }
    }
    return r;
}

// ---------------------------------------------------------------- identity

IdentityCheck check_resolvent_identity(const Scenario& scenario, double kappa, double alpha, const GridFunction& f, const GridFunction& g)
{
    Scenario s = scenario;
    s.phase = phase::Snapping{kappa};
    const DiscreteForm snap = assemble(s, base_doubled_grid(s));
    const DiscreteForm el = elastic(snap, kappa);
    const Grid& grid = snap.grid();
    const std::size_t zm = grid.zero_minus(), zp = grid.zero_plus();
    const double mu_total = kappa;

    auto fv = sample(grid, f);
    auto rs = resolvent(snap, alpha, fv).solution;
    auto rmu = resolvent(el, alpha, fv).solution;
    std::vector<double> mu(grid.size(), 0.0);
    mu[zm] = kappa / 2.0;
    mu[zp] = kappa / 2.0;
    auto U = solve_shifted(el, alpha, mu);
    auto pair_mu = [&](const std::vector<double>& v) { return mu[zm] * v[zm] + mu[zp] * v[zp]; };

    IdentityCheck out;
    out.denominator = 1.0 - pair_mu(U) / mu_total;
    if (!(out.denominator > 0.0))
        throw InvariantViolation(fmt::format("<U mu, mu> / |mu| = {} is not below 1", 1.0 - out.denominator));
    const double c = pair_mu(rmu) / (mu_total * out.denominator);
    for (std::size_t i = 0; i < grid.size(); ++i)
        out.max_abs_error = std::max(out.max_abs_error, std::abs(rmu[i] + c * U[i] - rs[i]));

    auto gv = g ? sample(grid, g) : fv;
    auto rmu_g = resolvent(el, alpha, gv).solution;
    out.uam_gap = std::abs(inner_m(el, U, gv) - pair_mu(rmu_g));
    return out;
}

// ---------------------------------------------------------------- continuity

std::vector<ContinuityRow> run_gamma_continuity(const Scenario& base,
                                                const std::vector<double>& gamma_sequence,
                                                double gamma_limit,
                                                double alpha,
                                                const GridFunction& f)
{
    const Grid G = base_doubled_grid(base);
    const DiscreteForm metric = metric_form(base);
    const auto limit = solve_view(assemble_limit(base, gamma_limit), alpha, f, G);
    std::vector<ContinuityRow> rows;
    for (std::size_t l = 0; l < gamma_sequence.size(); ++l) {
        double gb = gamma_sequence[l];
        if (!(gb > 0.0) || std::isinf(gb))
            throw ParameterError(fmt::format("sequence entry gamma_bar={} must lie in (0, inf)", gb));
        const auto u = solve_view(assemble_limit(base, gb), alpha, f, G);
        ContinuityRow row;
        row.l = static_cast<int>(l);
        row.gamma_bar = gb;
        row.l2_error = l2_distance(metric, u, limit);
        row.jump = u[G.zero_plus()] - u[G.zero_minus()];
        rows.push_back(row);
    }
    return rows;
}

// ---------------------------------------------------------------- two-time functionals

double two_time_functional(const DiscreteForm& form,
                           double t1,
                           double t2,
                           const GridFunction& f1,
                           const GridFunction& f2,
                           const GridFunction& h_density,
                           double dt)
{
    if (!(t2 > t1))
        throw ArgumentError(fmt::format("two-time functional needs t1 < t2, got t1={} t2={}", t1, t2));
    if (!(t1 > 0.0))
        throw ArgumentError(fmt::format("first time t1={} must be positive", t1));
    HeatOptions opt;
    opt.dt = dt;
    opt.t_end = t2 - t1;
    auto v = step_heat(form, sample_for(form, f2), opt).final;
    auto f1v = sample_for(form, f1);
    for (std::size_t i = 0; i < v.size(); ++i)
        v[i] *= f1v[i];
    opt.t_end = t1;
    auto z = step_heat(form, v, opt).final;
    auto h = sample_for(form, h_density);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        if (h[i] < 0.0)
            throw ArgumentError("initial density must be nonnegative");
        num += form.mass()[i] * h[i] * z[i];
        den += form.mass()[i] * h[i];
    }
    if (!(den > 0.0))
        throw ArgumentError("initial density has zero mass on the grid");
    return num / den;
}

std::vector<FddRow> run_fdd_check(const SweepSpec& spec,
                                  double t1,
                                  double t2,
                                  const GridFunction& f1,
                                  const GridFunction& f2,
                                  const GridFunction& h_density,
                                  const FddOptions& options)
{
    if (!(t2 > t1))
        throw ArgumentError(fmt::format("two-time functional needs t1 < t2, got t1={} t2={}", t1, t2));
    const double limit_value =
        two_time_functional(assemble_limit(spec.base, spec.target()), t1, t2, f1, f2, h_density, options.dt);
    const int count = spec.n_max - spec.n_min + 1;
    std::vector<FddRow> rows(static_cast<std::size_t>(std::max(count, 0)));
    parallel_for(rows.size(), resolve_threads(spec.threads), [&](std::size_t k) {
        FddRow& r = rows[k];
        r.n = spec.n_min + static_cast<int>(k);
        r.eps = spec.eps(r.n);
        auto form = assemble_barrier_form(spec.base, spec.barrier.make(r.eps));
        r.value_eps = two_time_functional(form, t1, t2, f1, f2, h_density, options.dt);
        r.value_limit = limit_value;
        r.diff = std::abs(r.value_eps - limit_value);
    });
    return rows;
}

} // namespace stifflab
