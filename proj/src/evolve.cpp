#include "stifflab/evolve.hpp"

#include "stifflab/errors.hpp"
#include "stifflab/tridiagonal.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

namespace stifflab {

namespace {

SymTridiagonal shifted_system(const DiscreteForm& form, double mass_scale, double stiff_scale)
{
    const std::size_t n = form.size();
    std::vector<double> diag(n), off(n - 1);
    for (std::size_t i = 0; i < n; ++i)
        diag[i] = mass_scale * form.mass()[i] + stiff_scale * form.diagonal(i);
    for (std::size_t i = 0; i + 1 < n; ++i)
        off[i] = stiff_scale * form.off_diagonal(i);
    return SymTridiagonal(std::move(diag), std::move(off));
}

// (alpha M + A) u - b
std::vector<double> shifted_residual(const DiscreteForm& form, double alpha, std::span<const double> u, std::span<const double> b)
{
    std::vector<double> r = form.apply(u);
    for (std::size_t i = 0; i < r.size(); ++i)
        r[i] += alpha * form.mass()[i] * u[i] - b[i];
    return r;
}

double norm2(std::span<const double> v)
{
    double s = 0.0;
    for (double x : v)
        s += x * x;
    return std::sqrt(s);
}

void check_size(const DiscreteForm& form, std::size_t n, const char* what)
{
    if (n != form.size())
        throw ArgumentError(fmt::format("{} has {} entries but the grid has {} nodes", what, n, form.size()));
}

} // namespace

std::vector<double> solve_shifted(const DiscreteForm& form, double alpha, std::span<const double> rhs)
{
    if (!(alpha > 0.0) || !std::isfinite(alpha))
        throw ArgumentError(fmt::format("resolvent rate alpha={} must be positive", alpha));
    check_size(form, rhs.size(), "right-hand side");
    SymTridiagonal sys = shifted_system(form, alpha, 1.0);
    std::vector<double> u = sys.solve(rhs);
    // one step of iterative refinement keeps the residual at roundoff
    std::vector<double> r = shifted_residual(form, alpha, u, rhs);
    sys.solve_in_place(r);
    for (std::size_t i = 0; i < u.size(); ++i)
        u[i] -= r[i];
    return u;
}

ResolventSolve resolvent(const DiscreteForm& form, double alpha, std::span<const double> f)
{
    check_size(form, f.size(), "data f");
    std::vector<double> b(f.size());
    for (std::size_t i = 0; i < f.size(); ++i)
        b[i] = form.mass()[i] * f[i];
    ResolventSolve out;
    out.alpha = alpha;
    out.rhs.assign(f.begin(), f.end());
    out.solution = solve_shifted(form, alpha, b);
    double nb = norm2(b);
    double nr = norm2(shifted_residual(form, alpha, out.solution, b));
    out.residual = nb > 0.0 ? nr / nb : nr;
    if (!(out.residual <= 1e-10))
        throw NumericalError(fmt::format("resolvent residual {:.3g} exceeds 1e-10", out.residual));
    return out;
}

double inner_m(const DiscreteForm& form, std::span<const double> u, std::span<const double> v)
{
    double s = 0.0;
    for (std::size_t i = 0; i < form.size(); ++i)
        s += form.mass()[i] * u[i] * v[i];
    return s;
}

double norm_m(const DiscreteForm& form, std::span<const double> u)
{
    return std::sqrt(inner_m(form, u, u));
}

HeatRun step_heat(const DiscreteForm& form, std::span<const double> u0, const HeatOptions& opt)
{
    check_size(form, u0.size(), "initial condition");
    if (!(opt.dt > 0.0) || !std::isfinite(opt.dt))
        throw ArgumentError(fmt::format("time step dt={} must be positive", opt.dt));
    if (!(opt.t_end > 0.0) || !std::isfinite(opt.t_end))
        throw ArgumentError(fmt::format("horizon t_end={} must be positive", opt.t_end));
    if (opt.rannacher_halfsteps < 0)
        throw ArgumentError("rannacher_halfsteps must be nonnegative");
    const std::size_t n = form.size();
    const auto steps = static_cast<std::size_t>(std::max<long long>(1, std::llround(opt.t_end / opt.dt)));
    const double dt = opt.t_end / static_cast<double>(steps);
    const auto& M = form.mass();

    HeatRun run;
    run.dt = dt;
    run.t_end = opt.t_end;
    run.scheme = opt.scheme;

    // snapshot step indices
    std::vector<std::size_t> snap_step;
    for (double t : opt.snapshot_times) {
        if (!(t >= 0.0) || t > opt.t_end * (1.0 + 1e-12))
            throw ArgumentError(fmt::format("snapshot time {} outside [0, {}]", t, opt.t_end));
        snap_step.push_back(static_cast<std::size_t>(std::llround(t / dt)));
    }
    run.times.resize(snap_step.size());
    run.snapshots.resize(snap_step.size());

    std::vector<double> u(u0.begin(), u0.end());
    std::vector<double> accum(n, 0.0); // ∫ u dt by the scheme's quadrature
    auto record = [&](std::size_t k) {
        for (std::size_t j = 0; j < snap_step.size(); ++j)
            if (snap_step[j] == k) {
                run.times[j] = static_cast<double>(k) * dt;
                run.snapshots[j] = u;
            }
        run.l2_norms.push_back(norm_m(form, u));
    };
    auto check_finite = [&](std::size_t k) {
        for (double v : u)
            if (!std::isfinite(v))
                throw NumericalError(fmt::format("non-finite heat solution at step {}", k));
    };
    record(0);

    const bool cn = opt.scheme == Scheme::CrankNicolson;
    SymTridiagonal main_sys = shifted_system(form, 1.0, cn ? 0.5 * dt : dt);
    const int start_sub = cn ? opt.rannacher_halfsteps : 0;
    SymTridiagonal start_sys;
    if (start_sub > 0)
        start_sys = start_sub == 2 ? main_sys : shifted_system(form, 1.0, dt / start_sub);

    std::vector<double> rhs(n);
    for (std::size_t k = 1; k <= steps; ++k) {
        if (k == 1 && start_sub > 0) {
            const double tau = dt / start_sub;
            for (int s = 0; s < start_sub; ++s) {
                for (std::size_t i = 0; i < n; ++i)
                    rhs[i] = M[i] * u[i];
                start_sys.solve_in_place(rhs);
                u.swap(rhs);
                for (std::size_t i = 0; i < n; ++i)
                    accum[i] += tau * u[i];
            }
        } else if (cn) {
            std::vector<double> Au = form.apply(u);
            for (std::size_t i = 0; i < n; ++i)
                rhs[i] = M[i] * u[i] - 0.5 * dt * Au[i];
            main_sys.solve_in_place(rhs);
            for (std::size_t i = 0; i < n; ++i)
                accum[i] += 0.5 * dt * (u[i] + rhs[i]);
            u.swap(rhs);
        } else {
            for (std::size_t i = 0; i < n; ++i)
                rhs[i] = M[i] * u[i];
            main_sys.solve_in_place(rhs);
            u.swap(rhs);
            for (std::size_t i = 0; i < n; ++i)
                accum[i] += dt * u[i];
        }
        check_finite(k);
        record(k);
    }

    std::vector<double> r = form.apply(accum);
    double scale = 0.0, worst = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        r[i] += M[i] * (u[i] - u0[i]);
        scale = std::max(scale, std::abs(M[i] * u0[i]));
        worst = std::max(worst, std::abs(r[i]));
    }
    run.weak_residual = scale > 0.0 ? worst / scale : worst;
    run.final = std::move(u);
    return run;
}

double flux_at(std::span<const double> u, const DiscreteForm& form, Side side)
{
    const Grid& g = form.grid();
    if (!g.doubled())
        throw ShapeError("one-sided fluxes need a doubled-origin grid");
    check_size(form, u.size(), "solution");
    const auto& w = form.conductance();
    if (side == Side::Plus) {
        std::size_t z = g.zero_plus();
        return (u[z + 1] - u[z]) * 2.0 * w[z];
    }
    if (side == Side::Minus) {
        std::size_t z = g.zero_minus();
        return (u[z] - u[z - 1]) * 2.0 * w[z - 1];
    }
    throw ArgumentError("flux side must be 0- or 0+");
}

BcResidual bc_residual_of(const DiscreteForm& form, std::span<const double> u)
{
    using K = PhaseTag::Kind;
    BcResidual r;
    switch (form.tag().kind) {
    case K::Continuous:
        return r;
    case K::Separate:
    case K::Snapping:
    case K::SkewSnapping: {
        const Grid& g = form.grid();
        double jump = u[g.zero_plus()] - u[g.zero_minus()];
        double law = 2.0 * form.interface_weight() * jump;
        r.r_minus = flux_at(u, form, Side::Minus) - law;
        r.r_plus = flux_at(u, form, Side::Plus) - law;
        r.r_jump = jump;
        return r;
    }
    default:
        throw ArgumentError("boundary-condition residuals are defined for separate, snapping and continuous phases");
    }
}

BcResidual bc_residual(const DiscreteForm& form, double alpha, std::span<const double> f)
{
    return bc_residual_of(form, resolvent(form, alpha, f).solution);
}

} // namespace stifflab
