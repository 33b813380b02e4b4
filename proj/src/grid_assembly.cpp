#include "stifflab/grid_assembly.hpp"

#include "stifflab/errors.hpp"
#include "stifflab/tridiagonal.hpp"

#include <fmt/format.h>
#include <fmt/os.h>

#include <algorithm>
#include <cmath>

namespace stifflab {

// ---------------------------------------------------------------- grid

Grid::Grid(std::vector<double> x, OriginMode mode, std::size_t zm, std::size_t zp)
    : x_(std::move(x)), mode_(mode), zm_(zm), zp_(zp)
{
}

namespace {

void check_increasing(const std::vector<double>& x)
{
    if (x.size() < 2)
        throw ArgumentError("a grid needs at least two nodes");
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!std::isfinite(x[i]))
            throw ArgumentError(fmt::format("grid node {} is not finite", i));
        if (i > 0 && !(x[i] > x[i - 1]))
            throw ArgumentError(fmt::format("grid nodes not strictly increasing at index {}", i));
    }
}

} // namespace

Grid Grid::from_nodes(std::vector<double> nodes, OriginMode mode)
{
    check_increasing(nodes);
    if (mode == OriginMode::Single)
        return Grid(std::move(nodes), mode, npos, npos);
    auto it = std::find(nodes.begin(), nodes.end(), 0.0);
    if (it == nodes.end())
        throw ArgumentError("a doubled-origin grid needs a node at 0");
    if (it == nodes.begin() || it + 1 == nodes.end())
        throw ArgumentError("a doubled-origin grid needs nodes on both sides of 0");
    std::size_t z = static_cast<std::size_t>(it - nodes.begin());
    nodes.insert(it, 0.0);
    return Grid(std::move(nodes), mode, z, z + 1);
}

Grid Grid::uniform(double L, double h, OriginMode mode, std::span<const double> extra)
{
    if (!(L > 0.0) || !(h > 0.0) || h > L)
        throw ParameterError(fmt::format("uniform grid needs 0 < h <= L, got h={} L={}", h, L));
    auto n = static_cast<std::size_t>(std::llround(L / h));
    n = std::max<std::size_t>(n, 1);
    std::vector<double> x;
    x.reserve(2 * n + 1 + extra.size());
    for (std::size_t k = n; k >= 1; --k)
        x.push_back(-(static_cast<double>(k) * L / static_cast<double>(n)));
    x.push_back(0.0);
    for (std::size_t k = 1; k <= n; ++k)
        x.push_back(static_cast<double>(k) * L / static_cast<double>(n));
    double snap = 1e-9 * L / static_cast<double>(n);
    for (double e : extra) {
        if (!(e > -L && e < L))
            throw DomainError(fmt::format("extra node {} outside the box [-{}, {}]", e, L, L));
        auto it = std::lower_bound(x.begin(), x.end(), e);
        if (it != x.end() && std::abs(*it - e) <= snap)
            *it = e;
        else if (it != x.begin() && std::abs(*(it - 1) - e) <= snap)
            *(it - 1) = e;
        else
            x.insert(it, e);
    }
    return from_nodes(std::move(x), mode);
}

Grid Grid::with_count(double L, std::size_t total, OriginMode mode)
{
    if (!(L > 0.0))
        throw ParameterError(fmt::format("box half-width {} must be positive", L));
    if (mode == OriginMode::Doubled) {
        std::size_t per = total / 2;
        if (per < 2)
            throw ParameterError(fmt::format("node count {} too small for a doubled grid", total));
        double h = L / static_cast<double>(per - 1);
        std::vector<double> x;
        for (std::size_t k = per - 1; k >= 1; --k)
            x.push_back(-(static_cast<double>(k) * h));
        x.push_back(0.0);
        for (std::size_t k = 1; k < per; ++k)
            x.push_back(static_cast<double>(k) * h);
        return from_nodes(std::move(x), mode);
    }
    if (total < 3)
        throw ParameterError(fmt::format("node count {} too small", total));
    std::vector<double> x(total);
    for (std::size_t i = 0; i < total; ++i)
        x[i] = -L + 2.0 * L * static_cast<double>(i) / static_cast<double>(total - 1);
    if (total % 2 == 1)
        x[total / 2] = 0.0;
    return from_nodes(std::move(x), mode);
}

Grid Grid::barrier_grid(const Grid& doubled, double eps, std::size_t cells)
{
    if (!doubled.doubled())
        throw ShapeError("the barrier grid is built from a doubled-origin grid");
    if (cells < 8)
        throw ParameterError(
            fmt::format("barrier resolved by {} cells; at least 8 cells across the barrier are required", cells));
    double L = std::min(-doubled.lower(), doubled.upper());
    if (!(eps > 0.0) || eps >= L)
        throw DomainError(fmt::format("barrier half-width {} must lie in (0, L) with box L={}", eps, L));
    std::vector<double> x;
    x.reserve(doubled.size() + cells);
    for (std::size_t i = 0; i <= doubled.zero_minus(); ++i)
        x.push_back(doubled[i] - eps);
    for (std::size_t k = 1; k < cells; ++k)
        x.push_back(2 * k == cells ? 0.0 : -eps + 2.0 * eps * static_cast<double>(k) / static_cast<double>(cells));
    for (std::size_t i = doubled.zero_plus(); i < doubled.size(); ++i)
        x.push_back(doubled[i] + eps);
    return from_nodes(std::move(x), OriginMode::Single);
}

Side Grid::side(std::size_t i) const
{
    if (mode_ == OriginMode::Doubled)
        return i <= zm_ ? Side::Minus : Side::Plus;
    if (x_[i] < 0.0)
        return Side::Minus;
    if (x_[i] > 0.0)
        return Side::Plus;
    return Side::Origin;
}

double Grid::max_spacing() const
{
    double h = 0.0;
    for (std::size_t i = 1; i < x_.size(); ++i)
        h = std::max(h, x_[i] - x_[i - 1]);
    return h;
}

Grid Grid::subset(std::span<const std::size_t> keep) const
{
    if (keep.empty())
        throw ArgumentError("empty node subset");
    std::vector<double> x;
    std::size_t zm = npos, zp = npos;
    for (std::size_t j = 0; j < keep.size(); ++j) {
        if (keep[j] >= x_.size() || (j > 0 && keep[j] <= keep[j - 1]))
            throw ArgumentError(fmt::format("node subset not strictly increasing or out of range at {}", j));
        if (keep[j] == zm_)
            zm = j;
        if (keep[j] == zp_)
            zp = j;
        x.push_back(x_[keep[j]]);
    }
    if (zm != npos && zp != npos)
        return Grid(std::move(x), OriginMode::Doubled, zm, zp);
    return Grid(std::move(x), OriginMode::Single, npos, npos);
}

// ---------------------------------------------------------------- form

DiscreteForm::DiscreteForm(Grid grid,
                           std::vector<double> mass,
                           std::vector<double> conductance,
                           std::vector<double> killing,
                           PhaseTag tag)
    : grid_(std::move(grid)), mass_(std::move(mass)), w_(std::move(conductance)), k_(std::move(killing)), tag_(tag)
{
    const std::size_t n = grid_.size();
    if (mass_.size() != n || k_.size() != n || w_.size() + 1 != n)
        throw ArgumentError("form vectors do not match the grid size");
}

double DiscreteForm::diagonal(std::size_t i) const
{
    double left = i > 0 ? w_[i - 1] : 0.0;
    double right = i + 1 < mass_.size() ? w_[i] : 0.0;
    return (k_[i] + left) + right;
}

double DiscreteForm::interface_weight() const
{
    if (!grid_.doubled())
        throw ShapeError("interface weight needs a doubled-origin grid");
    return w_[grid_.zero_minus()];
}

std::vector<Triplet> DiscreteForm::triplets() const
{
    std::vector<Triplet> t;
    const std::size_t n = mass_.size();
    t.reserve(3 * n);
    for (std::size_t i = 0; i < n; ++i) {
        if (i > 0 && w_[i - 1] != 0.0)
            t.push_back({i, i - 1, -w_[i - 1]});
        t.push_back({i, i, diagonal(i)});
        if (i + 1 < n && w_[i] != 0.0)
            t.push_back({i, i + 1, -w_[i]});
    }
    return t;
}

double DiscreteForm::bilinear(std::span<const double> u, std::span<const double> v) const
{
    double s = 0.0;
    for (std::size_t i = 0; i + 1 < mass_.size(); ++i)
        s += w_[i] * (u[i + 1] - u[i]) * (v[i + 1] - v[i]);
    for (std::size_t i = 0; i < mass_.size(); ++i)
        s += k_[i] * u[i] * v[i];
    return s;
}

double DiscreteForm::quadratic(std::span<const double> u) const
{
    return bilinear(u, u);
}

std::vector<double> DiscreteForm::apply(std::span<const double> u) const
{
    const std::size_t n = mass_.size();
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        double s = diagonal(i) * u[i];
        if (i > 0)
            s -= w_[i - 1] * u[i - 1];
        if (i + 1 < n)
            s -= w_[i] * u[i + 1];
        out[i] = s;
    }
    return out;
}

double DiscreteForm::total_killing() const
{
    double s = 0.0;
    for (double k : k_)
        s += k;
    return s;
}

// ---------------------------------------------------------------- assembly

double interface_weight(const Phase& phase)
{
    if (std::holds_alternative<phase::Separate>(phase))
        return 0.0;
    if (auto s = std::get_if<phase::Snapping>(&phase)) {
        if (!(s->kappa > 0.0) || !std::isfinite(s->kappa))
            throw ParameterError(fmt::format("kappa={} must be positive and finite", s->kappa));
        return s->kappa / 4.0;
    }
    if (auto s = std::get_if<phase::SkewSnapping>(&phase)) {
        if (!(s->kappa > 0.0) || !std::isfinite(s->kappa))
            throw ParameterError(fmt::format("kappa={} must be positive and finite", s->kappa));
        if (!(s->alpha_skew > 0.0 && s->alpha_skew < 1.0))
            throw ParameterError(fmt::format("alpha_skew={} outside (0, 1)", s->alpha_skew));
        return s->alpha_skew * (1.0 - s->alpha_skew) * s->kappa;
    }
    throw ArgumentError("phase " + phase_name(phase) + " has no 0-/0+ interface");
}

Grid make_grid(const Scenario& sc)
{
    const double L = sc.box_half_width;
    auto base = [&](OriginMode mode) {
        if (sc.grid.nodes > 0)
            return Grid::with_count(L, sc.grid.nodes, mode);
        return Grid::uniform(L, sc.grid.h, mode);
    };
    if (std::holds_alternative<phase::Continuous>(sc.phase))
        return base(OriginMode::Single);
    if (auto b = std::get_if<phase::EpsBarrier>(&sc.phase))
        return Grid::barrier_grid(base(OriginMode::Doubled), b->barrier.epsilon(), sc.grid.barrier_cells);
    return base(OriginMode::Doubled);
}

DiscreteForm assemble(const Scenario& sc, const Grid& grid)
{
    const double L = sc.box_half_width;
    if (!(L > 0.0))
        throw ParameterError(fmt::format("box half-width L={} must be positive", L));
    const std::size_t n = grid.size();
    PhaseTag tag;
    double iface = 0.0;
    MonotoneMeasure lambda = MonotoneMeasure::lebesgue(-1.0, 1.0);

    if (auto b = std::get_if<phase::EpsBarrier>(&sc.phase)) {
        if (grid.doubled())
            throw ShapeError("the eps-barrier phase lives on a grid without a doubled origin");
        double eps = b->barrier.epsilon();
        if (eps >= L)
            throw DomainError(fmt::format("barrier half-width {} not smaller than box L={}", eps, L));
        lambda = build_lambda_eps(sc.resistance.build(-L, L), b->barrier);
        tag.kind = PhaseTag::Kind::EpsBarrier;
        tag.gamma_bar = b->barrier.total_resistance();
        tag.epsilon = eps;
    } else {
        lambda = sc.resistance.build(grid.lower(), grid.upper());
        if (std::holds_alternative<phase::Continuous>(sc.phase)) {
            if (grid.doubled())
                throw ShapeError("the continuous phase lives on a grid without a doubled origin");
            tag.kind = PhaseTag::Kind::Continuous;
        } else {
            if (!grid.doubled())
                throw ShapeError("phase " + phase_name(sc.phase) + " needs a doubled-origin grid");
            iface = interface_weight(sc.phase);
            if (auto s = std::get_if<phase::Snapping>(&sc.phase)) {
                tag.kind = PhaseTag::Kind::Snapping;
                tag.kappa = s->kappa;
            } else if (auto s = std::get_if<phase::SkewSnapping>(&sc.phase)) {
                tag.kind = PhaseTag::Kind::SkewSnapping;
                tag.kappa = s->kappa;
                tag.alpha_skew = s->alpha_skew;
            } else {
                tag.kind = PhaseTag::Kind::Separate;
            }
        }
    }
    if (grid.lower() < lambda.lower() || grid.upper() > lambda.upper())
        throw DomainError(fmt::format("grid [{}, {}] exceeds the resistance domain [{}, {}]",
                                      grid.lower(),
                                      grid.upper(),
                                      lambda.lower(),
                                      lambda.upper()));
    MonotoneMeasure m = sc.speed.build(grid.lower(), grid.upper());

    std::vector<double> mass(n), w(n - 1), k(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double left = i > 0 ? m.mass(0.5 * (grid[i - 1] + grid[i]), grid[i]) : 0.0;
        double right = i + 1 < n ? m.mass(grid[i], 0.5 * (grid[i] + grid[i + 1])) : 0.0;
        mass[i] = left + right;
        if (!(mass[i] > 0.0))
            throw AssemblyError("speed measure gives no mass to the dual cell", i);
    }
    for (std::size_t i = 0; i + 1 < n; ++i) {
        if (grid.doubled() && i == grid.zero_minus()) {
            w[i] = iface;
            continue;
        }
        double dl = lambda.mass(grid[i], grid[i + 1]);
        if (!(dl > 0.0) || !std::isfinite(dl))
            throw AssemblyError(fmt::format("resistance increment {} is not positive", dl), i);
        w[i] = 1.0 / (2.0 * dl);
    }
    return DiscreteForm(grid, std::move(mass), std::move(w), std::move(k), tag);
}

DiscreteForm assemble(const Scenario& sc)
{
    return assemble(sc, make_grid(sc));
}

// ---------------------------------------------------------------- transforms

DiscreteForm kill(const DiscreteForm& form, std::span<const std::pair<std::size_t, double>> weights)
{
    std::vector<double> k = form.killing();
    for (auto [node, weight] : weights) {
        if (!(weight >= 0.0) || !std::isfinite(weight))
            throw ArgumentError(fmt::format("killing weight {} at node {} must be nonnegative", weight, node));
        if (node >= form.size())
            throw ArgumentError(fmt::format("killing node {} is not on the grid", node));
        k[node] += weight;
    }
    PhaseTag tag = form.tag();
    tag.kind = PhaseTag::Kind::Killed;
    return DiscreteForm(form.grid(), form.mass(), form.conductance(), std::move(k), tag);
}

DiscreteForm elastic(const DiscreteForm& form, double kappa)
{
    if (!form.grid().doubled())
        throw ShapeError("the elastic form needs a doubled-origin grid");
    if (!(kappa > 0.0))
        throw ParameterError(fmt::format("kappa={} must be positive", kappa));
    std::vector<double> w = form.conductance();
    w[form.grid().zero_minus()] = 0.0;
    DiscreteForm separate(form.grid(), form.mass(), std::move(w), form.killing(), form.tag());
    std::pair<std::size_t, double> mu[] = {{form.grid().zero_minus(), kappa / 2.0},
                                           {form.grid().zero_plus(), kappa / 2.0}};
    DiscreteForm out = kill(separate, mu);
    PhaseTag tag = out.tag();
    tag.kappa = kappa;
    return DiscreteForm(out.grid(), out.mass(), out.conductance(), out.killing(), tag);
}

DiscreteForm darn(const DiscreteForm& form)
{
    const Grid& g = form.grid();
    if (!g.doubled())
        throw ShapeError("darning needs a doubled-origin grid");
    const std::size_t zm = g.zero_minus(), zp = g.zero_plus(), n = form.size();
    std::vector<double> x, mass, w, k;
    x.reserve(n - 1);
    for (std::size_t i = 0; i < n; ++i) {
        if (i == zp)
            continue;
        x.push_back(g[i]);
        if (i == zm) {
            mass.push_back(form.mass()[zm] + form.mass()[zp]);
            k.push_back(form.killing()[zm] + form.killing()[zp]);
        } else {
            mass.push_back(form.mass()[i]);
            k.push_back(form.killing()[i]);
        }
    }
    for (std::size_t i = 0; i + 1 < n; ++i)
        if (i != zm)
            w.push_back(form.conductance()[i]);
    PhaseTag tag = form.tag();
    tag.kind = PhaseTag::Kind::Darned;
    return DiscreteForm(Grid::from_nodes(std::move(x), OriginMode::Single), std::move(mass), std::move(w), std::move(k), tag);
}

namespace {

struct RunResult
{
    double w_ab = 0.0;
    double kill_a = 0.0;
    double kill_b = 0.0;
};

// Eliminates nodes first..last (inclusive). a / b are the kept neighbours or
// npos for a dangling run.
RunResult eliminate_run(const DiscreteForm& f, std::size_t first, std::size_t last, std::size_t a, std::size_t b)
{
    const auto& w = f.conductance();
    const auto& k = f.killing();
    const std::size_t len = last - first + 1;
    double c_a = a != Grid::npos ? w[a] : 0.0;
    double c_b = b != Grid::npos ? w[last] : 0.0;

    bool killing = false, broken = false;
    for (std::size_t j = first; j <= last; ++j)
        killing = killing || k[j] != 0.0;
    for (std::size_t j = first; j < last; ++j)
        broken = broken || w[j] == 0.0;
    broken = broken || c_a == 0.0 || c_b == 0.0;

    RunResult r;
    if (!killing && !broken) {
        if (a == Grid::npos || b == Grid::npos)
            return r; // a dangling chain without killing is invisible to the trace
        double resistance = 1.0 / c_a;
        for (std::size_t j = first; j < last; ++j)
            resistance += 1.0 / w[j];
        resistance += 1.0 / c_b;
        r.w_ab = 1.0 / resistance;
        return r;
    }

    // every piece between zero edges must be tied down by killing or by a
    // positive edge to a kept node
    std::size_t seg = first;
    while (seg <= last) {
        std::size_t end = seg;
        while (end < last && w[end] != 0.0)
            ++end;
        bool anchored = (seg == first && c_a > 0.0) || (end == last && c_b > 0.0);
        for (std::size_t j = seg; j <= end && !anchored; ++j)
            anchored = k[j] > 0.0;
        if (!anchored)
            throw NumericalError(fmt::format(
                "singular eliminated block on nodes {}..{}: no killing and no path to a kept node (condition estimate inf)",
                seg,
                end));
        seg = end + 1;
    }

    std::vector<double> diag(len), off(len - 1);
    for (std::size_t j = 0; j < len; ++j)
        diag[j] = f.diagonal(first + j);
    for (std::size_t j = 0; j + 1 < len; ++j)
        off[j] = -w[first + j];
    SymTridiagonal B(std::move(diag), std::move(off));
    if (a != Grid::npos) {
        std::vector<double> e(len, 0.0);
        e.front() = c_a;
        B.solve_in_place(e);
        r.kill_a = c_a - c_a * e.front();
    }
    if (b != Grid::npos) {
        std::vector<double> e(len, 0.0);
        e.back() = c_b;
        B.solve_in_place(e);
        r.kill_b = c_b - c_b * e.back();
        if (a != Grid::npos)
            r.w_ab = c_a * e.front();
    }
    r.kill_a -= r.w_ab;
    r.kill_b -= r.w_ab;
    return r;
}

} // namespace

DiscreteForm trace_schur(const DiscreteForm& form, std::span<const std::size_t> keep)
{
    Grid g = form.grid().subset(keep);
    const std::size_t m = keep.size();
    std::vector<double> mass(m), k(m), w(m > 0 ? m - 1 : 0);
    for (std::size_t j = 0; j < m; ++j) {
        mass[j] = form.mass()[keep[j]];
        k[j] = form.killing()[keep[j]];
    }
    if (keep.front() > 0) {
        auto r = eliminate_run(form, 0, keep.front() - 1, Grid::npos, keep.front());
        k[0] += r.kill_b;
    }
    if (keep.back() + 1 < form.size()) {
        auto r = eliminate_run(form, keep.back() + 1, form.size() - 1, keep.back(), Grid::npos);
        k[m - 1] += r.kill_a;
    }
    for (std::size_t j = 0; j + 1 < m; ++j) {
        std::size_t a = keep[j], b = keep[j + 1];
        if (b == a + 1) {
            w[j] = form.conductance()[a];
            continue;
        }
        auto r = eliminate_run(form, a + 1, b - 1, a, b);
        w[j] = r.w_ab;
        k[j] += r.kill_a;
        k[j + 1] += r.kill_b;
    }
    PhaseTag tag = form.tag();
    if (m != form.size())
        tag.kind = PhaseTag::Kind::Trace;
    return DiscreteForm(std::move(g), std::move(mass), std::move(w), std::move(k), tag);
}

void write_triplets_csv(const DiscreteForm& form, const std::string& path)
{
    auto out = fmt::output_file(path);
    out.print("row,col,value\n");
    for (const auto& t : form.triplets())
        out.print("{},{},{:.17g}\n", t.row, t.col, t.value);
}

void write_mass_csv(const DiscreteForm& form, const std::string& path)
{
    auto out = fmt::output_file(path);
    out.print("index,x,mass\n");
    for (std::size_t i = 0; i < form.size(); ++i)
        out.print("{},{:.17g},{:.17g}\n", i, form.grid()[i], form.mass()[i]);
}

} // namespace stifflab
