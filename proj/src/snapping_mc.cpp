#include "stifflab/snapping_mc.hpp"

#include "stifflab/errors.hpp"
#include "stifflab/parallel.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace stifflab {

GPoint GPoint::at(double x, Side side)
{
    if (side == Side::Origin)
        return {Side::Origin, 0.0, false};
    if (side == Side::Minus)
        return {Side::Minus, -x, false};
    return {Side::Plus, x, false};
}

PathRng path_rng(std::uint64_t seed, std::uint64_t path)
{
    std::seed_seq seq{static_cast<std::uint32_t>(seed),
                      static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(path),
                      static_cast<std::uint32_t>(path >> 32)};
    return PathRng(seq);
}

namespace {

double uniform_open_closed(PathRng& rng)
{
    // (0, 1]
    return 1.0 - std::generate_canonical<double, 53>(rng);
}

double std_normal(PathRng& rng)
{
    std::normal_distribution<double> z;
    return z(rng);
}

Side coin(PathRng& rng)
{
    return (rng() >> 63) ? Side::Plus : Side::Minus;
}

double exponential(PathRng& rng, double rate)
{
    return -std::log(uniform_open_closed(rng)) / rate;
}

std::size_t steps_for(double t, double h)
{
    return static_cast<std::size_t>(std::llround(t / h));
}

} // namespace

ReflectedStep sample_reflected_step(double x, double h, PathRng& rng)
{
    const double w = x + std::sqrt(h) * std_normal(rng);
    const double u = uniform_open_closed(rng);
    const double d = w - x;
    // minimum of the free Brownian bridge from x to w over the step
    const double m = 0.5 * (x + w - std::sqrt(d * d - 2.0 * h * std::log(u)));
    const double dl = std::max(0.0, -m);
    return {w + dl, dl};
}

PathState step_reflected_bm(PathState s, double h, PathRng& rng)
{
    auto step = sample_reflected_step(s.pos.coord, h, rng);
    s.pos.coord = step.x;
    s.local_time += step.d_local;
    s.t += h;
    return s;
}

std::size_t PathEnsemble::count(EventKind kind) const
{
    return static_cast<std::size_t>(
        std::count_if(events.begin(), events.end(), [kind](const PathEvent& e) { return e.kind == kind; }));
}

namespace {

void validate_common(double T, std::size_t n_paths, const McOptions& opts)
{
    if (!(T > 0.0) || !std::isfinite(T))
        throw ParameterError(fmt::format("horizon T={} must be positive", T));
    if (n_paths == 0)
        throw ParameterError("at least one path is required");
    for (double t : opts.snapshot_times)
        if (!(t >= 0.0) || t > T * (1.0 + 1e-12))
            throw ArgumentError(fmt::format("snapshot time {} outside [0, {}]", t, T));
    for (double t : opts.occupation_times)
        if (!(t > 0.0) || t > T * (1.0 + 1e-12))
            throw ArgumentError(fmt::format("occupation horizon {} outside (0, {}]", t, T));
    if (!opts.occupation_times.empty() && !opts.occupation_f)
        throw ArgumentError("occupation horizons given without an occupation function");
}

void init_ensemble(PathEnsemble& e, std::size_t n_paths, std::uint64_t seed, double T, const McOptions& opts)
{
    e.n_paths = n_paths;
    e.seed = seed;
    e.T = T;
    e.snapshot_times = opts.snapshot_times;
    e.snapshots.assign(opts.snapshot_times.size(), std::vector<GPoint>(n_paths));
    e.occupation_times = opts.occupation_times;
    e.occupation.assign(opts.occupation_times.size(), std::vector<double>(n_paths, 0.0));
    e.hit_times.assign(n_paths, std::numeric_limits<double>::infinity());
}

void gather_events(PathEnsemble& e, std::vector<std::vector<PathEvent>>& per_path)
{
    std::size_t total = 0;
    for (const auto& v : per_path)
        total += v.size();
    e.events.reserve(total);
    for (auto& v : per_path)
        e.events.insert(e.events.end(), v.begin(), v.end());
}

} // namespace

PathEnsemble run_snob(GPoint x0, double kappa, double h, double T, std::size_t n_paths, std::uint64_t seed, const McOptions& opts)
{
    if (!(kappa > 0.0) || !std::isfinite(kappa))
        throw ParameterError(fmt::format("kappa={} must be positive", kappa));
    if (!(h > 0.0) || h > T)
        throw ParameterError(fmt::format("step h={} must lie in (0, T]", h));
    if (x0.side == Side::Origin || x0.coord < 0.0)
        throw ArgumentError("SNOB start must be a point of 𝔾 (side - or +, coordinate >= 0)");
    validate_common(T, n_paths, opts);
    const std::size_t steps = std::max<std::size_t>(1, steps_for(T, h));
    const double dt = T / static_cast<double>(steps);
    const double work = static_cast<double>(n_paths) * static_cast<double>(steps);
    if (work > opts.max_work)
        throw ResourceError(fmt::format("{:.3g} path steps exceed the budget of {:.3g}", work, opts.max_work));

    PathEnsemble e;
    init_ensemble(e, n_paths, seed, T, opts);
    e.h = dt;
    e.kappa = kappa;

    std::vector<std::size_t> snap_step, occ_step;
    for (double t : opts.snapshot_times)
        snap_step.push_back(steps_for(t, dt));
    for (double t : opts.occupation_times)
        occ_step.push_back(steps_for(t, dt));
    std::vector<std::vector<PathEvent>> per_path(n_paths);

    auto simulate = [&](std::size_t p) {
        PathRng rng = path_rng(seed, p);
        PathState s;
        s.pos = x0;
        s.threshold = exponential(rng, kappa);
        auto& events = per_path[p];
        const auto& tgt = opts.hit_target;
        double hit = std::numeric_limits<double>::infinity();
        if (tgt && tgt->side == s.pos.side && tgt->coord == s.pos.coord)
            hit = 0.0;
        double occ = 0.0;
        double f_prev = opts.occupation_f ? opts.occupation_f(s.pos.x(), s.pos.side) : 0.0;
        for (std::size_t j = 0; j < snap_step.size(); ++j)
            if (snap_step[j] == 0)
                e.snapshots[j][p] = s.pos;

        for (std::size_t k = 1; k <= steps; ++k) {
            const double before = s.pos.coord;
            auto step = sample_reflected_step(before, dt, rng);
            s.pos.coord = step.x;
            s.local_time += step.d_local;
            s.t = static_cast<double>(k) * dt;
            if (tgt && std::isinf(hit) && tgt->side == s.pos.side) {
                bool crossed = tgt->coord == 0.0 ? step.d_local > 0.0
                                                 : (before - tgt->coord) * (step.x - tgt->coord) <= 0.0;
                if (crossed)
                    hit = s.t;
            }
            if (s.local_time > s.threshold) {
                // rebirth logged at the end of the step in which the threshold was crossed
                s.pos = {coin(rng), 0.0, false};
                s.local_time = 0.0;
                s.threshold = exponential(rng, kappa);
                if (opts.record_events)
                    events.push_back({p, s.t, EventKind::Rebirth, s.pos.side});
                if (tgt && std::isinf(hit) && tgt->side == s.pos.side && tgt->coord == 0.0)
                    hit = s.t;
            }
            if (opts.occupation_f) {
                double f_now = opts.occupation_f(s.pos.x(), s.pos.side);
                occ += 0.5 * dt * (f_prev + f_now);
                f_prev = f_now;
                for (std::size_t j = 0; j < occ_step.size(); ++j)
                    if (occ_step[j] == k)
                        e.occupation[j][p] = occ;
            }
            for (std::size_t j = 0; j < snap_step.size(); ++j)
                if (snap_step[j] == k)
                    e.snapshots[j][p] = s.pos;
        }
        e.hit_times[p] = hit;
    };
    parallel_for(n_paths, resolve_threads(opts.threads), simulate);
    gather_events(e, per_path);
    return e;
}

PathEnsemble run_ctmc(const DiscreteForm& form, std::size_t x0_node, double T, std::size_t n_paths, std::uint64_t seed, const McOptions& opts)
{
    validate_common(T, n_paths, opts);
    const std::size_t n = form.size();
    if (x0_node >= n)
        throw ArgumentError(fmt::format("start node {} is not on the grid", x0_node));
    const auto& w = form.conductance();
    const auto& kw = form.killing();
    const auto& m = form.mass();
    std::vector<double> up(n, 0.0), down(n, 0.0), die(n, 0.0), total(n, 0.0);
    double max_rate = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (i + 1 < n && !(w[i] >= 0.0))
            throw InvariantViolation(fmt::format("positive off-diagonal stiffness {} on edge {}", -w[i], i));
        if (!(kw[i] >= 0.0))
            throw InvariantViolation(fmt::format("negative killing weight {} at node {}", kw[i], i));
        if (!(m[i] > 0.0))
            throw InvariantViolation(fmt::format("non-positive mass {} at node {}", m[i], i));
        if (i + 1 < n)
            up[i] = w[i] / m[i];
        if (i > 0)
            down[i] = w[i - 1] / m[i];
        die[i] = kw[i] / m[i];
        total[i] = up[i] + down[i] + die[i];
        max_rate = std::max(max_rate, total[i]);
    }
    const double work = static_cast<double>(n_paths) * T * max_rate;
    if (work > opts.max_work)
        throw ResourceError(fmt::format("about {:.3g} jumps exceed the budget of {:.3g}", work, opts.max_work));

    PathEnsemble e;
    init_ensemble(e, n_paths, seed, T, opts);
    e.kappa = form.tag().kappa;
    e.snapshot_nodes.assign(opts.snapshot_times.size(), std::vector<long>(n_paths, -1));

    const Grid& g = form.grid();
    const bool doubled = g.doubled();
    auto point = [&](std::size_t node) { return GPoint::at(g[node], g.side(node)); };
    std::vector<double> f_node(n, 0.0);
    if (opts.occupation_f)
        for (std::size_t i = 0; i < n; ++i)
            f_node[i] = opts.occupation_f(g[i], g.side(i));

    std::vector<std::size_t> snap_order(opts.snapshot_times.size());
    std::iota(snap_order.begin(), snap_order.end(), 0);
    std::sort(snap_order.begin(), snap_order.end(), [&](auto a, auto b) { return opts.snapshot_times[a] < opts.snapshot_times[b]; });
    std::vector<std::size_t> occ_order(opts.occupation_times.size());
    std::iota(occ_order.begin(), occ_order.end(), 0);
    std::sort(occ_order.begin(), occ_order.end(), [&](auto a, auto b) { return opts.occupation_times[a] < opts.occupation_times[b]; });
    std::vector<std::vector<PathEvent>> per_path(n_paths);

    auto simulate = [&](std::size_t p) {
        PathRng rng = path_rng(seed, p);
        auto& events = per_path[p];
        std::size_t node = x0_node;
        bool dead = false;
        double t = 0.0, occ = 0.0;
        double hit = (opts.hit_node && *opts.hit_node == node) ? 0.0 : std::numeric_limits<double>::infinity();
        std::size_t si = 0, oi = 0;
        auto flush = [&](double until) {
            // snapshots and horizons strictly before `until` see the current state
            while (si < snap_order.size() && opts.snapshot_times[snap_order[si]] < until) {
                std::size_t j = snap_order[si++];
                if (dead) {
                    e.snapshots[j][p] = GPoint{Side::Origin, 0.0, true};
                } else {
                    e.snapshots[j][p] = point(node);
                    e.snapshot_nodes[j][p] = static_cast<long>(node);
                }
            }
            while (oi < occ_order.size() && opts.occupation_times[occ_order[oi]] < until) {
                std::size_t j = occ_order[oi++];
                double tail = dead ? 0.0 : f_node[node] * (opts.occupation_times[j] - t);
                e.occupation[j][p] = occ + tail;
            }
        };
        for (;;) {
            double r = total[node];
            double tn = r > 0.0 ? t + exponential(rng, r) : std::numeric_limits<double>::infinity();
            if (tn > T) {
                flush(std::numeric_limits<double>::infinity());
                break;
            }
            flush(tn);
            occ += f_node[node] * (tn - t);
            t = tn;
            double u = std::generate_canonical<double, 53>(rng) * r;
            std::size_t from = node;
            if (u < up[node]) {
                node = node + 1;
            } else if (u < up[node] + down[node] || die[node] == 0.0) {
                node = down[node] > 0.0 ? node - 1 : node + 1;
            } else {
                dead = true;
                if (opts.record_events)
                    events.push_back({p, t, EventKind::Killed, g.side(from)});
                flush(std::numeric_limits<double>::infinity());
                break;
            }
            if (doubled && opts.record_events && std::min(from, node) == g.zero_minus() && std::max(from, node) == g.zero_plus())
                events.push_back({p, t, EventKind::Crossing, g.side(node)});
            if (opts.hit_node && std::isinf(hit) && node == *opts.hit_node)
                hit = t;
        }
        e.hit_times[p] = hit;
    };
    parallel_for(n_paths, resolve_threads(opts.threads), simulate);
    gather_events(e, per_path);
    return e;
}

namespace {

std::size_t find_time(const std::vector<double>& times, double t, const char* what)
{
    for (std::size_t j = 0; j < times.size(); ++j)
        if (std::abs(times[j] - t) <= 1e-9 * std::max(1.0, std::abs(t)))
            return j;
    throw ArgumentError(fmt::format("time {} is not among the recorded {}", t, what));
}

Estimate mean_and_error(const std::vector<double>& v)
{
    const double n = static_cast<double>(v.size());
    double mean = 0.0;
    for (double x : v)
        mean += x;
    mean /= n;
    double ss = 0.0;
    for (double x : v)
        ss += (x - mean) * (x - mean);
    double var = v.size() > 1 ? ss / (n - 1.0) : 0.0;
    return {mean, std::sqrt(var / n)};
}

double eval(const GridFunction& f, const GPoint& p)
{
    return p.dead ? 0.0 : f(p.x(), p.side);
}

} // namespace

Estimate estimate(const PathEnsemble& e, const Functional& fn)
{
    std::vector<double> v(e.n_paths);
    if (auto q = std::get_if<functional::MeanAt>(&fn)) {
        const auto& snap = e.snapshots[find_time(e.snapshot_times, q->t, "snapshot times")];
        for (std::size_t p = 0; p < e.n_paths; ++p)
            v[p] = eval(q->f, snap[p]);
    } else if (auto q = std::get_if<functional::ProductAt>(&fn)) {
        const auto& s1 = e.snapshots[find_time(e.snapshot_times, q->t1, "snapshot times")];
        const auto& s2 = e.snapshots[find_time(e.snapshot_times, q->t2, "snapshot times")];
        for (std::size_t p = 0; p < e.n_paths; ++p)
            v[p] = eval(q->f1, s1[p]) * eval(q->f2, s2[p]);
    } else if (auto q = std::get_if<functional::HittingBefore>(&fn)) {
        if (q->T > e.T * (1.0 + 1e-12))
            throw ArgumentError(fmt::format("hitting horizon {} beyond the simulated horizon {}", q->T, e.T));
        for (std::size_t p = 0; p < e.n_paths; ++p)
            v[p] = e.hit_times[p] <= q->T ? 1.0 : 0.0;
    } else if (auto q = std::get_if<functional::ErgodicAverage>(&fn)) {
        const auto& occ = e.occupation[find_time(e.occupation_times, q->t, "occupation horizons")];
        for (std::size_t p = 0; p < e.n_paths; ++p)
            v[p] = occ[p] / q->t;
    }
    return mean_and_error(v);
}

} // namespace stifflab
