#pragma once

// Path-level simulation of snapping-out processes.
//
// run_snob: reflecting Brownian motion on one half of 𝔾, killed when its
// local time at the origin exceeds an Exp(kappa) threshold, then reborn at
// 0+ or 0- with probability 1/2 each. Local time is the Skorokhod regulator
// of the reflected path, sampled exactly per step together with the
// endpoint.
//
// run_ctmc: exact continuous-time Markov chain with generator -M^{-1}A for
// any DiscreteForm (the discrete shadow of a general snapping-out diffusion).

#include "stifflab/functions.hpp"
#include "stifflab/grid_assembly.hpp"

#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <variant>
#include <vector>

namespace stifflab {

/// A point of 𝔾 (side Minus / Plus, coordinate >= 0) or of ℝ (Origin at 0).
struct GPoint
{
    Side side = Side::Plus;
    double coord = 0.0;
    bool dead = false;

    double x() const { return side == Side::Minus ? -coord : coord; }
    static GPoint at(double x, Side side);
    bool operator==(const GPoint&) const = default;
};

using PathRng = std::mt19937_64;

/// Independent stream for one path, derived from (seed, path index) only.
PathRng path_rng(std::uint64_t seed, std::uint64_t path);

struct PathState
{
    GPoint pos;
    double local_time = 0.0; ///< since the last rebirth
    double threshold = std::numeric_limits<double>::infinity();
    double t = 0.0;
};

struct ReflectedStep
{
    double x;       ///< reflected endpoint
    double d_local; ///< increment of the Skorokhod local time
};

/// Exact joint sample of (R_{t+h}, L_{t+h} - L_t) for reflected BM from x >= 0.
ReflectedStep sample_reflected_step(double x, double h, PathRng& rng);

/// Advances position, local time and clock by one exact step on the current side.
PathState step_reflected_bm(PathState state, double h, PathRng& rng);

enum class EventKind
{
    Rebirth,
    Crossing,
    Killed
};

struct PathEvent
{
    std::size_t path;
    double time;
    EventKind kind;
    Side side; ///< side after the event (rebirth / crossing), side left (killed)
};

struct McOptions
{
    std::vector<double> snapshot_times;
    /// first-passage target on 𝔾 (SNOB) ...
    std::optional<GPoint> hit_target;
    /// ... or node index (CTMC)
    std::optional<std::size_t> hit_node;
    /// occupation integrand and the horizons at which ∫_0^t f(Y_s) ds is recorded
    GridFunction occupation_f;
    std::vector<double> occupation_times;
    bool record_events = true;
    int threads = 0;
    double max_work = 5e10; ///< resource guard on n_paths · T / h (or expected jumps)
};

struct PathEnsemble
{
    std::size_t n_paths = 0;
    std::uint64_t seed = 0;
    double h = 0.0; ///< step size (0 for the exact CTMC)
    double T = 0.0;
    double kappa = 0.0;
    std::vector<double> snapshot_times;
    std::vector<std::vector<GPoint>> snapshots; ///< [time][path]
    std::vector<std::vector<long>> snapshot_nodes; ///< CTMC only, -1 after killing
    std::vector<PathEvent> events;              ///< grouped by path, increasing time
    std::vector<double> hit_times;              ///< +inf when not hit before T
    std::vector<double> occupation_times;
    std::vector<std::vector<double>> occupation; ///< [horizon][path]

    std::size_t count(EventKind kind) const;
};

/// SNOB started at x0. Raises ParameterError for kappa <= 0 and
/// ResourceError when n_paths · T / h exceeds the work budget.
PathEnsemble run_snob(GPoint x0, double kappa, double h, double T, std::size_t n_paths, std::uint64_t seed, const McOptions& opts = {});

/// Exact CTMC for the form's generator started at node x0_node.
PathEnsemble run_ctmc(const DiscreteForm& form, std::size_t x0_node, double T, std::size_t n_paths, std::uint64_t seed, const McOptions& opts = {});

namespace functional {
struct MeanAt
{
    double t;
    GridFunction f;
};
/// f1(Y_t1) f2(Y_t2)
struct ProductAt
{
    double t1;
    GridFunction f1;
    double t2;
    GridFunction f2;
};
/// 1{σ_target < T}
struct HittingBefore
{
    double T;
};
/// (1/t) ∫_0^t f(Y_s) ds for the configured occupation integrand
struct ErgodicAverage
{
    double t;
};
} // namespace functional

using Functional = std::variant<functional::MeanAt, functional::ProductAt, functional::HittingBefore, functional::ErgodicAverage>;

struct Estimate
{
    double value = 0.0;
    double std_error = 0.0;
};

/// Sample mean and standard error; dead paths contribute 0. Requests for a
/// time not among the recorded snapshots / horizons raise ArgumentError.
Estimate estimate(const PathEnsemble& ensemble, const Functional& functional);

} // namespace stifflab
