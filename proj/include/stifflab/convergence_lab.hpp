#pragma once

// Experiments on families of ε-barrier forms: resolvent-convergence sweeps
// toward the separate / snapping / continuous limits, the snapping-out
// resolvent identity, continuity in the total resistance, and two-time
// functionals by semigroup composition.
//
// Comparisons happen on the doubled grid 𝔾_h of the base scenario: the
// ε-barrier grid is that grid pushed apart by ±ε with the layer resolved in
// between, so each node outside the layer has a partner on 𝔾_h; the layer's
// interior nodes are left out of the norm. Norms are L²(m) with the masses
// of 𝔾_h.

#include "stifflab/evolve.hpp"
#include "stifflab/functions.hpp"
#include "stifflab/grid_assembly.hpp"

#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace stifflab {

/// Barrier half-width -> barrier. Lejay: gamma(dx) = (kappa eps)^alpha_exponent dx.
/// Profile: gamma(dx) = eps^exponent / b(x / eps) dx with b a tabulated
/// conductivity on [-1, 1].
struct BarrierFamily
{
    enum class Kind
    {
        Lejay,
        Profile
    };
    Kind kind = Kind::Lejay;
    double kappa = 1.0;
    double alpha_exponent = -1.0;
    std::vector<double> profile_nodes;
    std::vector<double> profile_values;
    double exponent = -1.0;

    static BarrierFamily lejay(double kappa, double alpha_exponent);

    BarrierSpec make(double eps) const;
    double gamma_bar(double eps) const;
    /// Limit of gamma_bar(eps) as eps -> 0: 0, finite, or +inf.
    double limit_gamma_bar() const;
};

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// The limit form for total resistance gamma_bar: separate (inf), snapping
/// with kappa = 2/gamma_bar, or continuous (0). Continuous forms live on the
/// single-origin version of the base grid.
DiscreteForm assemble_limit(const Scenario& base, double gamma_bar);

/// ε-barrier form built on the base scenario's doubled grid.
DiscreteForm assemble_barrier_form(const Scenario& base, const BarrierSpec& barrier);

/// The base scenario's doubled grid 𝔾_h.
Grid base_doubled_grid(const Scenario& base);

/// For every node of the doubled grid, its partner index on the ε grid.
std::vector<std::size_t> transport_indices(const Grid& doubled, const Grid& eps_grid);

/// A solution of any phase viewed on the doubled grid: ε-barrier solutions
/// are transported, continuous ones get u(0) duplicated.
std::vector<double> to_doubled_view(const DiscreteForm& form, std::span<const double> u, const Grid& doubled);

/// Samples f on the form's grid, transported through T_eps for ε-barrier forms.
std::vector<double> sample_for(const DiscreteForm& form, const GridFunction& f);

/// ||u - v||_{L²(m)} with the masses of `metric` (a doubled-grid form).
double l2_distance(const DiscreteForm& metric, std::span<const double> u, std::span<const double> v);

struct SweepSpec
{
    Scenario base;
    BarrierFamily barrier;
    double eps0 = 0.2;
    int n_min = 0;
    int n_max = 6;
    std::optional<double> target_gamma_bar; ///< default: the family's limit
    std::vector<Probe> probes;
    std::vector<double> alphas;
    double tolerance = 1e-2;
    std::string run_id = "sweep";
    int threads = 0;

    /// eps_n = 2^{-n} eps0
    double eps(int n) const;
    double target() const;
};

struct SweepRow
{
    std::string run_id;
    int n = 0;
    double eps = 0.0;
    double gamma_bar_n = 0.0;
    double hypothesis_qty = 0.0;
    std::string f_id;
    double alpha = 0.0;
    double l2_error = 0.0;
    double jump = 0.0; ///< u(+eps) - u(-eps) of the barrier solution
    double flux_res_plus = 0.0;
    double flux_res_minus = 0.0;
    double grid_h = 0.0;
    double box_L = 0.0;
};

struct SweepVerdict
{
    std::string f_id;
    double alpha = 0.0;
    bool decreasing = false; ///< over the last three rows
    double final_error = 0.0;
    bool pass = false; ///< decreasing and final error below tolerance
};

struct SweepReport
{
    std::string run_id;
    std::string target_phase;
    double target_gamma_bar = 0.0;
    std::vector<SweepRow> rows; ///< ordered by n, then probe, then alpha
    std::vector<SweepVerdict> verdicts;
    /// hypothesis quantity decreasing over n
    bool hypothesis_decreasing = false;
    /// hypothesis quantity not shrinking toward 0 (ratio of last to first above 1/2)
    bool hypothesis_flagged = false;
    bool pass() const;
};

/// sup_x m([x, x+eps]) (γ̄ + sup_x λ([x, x+eps])) on the base box.
double hypothesis_quantity(const Scenario& base, double eps, double gamma_bar);

SweepReport run_phase_sweep(const SweepSpec& spec);

struct KappaLockResult
{
    std::vector<int> j;
    std::vector<double> kappa;
    std::vector<double> error;
    int best_j = 0;
    double kappa_ref = 0.0; ///< 2 / gamma_bar(n)
};

/// Resolvent error of the n-th barrier form against snapping forms with
/// kappa = 2/gamma_bar(n) · 2^{j/8}, j = -8..8.
KappaLockResult kappa_lock(const SweepSpec& spec, int n, const Probe& f, double alpha);

struct IdentityCheck
{
    double max_abs_error = 0.0; ///< snapping resolvent vs its elastic reconstruction
    double denominator = 0.0;   ///< 1 - <U mu, mu> / |mu|
    double uam_gap = 0.0;       ///< |(U mu, g)_m - <R^mu g, mu>|
};

/// Builds the snapping form and its elastic companion on the scenario's
/// doubled grid and rebuilds the snapping resolvent from the elastic one.
IdentityCheck check_resolvent_identity(const Scenario& scenario, double kappa, double alpha, const GridFunction& f, const GridFunction& g = {});

struct ContinuityRow
{
    int l = 0;
    double gamma_bar = 0.0;
    double l2_error = 0.0;
    double jump = 0.0; ///< u(0+) - u(0-)
};

std::vector<ContinuityRow> run_gamma_continuity(const Scenario& base,
                                                const std::vector<double>& gamma_sequence,
                                                double gamma_limit,
                                                double alpha,
                                                const GridFunction& f);

struct FddRow
{
    int n = 0;
    double eps = 0.0;
    double value_eps = 0.0;
    double value_limit = 0.0;
    double diff = 0.0;
};

struct FddOptions
{
    double dt = 1e-3;
};

/// E_{h m}[f1(X_t1) f2(X_t2)] = ∫ h P_t1(f1 P_{t2-t1} f2) dm / ∫ h dm for
/// every barrier form of the sweep and for the limit form.
std::vector<FddRow> run_fdd_check(const SweepSpec& spec,
                                  double t1,
                                  double t2,
                                  const GridFunction& f1,
                                  const GridFunction& f2,
                                  const GridFunction& h_density,
                                  const FddOptions& options = {});

/// ∫ h P_t1(f1 P_{t2-t1} f2) dm / ∫ h dm on one form.
double two_time_functional(const DiscreteForm& form,
                           double t1,
                           double t2,
                           const GridFunction& f1,
                           const GridFunction& f2,
                           const GridFunction& h_density,
                           double dt);

} // namespace stifflab
