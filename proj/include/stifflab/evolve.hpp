#pragma once

// Resolvents, heat semigroup stepping, one-sided fluxes at 0- / 0+ and the
// interface boundary-condition residuals for any DiscreteForm.

#include "stifflab/grid_assembly.hpp"

#include <span>
#include <vector>

namespace stifflab {

struct ResolventSolve
{
    double alpha = 0.0;
    std::vector<double> rhs;      ///< f on the grid
    std::vector<double> solution; ///< u with (alpha M + A) u = M f
    double residual = 0.0;        ///< ||(alpha M + A) u - M f|| / ||M f||
};

/// Solves (alpha M + A) u = M f. Raises ArgumentError for alpha <= 0 and
/// NumericalError when the relative residual exceeds 1e-10.
ResolventSolve resolvent(const DiscreteForm& form, double alpha, std::span<const double> f);

/// Solves (alpha M + A) u = rhs for a raw right-hand side (no mass weighting).
std::vector<double> solve_shifted(const DiscreteForm& form, double alpha, std::span<const double> rhs);

enum class Scheme
{
    ImplicitEuler,
    CrankNicolson
};

struct HeatOptions
{
    double dt = 1e-3;
    double t_end = 1.0;
    Scheme scheme = Scheme::CrankNicolson;
    std::vector<double> snapshot_times; ///< rounded to the step grid
    /// Crank-Nicolson only: implicit-Euler half-steps replacing the first step.
    int rannacher_halfsteps = 2;
};

struct HeatRun
{
    double dt = 0.0;
    double t_end = 0.0;
    Scheme scheme = Scheme::CrankNicolson;
    std::vector<double> times;
    std::vector<std::vector<double>> snapshots;
    std::vector<double> final;
    /// max_i |(M(u_T - u_0) + A ∫u dt)_i| / max_i |(M u_0)_i|, the weak
    /// identity tested against every nodal hat function.
    double weak_residual = 0.0;
    std::vector<double> l2_norms; ///< L²(m) norm after every step (index 0 = initial)
};

HeatRun step_heat(const DiscreteForm& form, std::span<const double> u0, const HeatOptions& options);

/// One-sided derivative du/dλ on the first cell next to 0- or 0+, oriented
/// toward increasing x.
double flux_at(std::span<const double> u, const DiscreteForm& form, Side side);

struct BcResidual
{
    double r_minus = 0.0;
    double r_plus = 0.0;
    double r_jump = 0.0; ///< u(0+) - u(0-)
};

/// Residuals of the phase's interface condition on the resolvent solution:
/// separate: the raw one-sided fluxes; snapping / skew: flux - 2ω·jump with
/// ω the interface weight (ω = κ/4 gives the κ/2 flux law); continuous:
/// zeros, continuity holding by construction.
BcResidual bc_residual(const DiscreteForm& form, double alpha, std::span<const double> f);
BcResidual bc_residual_of(const DiscreteForm& form, std::span<const double> u);

/// (u, v)_m
double inner_m(const DiscreteForm& form, std::span<const double> u, std::span<const double> v);
double norm_m(const DiscreteForm& form, std::span<const double> u);

} // namespace stifflab
