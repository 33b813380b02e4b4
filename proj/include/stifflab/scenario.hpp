#pragma once

#include "stifflab/measures.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace stifflab {

/// Declarative description of a measure, realized on a requested interval.
struct MeasureSpec
{
    enum class Kind
    {
        Lebesgue,
        Conductivity, ///< dλ = dx / a(x)
        CantorSum,    ///< w_leb dx + w_cantor dc
        Tabulated,    ///< (x, cdf) rows
        Density       ///< piecewise-constant density on breaks
    };

    Kind kind = Kind::Lebesgue;
    Conductivity conductivity = Conductivity::const_one();
    int cantor_level = 20;
    double lebesgue_weight = 1.0;
    double cantor_weight = 1.0;
    std::vector<double> x; ///< tabulated abscissae or density breaks
    std::vector<double> y; ///< tabulated cdf values or densities

    static MeasureSpec lebesgue() { return {}; }
    static MeasureSpec from_conductivity(Conductivity a);
    static MeasureSpec cantor(int level, double lebesgue_weight = 1.0, double cantor_weight = 1.0);

    /// Realizes the measure on [lo, hi]. Tabulated and density measures keep
    /// their own domain, which must cover [lo, hi].
    MonotoneMeasure build(double lo, double hi) const;
};

struct GridPolicy
{
    double h = 0.01;       ///< uniform spacing (ignored when nodes > 0)
    std::size_t nodes = 0; ///< total node count; for a doubled origin split evenly per side
    std::size_t barrier_cells = 16;
};

namespace phase {
struct Separate
{
};
struct Snapping
{
    double kappa;
};
struct SkewSnapping
{
    double kappa;
    double alpha_skew;
};
struct Continuous
{
};
/// A resistive layer of half-width epsilon: the ε-barrier problem on ℝ.
struct EpsBarrier
{
    BarrierSpec barrier;
};
} // namespace phase

using Phase = std::variant<phase::Separate, phase::Snapping, phase::SkewSnapping, phase::Continuous, phase::EpsBarrier>;

/// Full problem description.
struct Scenario
{
    MeasureSpec speed;
    MeasureSpec resistance;
    double box_half_width = 5.0;
    GridPolicy grid;
    Phase phase = phase::Continuous{};
    std::uint64_t seed = 1;

    /// Brownian speed and resistance (Lebesgue both) in the given phase.
    static Scenario brownian(Phase phase, double box_half_width = 5.0, double h = 0.01);
};

/// kappa = 2 / gamma_bar.
double kappa_from_gamma_bar(double gamma_bar);

std::string phase_name(const Phase& phase);

} // namespace stifflab
