#include "stifflab/scenario.hpp"

#include "stifflab/errors.hpp"

#include <fmt/format.h>

#include <cmath>

namespace stifflab {

MeasureSpec MeasureSpec::from_conductivity(Conductivity a)
{
    MeasureSpec s;
    s.kind = Kind::Conductivity;
    s.conductivity = std::move(a);
    return s;
}

MeasureSpec MeasureSpec::cantor(int level, double lebesgue_weight, double cantor_weight)
{
    MeasureSpec s;
    s.kind = Kind::CantorSum;
    s.cantor_level = level;
    s.lebesgue_weight = lebesgue_weight;
    s.cantor_weight = cantor_weight;
    return s;
}

MonotoneMeasure MeasureSpec::build(double lo, double hi) const
{
    auto covering = [&](MonotoneMeasure m) {
        if (m.lower() > lo || m.upper() < hi)
            throw DomainError(fmt::format("measure table covers [{}, {}] but [{}, {}] is required",
                                          m.lower(),
                                          m.upper(),
                                          lo,
                                          hi));
        return m;
    };
    switch (kind) {
    case Kind::Lebesgue:
        return MonotoneMeasure::lebesgue(lo, hi);
    case Kind::Conductivity:
        return MonotoneMeasure::from_conductivity(conductivity, lo, hi);
    case Kind::CantorSum:
        return MonotoneMeasure::cantor_sum(lo, hi, cantor_level, lebesgue_weight, cantor_weight);
    case Kind::Tabulated:
        return covering(MonotoneMeasure::tabulated(x, y));
    case Kind::Density:
        return covering(MonotoneMeasure::piecewise_density(x, y));
    }
    return MonotoneMeasure::lebesgue(lo, hi);
}

Scenario Scenario::brownian(Phase phase, double box_half_width, double h)
{
    Scenario s;
    s.phase = std::move(phase);
    s.box_half_width = box_half_width;
    s.grid.h = h;
    return s;
}

double kappa_from_gamma_bar(double gamma_bar)
{
    if (!(gamma_bar > 0.0) || !std::isfinite(gamma_bar))
        throw ParameterError(fmt::format("gamma_bar={} must be positive and finite", gamma_bar));
    return 2.0 / gamma_bar;
}

std::string phase_name(const Phase& phase)
{
    struct V
    {
        std::string operator()(const phase::Separate&) const { return "separate"; }
        std::string operator()(const phase::Snapping& p) const { return fmt::format("snapping(kappa={})", p.kappa); }
        std::string operator()(const phase::SkewSnapping& p) const
        {
            return fmt::format("skew(kappa={}, alpha_skew={})", p.kappa, p.alpha_skew);
        }
        std::string operator()(const phase::Continuous&) const { return "continuous"; }
        std::string operator()(const phase::EpsBarrier& p) const
        {
            return fmt::format("eps-barrier(eps={}, gamma_bar={})", p.barrier.epsilon(), p.barrier.total_resistance());
        }
    };
    return std::visit(V{}, phase);
}

} // namespace stifflab
