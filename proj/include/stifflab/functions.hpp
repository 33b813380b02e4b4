#pragma once

#include "stifflab/grid_assembly.hpp"

#include <functional>
#include <string>
#include <vector>

namespace stifflab {

/// A function on 𝔾 (or ℝ): the side tag disambiguates 0- from 0+.
using GridFunction = std::function<double(double x, Side side)>;

struct Probe
{
    std::string id;
    GridFunction f;
};

namespace probes {
/// exp(-x^2)
Probe gauss();
/// sign(x) exp(-|x|), the sign taken from the side at 0
Probe odd_exp();
/// exp(-|x|)
Probe exp_abs();
/// indicator of [lo, hi] on the plus side (lo > 0) or minus side (hi < 0)
Probe indicator(double lo, double hi);
/// indicator of the negative half 𝔾- (1/2 at a single 0 node)
Probe minus_side();
Probe plus_side();
Probe constant(double c);
/// Gaussian bump exp(-(x-mu)^2 / (2 s2))
Probe gaussian(double mu, double s2);

/// Looks up a probe by id: "gauss", "odd_exp", "exp_abs", "minus_side",
/// "plus_side", "one", "indicator:lo:hi".
Probe by_name(const std::string& id);
} // namespace probes

/// Values of f at the grid nodes.
std::vector<double> sample(const Grid& grid, const GridFunction& f);

/// f∘T_eps sampled on an ε-barrier grid: nodes left of the layer see
/// f(x + eps, Minus), nodes right of it f(x - eps, Plus); inside the layer
/// the two one-sided values at 0 are joined linearly.
std::vector<double> sample_transported(const Grid& barrier_grid, double eps, const GridFunction& f);

} // namespace stifflab
