#pragma once

// Speed and resistance measures on intervals of the line, conductivities,
// and the barrier construction that produces the resistance of a thin
// layer problem.
//
// Every measure is described by its cumulative distribution function on a
// closed interval [lower, upper]. Densities are a special case; the
// Lebesgue + Cantor example is not absolutely continuous and is handled
// through its CDF directly.

#include <memory>
#include <span>
#include <utility>
#include <vector>

namespace stifflab {

/// Positive conductivity a(x) of a heat equation 1/2 (a u')'.
class Conductivity
{
  public:
    enum class Kind
    {
        ConstOne,
        PowerCusp,  ///< a(x) = |x|^beta ∧ 1
        CustomTable ///< piecewise-linear interpolation, constant outside
    };

    static Conductivity const_one();
    static Conductivity power_cusp(double beta);
    static Conductivity custom_table(std::vector<double> nodes, std::vector<double> values);
    /// Constant conductivity c on the whole line (a one-row table).
    static Conductivity constant(double c);

    Kind kind() const noexcept { return kind_; }
    double beta() const noexcept { return beta_; }

    double operator()(double x) const;

    /// ∫_lo^hi dx / a(x): closed form for the cusp, adaptive Gauss-Kronrod
    /// (relative tolerance 1e-10) per table piece otherwise.
    double reciprocal_integral(double lo, double hi) const;

    /// (min a, max a) over the given nodes; a node exactly at a zero of a
    /// is skipped, so for the cusp the lower bound is h^beta on a grid of
    /// spacing h and shrinks with the grid.
    std::pair<double, double> bounds(std::span<const double> nodes) const;

    /// (min a, max a) on the closed cell [lo, hi].
    std::pair<double, double> cell_bounds(double lo, double hi) const;

  private:
    Kind kind_ = Kind::ConstOne;
    double beta_ = 0.0;
    std::vector<double> nodes_;
    std::vector<double> values_;
};

enum class ConductivityKind
{
    ConstOne,
    PowerCusp,
    CustomTable
};

struct ConductivityParams
{
    double beta = 0.5;
    std::vector<double> nodes;
    std::vector<double> values;
};

/// Builds a conductivity of the named family; beta must lie in (0, 1).
Conductivity conductivity_family(ConductivityKind kind, const ConductivityParams& params);

/// Cantor function on [0, 1], approximated at a finite level: exact at all
/// level-`level` triadic endpoints, linear on the surviving intervals of
/// that level, so the error is at most 2^-level.
double cantor_cdf(double x, int level);

/// A nonnegative atomless Radon measure on [lower, upper], given by its CDF.
class MonotoneMeasure
{
  public:
    enum class Kind
    {
        PiecewiseDensity,
        ConductivityReciprocal,
        CantorSum,
        Tabulated,
        BarrierComposite
    };

    /// Piecewise-constant density on the pieces [breaks[i], breaks[i+1]].
    static MonotoneMeasure piecewise_density(std::vector<double> breaks,
                                             std::vector<double> densities);
    static MonotoneMeasure lebesgue(double lower, double upper);
    /// dλ = dx / a(x) on [lower, upper].
    static MonotoneMeasure from_conductivity(const Conductivity& a, double lower, double upper);
    /// lebesgue_weight·dx + cantor_weight·dc, c the Cantor function on [0, 1].
    static MonotoneMeasure cantor_sum(double lower,
                                      double upper,
                                      int level,
                                      double lebesgue_weight = 1.0,
                                      double cantor_weight = 1.0);
    /// Piecewise-linear CDF through (x, cdf) with both columns strictly
    /// increasing; the first value is used as the anchor.
    static MonotoneMeasure tabulated(std::vector<double> x, std::vector<double> cdf);

    Kind kind() const;
    double lower() const;
    double upper() const;

    /// Measure of [lower, x].
    double cdf(double x) const;
    /// Measure of [lo, hi] (zero when lo == hi).
    double mass(double lo, double hi) const;
    double total() const;
    /// Scale function: the CDF re-anchored so that scale(0) == 0.
    double scale(double x) const;
    /// Cantor level for cantor-sum measures, 0 otherwise.
    int cantor_level() const;

    struct Model;
    explicit MonotoneMeasure(std::shared_ptr<const Model> model);
    const Model& model() const { return *model_; }

  private:
    std::shared_ptr<const Model> model_;
};

/// A resistive barrier of half-width epsilon carrying the measure gamma on
/// (-epsilon, epsilon).
class BarrierSpec
{
  public:
    BarrierSpec(double epsilon, MonotoneMeasure gamma);

    /// Barrier whose resistance has constant density `density` on the layer.
    static BarrierSpec uniform(double epsilon, double density);
    /// The thin-layer family gamma(dx) = (kappa·epsilon)^alpha_exponent dx;
    /// alpha_exponent = -1 is the conductivity kappa·epsilon of the layer.
    static BarrierSpec lejay(double epsilon, double kappa, double alpha_exponent);
    /// Barrier from a conductivity b on the layer, gamma(dx) = dx / b(x).
    static BarrierSpec from_conductivity(double epsilon, const Conductivity& b);

    double epsilon() const noexcept { return epsilon_; }
    const MonotoneMeasure& gamma() const noexcept { return gamma_; }
    /// Total thermal resistance of the layer.
    double total_resistance() const { return gamma_.total(); }

  private:
    double epsilon_;
    MonotoneMeasure gamma_;
};

/// Resistance of the barrier problem: the outer measure shifted away from
/// the origin by ±epsilon plus the barrier measure on the layer. The result
/// lives on [lambda.lower() - eps, lambda.upper() + eps].
MonotoneMeasure build_lambda_eps(const MonotoneMeasure& lambda, const BarrierSpec& barrier);

/// Cell masses mu([x_i, x_{i+1}]) over strictly increasing nodes.
std::vector<double> measure_increments(const MonotoneMeasure& mu, std::span<const double> nodes);

/// sup_x mu([x, x + width]) estimated by scanning [lower, upper - width]
/// with step width/16 (plus the right end).
double window_sup(const MonotoneMeasure& mu, double width);

} // namespace stifflab
