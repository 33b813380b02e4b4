#include "stifflab/measures.hpp"

#include "stifflab/errors.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <variant>

namespace stifflab {

// ---------------------------------------------------------------- conductivity

Conductivity Conductivity::const_one()
{
    return Conductivity{};
}

Conductivity Conductivity::power_cusp(double beta)
{
    if (!(beta > 0.0 && beta < 1.0))
        throw ParameterError(fmt::format("power-cusp exponent beta={} outside (0, 1)", beta));
    Conductivity c;
    c.kind_ = Kind::PowerCusp;
    c.beta_ = beta;
    return c;
}

Conductivity Conductivity::custom_table(std::vector<double> nodes, std::vector<double> values)
{
    if (nodes.empty() || nodes.size() != values.size())
        throw ArgumentError("conductivity table needs equally many nodes and values");
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        if (!std::isfinite(nodes[i]) || !(values[i] > 0.0) || !std::isfinite(values[i]))
            throw ArgumentError(fmt::format("conductivity table row {} is not finite and positive", i));
        if (i > 0 && !(nodes[i] > nodes[i - 1]))
            throw ArgumentError(fmt::format("conductivity table nodes not increasing at row {}", i));
    }
    Conductivity c;
    c.kind_ = Kind::CustomTable;
    c.nodes_ = std::move(nodes);
    c.values_ = std::move(values);
    return c;
}

Conductivity Conductivity::constant(double value)
{
    return custom_table({0.0}, {value});
}

double Conductivity::operator()(double x) const
{
    switch (kind_) {
    case Kind::ConstOne:
        return 1.0;
    case Kind::PowerCusp:
        return std::min(std::pow(std::abs(x), beta_), 1.0);
    case Kind::CustomTable: {
        if (x <= nodes_.front())
            return values_.front();
        if (x >= nodes_.back())
            return values_.back();
        auto it = std::upper_bound(nodes_.begin(), nodes_.end(), x);
        std::size_t j = static_cast<std::size_t>(it - nodes_.begin());
        double t = (x - nodes_[j - 1]) / (nodes_[j] - nodes_[j - 1]);
        return values_[j - 1] + t * (values_[j] - values_[j - 1]);
    }
    }
    return 1.0;
}

namespace {

// odd antiderivative of 1 / (|x|^beta ∧ 1)
double cusp_antiderivative(double x, double beta)
{
    double ax = std::abs(x);
    double v = ax < 1.0 ? std::pow(ax, 1.0 - beta) / (1.0 - beta) : 1.0 / (1.0 - beta) + (ax - 1.0);
    return x < 0.0 ? -v : v;
}

} // namespace

double Conductivity::reciprocal_integral(double lo, double hi) const
{
    if (hi < lo)
        return -reciprocal_integral(hi, lo);
    if (hi == lo)
        return 0.0;
    switch (kind_) {
    case Kind::ConstOne:
        return hi - lo;
    case Kind::PowerCusp:
        return cusp_antiderivative(hi, beta_) - cusp_antiderivative(lo, beta_);
    case Kind::CustomTable: {
        // split at table nodes so that every piece has a smooth integrand
        std::vector<double> cuts{lo};
        for (double x : nodes_)
            if (x > lo && x < hi)
                cuts.push_back(x);
        cuts.push_back(hi);
        double total = 0.0;
        auto inv = [this](double x) { return 1.0 / (*this)(x); };
        for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
            double a = cuts[i], b = cuts[i + 1];
            if (a >= nodes_.back() || b <= nodes_.front()) {
                total += (b - a) * inv(0.5 * (a + b));
                continue;
            }
            total += boost::math::quadrature::gauss_kronrod<double, 15>::integrate(inv, a, b, 15, 1e-10);
        }
        return total;
    }
    }
    return hi - lo;
}

std::pair<double, double> Conductivity::bounds(std::span<const double> nodes) const
{
    double lo = std::numeric_limits<double>::infinity();
    double hi = 0.0;
    for (double x : nodes) {
        double a = (*this)(x);
        if (a <= 0.0)
            continue;
        lo = std::min(lo, a);
        hi = std::max(hi, a);
    }
    return {lo, hi};
}

std::pair<double, double> Conductivity::cell_bounds(double lo, double hi) const
{
    if (hi < lo)
        std::swap(lo, hi);
    switch (kind_) {
    case Kind::ConstOne:
        return {1.0, 1.0};
    case Kind::PowerCusp: {
        double near = (lo <= 0.0 && hi >= 0.0) ? 0.0 : std::min(std::abs(lo), std::abs(hi));
        double far = std::max(std::abs(lo), std::abs(hi));
        return {(*this)(near), (*this)(far)};
    }
    case Kind::CustomTable: {
        double a = (*this)(lo), b = (*this)(hi);
        std::pair<double, double> r{std::min(a, b), std::max(a, b)};
        for (std::size_t i = 0; i < nodes_.size(); ++i)
            if (nodes_[i] > lo && nodes_[i] < hi) {
                r.first = std::min(r.first, values_[i]);
                r.second = std::max(r.second, values_[i]);
            }
        return r;
    }
    }
    return {1.0, 1.0};
}

Conductivity conductivity_family(ConductivityKind kind, const ConductivityParams& params)
{
    switch (kind) {
    case ConductivityKind::ConstOne:
        return Conductivity::const_one();
    case ConductivityKind::PowerCusp:
        return Conductivity::power_cusp(params.beta);
    case ConductivityKind::CustomTable:
        return Conductivity::custom_table(params.nodes, params.values);
    }
    return Conductivity::const_one();
}

// ---------------------------------------------------------------- cantor

double cantor_cdf(double x, int level)
{
    if (x <= 0.0)
        return 0.0;
    if (x >= 1.0)
        return 1.0;
    double result = 0.0;
    double scale = 0.5;
    for (int k = 0; k < level; ++k) {
        x *= 3.0;
        int d = std::min(static_cast<int>(x), 2);
        x -= d;
        if (d == 1)
            return result + scale;
        if (d == 2)
            result += scale;
        scale *= 0.5;
    }
    return result + 2.0 * scale * x;
}

// ---------------------------------------------------------------- measures

struct PiecewiseModel
{
    std::vector<double> breaks;
    std::vector<double> density;
    std::vector<double> cumulative; // mass of [breaks[0], breaks[i]]
};

struct ReciprocalModel
{
    Conductivity a;
    double lower, upper;
};

struct CantorModel
{
    double lower, upper;
    int level;
    double w_leb, w_cantor;
};

struct TabulatedModel
{
    std::vector<double> x, cdf;
};

struct CompositeModel
{
    MonotoneMeasure outer;
    MonotoneMeasure gamma;
    double eps;
};

struct MonotoneMeasure::Model
{
    std::variant<PiecewiseModel, ReciprocalModel, CantorModel, TabulatedModel, CompositeModel> v;
    double lower, upper;
};

MonotoneMeasure::MonotoneMeasure(std::shared_ptr<const Model> model) : model_(std::move(model)) {}

namespace {

double piecewise_cdf(const PiecewiseModel& p, double x)
{
    if (x <= p.breaks.front())
        return 0.0;
    if (x >= p.breaks.back())
        return p.cumulative.back();
    auto it = std::upper_bound(p.breaks.begin(), p.breaks.end(), x);
    std::size_t j = static_cast<std::size_t>(it - p.breaks.begin()) - 1;
    return p.cumulative[j] + p.density[j] * (x - p.breaks[j]);
}

double piecewise_mass(const PiecewiseModel& p, double lo, double hi)
{
    // direct sum over the pieces met by [lo, hi]; avoids cancellation
    auto it = std::upper_bound(p.breaks.begin(), p.breaks.end(), lo);
    std::size_t j = it == p.breaks.begin() ? 0 : static_cast<std::size_t>(it - p.breaks.begin()) - 1;
    double total = 0.0;
    for (; j < p.density.size() && p.breaks[j] < hi; ++j) {
        double a = std::max(lo, p.breaks[j]);
        double b = std::min(hi, p.breaks[j + 1]);
        if (b > a)
            total += p.density[j] * (b - a);
    }
    return total;
}

double tabulated_cdf(const TabulatedModel& t, double x)
{
    if (x <= t.x.front())
        return 0.0;
    if (x >= t.x.back())
        return t.cdf.back() - t.cdf.front();
    auto it = std::upper_bound(t.x.begin(), t.x.end(), x);
    std::size_t j = static_cast<std::size_t>(it - t.x.begin());
    double s = (x - t.x[j - 1]) / (t.x[j] - t.x[j - 1]);
    return (t.cdf[j - 1] - t.cdf.front()) + s * (t.cdf[j] - t.cdf[j - 1]);
}

std::shared_ptr<MonotoneMeasure::Model> make_model(double lower, double upper)
{
    if (!(std::isfinite(lower) && std::isfinite(upper) && upper > lower))
        throw DomainError(fmt::format("measure domain [{}, {}] is empty or not finite", lower, upper));
    auto m = std::make_shared<MonotoneMeasure::Model>();
    m->lower = lower;
    m->upper = upper;
    return m;
}

} // namespace

MonotoneMeasure MonotoneMeasure::piecewise_density(std::vector<double> breaks, std::vector<double> densities)
{
    if (breaks.size() < 2 || densities.size() + 1 != breaks.size())
        throw ArgumentError("piecewise density needs n+1 breaks for n densities");
    for (std::size_t i = 1; i < breaks.size(); ++i)
        if (!(breaks[i] > breaks[i - 1]))
            throw ArgumentError(fmt::format("density breaks not increasing at index {}", i));
    for (std::size_t i = 0; i < densities.size(); ++i)
        if (!(densities[i] >= 0.0) || !std::isfinite(densities[i]))
            throw ArgumentError(fmt::format("density on piece {} is negative or not finite", i));
    auto m = make_model(breaks.front(), breaks.back());
    PiecewiseModel p{std::move(breaks), std::move(densities), {}};
    p.cumulative.assign(p.breaks.size(), 0.0);
    for (std::size_t i = 0; i < p.density.size(); ++i)
        p.cumulative[i + 1] = p.cumulative[i] + p.density[i] * (p.breaks[i + 1] - p.breaks[i]);
    m->v = std::move(p);
    return MonotoneMeasure(m);
}

MonotoneMeasure MonotoneMeasure::lebesgue(double lower, double upper)
{
    return piecewise_density({lower, upper}, {1.0});
}

MonotoneMeasure MonotoneMeasure::from_conductivity(const Conductivity& a, double lower, double upper)
{
    auto m = make_model(lower, upper);
    m->v = ReciprocalModel{a, lower, upper};
    return MonotoneMeasure(m);
}

MonotoneMeasure MonotoneMeasure::cantor_sum(double lower,
                                            double upper,
                                            int level,
                                            double lebesgue_weight,
                                            double cantor_weight)
{
    if (level < 1)
        throw ParameterError(fmt::format("cantor level {} must be positive", level));
    if (!(lebesgue_weight >= 0.0) || !(cantor_weight >= 0.0))
        throw ArgumentError("cantor-sum weights must be nonnegative");
    auto m = make_model(lower, upper);
    m->v = CantorModel{lower, upper, level, lebesgue_weight, cantor_weight};
    return MonotoneMeasure(m);
}

MonotoneMeasure MonotoneMeasure::tabulated(std::vector<double> x, std::vector<double> cdf)
{
    if (x.size() < 2 || x.size() != cdf.size())
        throw ArgumentError("tabulated measure needs at least two (x, cdf) rows");
    for (std::size_t i = 1; i < x.size(); ++i) {
        if (!(x[i] > x[i - 1]))
            throw ArgumentError(fmt::format("tabulated x not strictly increasing at row {}", i));
        if (!(cdf[i] > cdf[i - 1]))
            throw ArgumentError(fmt::format("tabulated cdf not strictly increasing at row {}", i));
    }
    auto m = make_model(x.front(), x.back());
    m->v = TabulatedModel{std::move(x), std::move(cdf)};
    return MonotoneMeasure(m);
}

MonotoneMeasure::Kind MonotoneMeasure::kind() const
{
    return static_cast<Kind>(model_->v.index());
}

double MonotoneMeasure::lower() const
{
    return model_->lower;
}

double MonotoneMeasure::upper() const
{
    return model_->upper;
}

int MonotoneMeasure::cantor_level() const
{
    if (auto c = std::get_if<CantorModel>(&model_->v))
        return c->level;
    return 0;
}

double MonotoneMeasure::cdf(double x) const
{
    return mass(model_->lower, x);
}

double MonotoneMeasure::total() const
{
    return mass(model_->lower, model_->upper);
}

double MonotoneMeasure::mass(double lo, double hi) const
{
    const Model& md = *model_;
    double tol = 1e-12 * (1.0 + std::max(std::abs(md.lower), std::abs(md.upper)));
    if (hi < lo)
        throw ArgumentError(fmt::format("mass query with hi={} < lo={}", hi, lo));
    if (lo < md.lower - tol || hi > md.upper + tol)
        throw DomainError(fmt::format("query [{}, {}] outside measure domain [{}, {}]", lo, hi, md.lower, md.upper));
    lo = std::clamp(lo, md.lower, md.upper);
    hi = std::clamp(hi, md.lower, md.upper);
    if (hi == lo)
        return 0.0;

    struct Visitor
    {
        double lo, hi;
        double operator()(const PiecewiseModel& p) const { return piecewise_mass(p, lo, hi); }
        double operator()(const ReciprocalModel& r) const { return r.a.reciprocal_integral(lo, hi); }
        double operator()(const CantorModel& c) const
        {
            double leb = c.w_leb * (hi - lo);
            double can = c.w_cantor * (cantor_cdf(hi, c.level) - cantor_cdf(lo, c.level));
            return leb + can;
        }
        double operator()(const TabulatedModel& t) const { return tabulated_cdf(t, hi) - tabulated_cdf(t, lo); }
        double operator()(const CompositeModel& c) const
        {
            // left piece: outer shifted by -eps; middle: barrier; right: outer shifted by +eps
            double total = 0.0;
            double a = lo, b = std::min(hi, -c.eps);
            if (b > a)
                total += c.outer.mass(a + c.eps, b + c.eps);
            a = std::max(lo, -c.eps);
            b = std::min(hi, c.eps);
            if (b > a)
                total += c.gamma.mass(a, b);
            a = std::max(lo, c.eps);
            b = hi;
            if (b > a)
                total += c.outer.mass(a - c.eps, b - c.eps);
            return total;
        }
    };
    return std::visit(Visitor{lo, hi}, md.v);
}

double MonotoneMeasure::scale(double x) const
{
    if (!(model_->lower <= 0.0 && model_->upper >= 0.0))
        throw DomainError("scale function needs the origin inside the measure domain");
    return x >= 0.0 ? mass(0.0, x) : -mass(x, 0.0);
}

// ---------------------------------------------------------------- barrier

BarrierSpec::BarrierSpec(double epsilon, MonotoneMeasure gamma) : epsilon_(epsilon), gamma_(std::move(gamma))
{
    if (!(epsilon > 0.0) || !std::isfinite(epsilon))
        throw ParameterError(fmt::format("barrier half-width {} must be positive", epsilon));
    double tol = 1e-12 * (1.0 + epsilon);
    if (std::abs(gamma_.lower() + epsilon) > tol || std::abs(gamma_.upper() - epsilon) > tol)
        throw DomainError(fmt::format("barrier measure must live on [-{0}, {0}], got [{1}, {2}]",
                                      epsilon,
                                      gamma_.lower(),
                                      gamma_.upper()));
    if (!std::isfinite(gamma_.total()))
        throw ArgumentError("barrier measure has infinite mass");
}

BarrierSpec BarrierSpec::uniform(double epsilon, double density)
{
    if (!(epsilon > 0.0))
        throw ParameterError(fmt::format("barrier half-width {} must be positive", epsilon));
    return BarrierSpec(epsilon, MonotoneMeasure::piecewise_density({-epsilon, epsilon}, {density}));
}

BarrierSpec BarrierSpec::lejay(double epsilon, double kappa, double alpha_exponent)
{
    if (!(kappa > 0.0))
        throw ParameterError(fmt::format("barrier kappa={} must be positive", kappa));
    if (!(epsilon > 0.0))
        throw ParameterError(fmt::format("barrier half-width {} must be positive", epsilon));
    return uniform(epsilon, std::pow(kappa * epsilon, alpha_exponent));
}

BarrierSpec BarrierSpec::from_conductivity(double epsilon, const Conductivity& b)
{
    if (!(epsilon > 0.0))
        throw ParameterError(fmt::format("barrier half-width {} must be positive", epsilon));
    return BarrierSpec(epsilon, MonotoneMeasure::from_conductivity(b, -epsilon, epsilon));
}

MonotoneMeasure build_lambda_eps(const MonotoneMeasure& lambda, const BarrierSpec& barrier)
{
    double eps = barrier.epsilon();
    if (!(lambda.lower() < 0.0 && lambda.upper() > 0.0))
        throw DomainError("resistance measure must contain the origin in its interior");
    double box = std::min(-lambda.lower(), lambda.upper());
    if (eps >= box)
        throw DomainError(fmt::format("barrier half-width {} not smaller than box half-width L={}", eps, box));
    auto m = make_model(lambda.lower() - eps, lambda.upper() + eps);
    m->v = CompositeModel{lambda, barrier.gamma(), eps};
    return MonotoneMeasure(m);
}

std::vector<double> measure_increments(const MonotoneMeasure& mu, std::span<const double> nodes)
{
    for (std::size_t i = 1; i < nodes.size(); ++i)
        if (!(nodes[i] > nodes[i - 1]))
            throw ArgumentError(fmt::format("nodes not strictly increasing at index {}", i));
    std::vector<double> out;
    out.reserve(nodes.empty() ? 0 : nodes.size() - 1);
    for (std::size_t i = 0; i + 1 < nodes.size(); ++i)
        out.push_back(mu.mass(nodes[i], nodes[i + 1]));
    return out;
}

double window_sup(const MonotoneMeasure& mu, double width)
{
    if (!(width > 0.0))
        throw ArgumentError("window width must be positive");
    double lo = mu.lower(), hi = mu.upper();
    if (width >= hi - lo)
        return mu.total();
    double step = width / 16.0;
    double best = mu.mass(hi - width, hi);
    std::size_t count = static_cast<std::size_t>((hi - width - lo) / step);
    for (std::size_t i = 0; i <= count; ++i) {
        double x = std::min(lo + static_cast<double>(i) * step, hi - width);
        best = std::max(best, mu.mass(x, x + width));
    }
    return best;
}

} // namespace stifflab
