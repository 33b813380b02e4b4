#include "stifflab/functions.hpp"

#include "stifflab/errors.hpp"

#include <fmt/format.h>

#include <cmath>
#include <cstdlib>

namespace stifflab {

namespace {

double side_sign(double x, Side s)
{
    if (x > 0.0)
        return 1.0;
    if (x < 0.0)
        return -1.0;
    return static_cast<double>(static_cast<int>(s));
}

} // namespace

namespace probes {

Probe gauss()
{
    return {"gauss", [](double x, Side) { return std::exp(-x * x); }};
}

Probe odd_exp()
{
    return {"odd_exp", [](double x, Side s) { return side_sign(x, s) * std::exp(-std::abs(x)); }};
}

Probe exp_abs()
{
    return {"exp_abs", [](double x, Side) { return std::exp(-std::abs(x)); }};
}

Probe indicator(double lo, double hi)
{
    if (!(hi > lo))
        throw ArgumentError(fmt::format("indicator needs lo < hi, got [{}, {}]", lo, hi));
    return {fmt::format("indicator:{}:{}", lo, hi), [lo, hi](double x, Side s) {
                if (x == 0.0 && (lo == 0.0 || hi == 0.0)) {
                    // closed end at the origin belongs to one side only
                    if (lo == 0.0 && s == Side::Plus)
                        return 1.0;
                    if (hi == 0.0 && s == Side::Minus)
                        return 1.0;
                    return s == Side::Origin ? 0.5 : 0.0;
                }
                return (x >= lo && x <= hi) ? 1.0 : 0.0;
            }};
}

Probe minus_side()
{
    return {"minus_side", [](double x, Side s) {
                if (x < 0.0)
                    return 1.0;
                if (x > 0.0)
                    return 0.0;
                return s == Side::Minus ? 1.0 : (s == Side::Origin ? 0.5 : 0.0);
            }};
}

Probe plus_side()
{
    return {"plus_side", [](double x, Side s) {
                if (x > 0.0)
                    return 1.0;
                if (x < 0.0)
                    return 0.0;
                return s == Side::Plus ? 1.0 : (s == Side::Origin ? 0.5 : 0.0);
            }};
}

Probe constant(double c)
{
    return {c == 1.0 ? std::string("one") : fmt::format("const:{}", c), [c](double, Side) { return c; }};
}

Probe gaussian(double mu, double s2)
{
    if (!(s2 > 0.0))
        throw ArgumentError("gaussian probe needs a positive variance");
    return {fmt::format("gaussian:{}:{}", mu, s2),
            [mu, s2](double x, Side) { return std::exp(-(x - mu) * (x - mu) / (2.0 * s2)); }};
}

Probe by_name(const std::string& id)
{
    if (id == "gauss")
        return gauss();
    if (id == "odd_exp")
        return odd_exp();
    if (id == "exp_abs")
        return exp_abs();
    if (id == "minus_side")
        return minus_side();
    if (id == "plus_side")
        return plus_side();
    if (id == "one")
        return constant(1.0);
    auto parse_pair = [&](const std::string& prefix) {
        std::string rest = id.substr(prefix.size());
        auto colon = rest.find(':');
        if (colon == std::string::npos)
            throw ArgumentError("probe '" + id + "' needs two parameters");
        char* end = nullptr;
        double a = std::strtod(rest.substr(0, colon).c_str(), &end);
        double b = std::strtod(rest.substr(colon + 1).c_str(), &end);
        return std::pair{a, b};
    };
    if (id.rfind("indicator:", 0) == 0) {
        auto [a, b] = parse_pair("indicator:");
        return indicator(a, b);
    }
    if (id.rfind("gaussian:", 0) == 0) {
        auto [a, b] = parse_pair("gaussian:");
        return gaussian(a, b);
    }
    if (id.rfind("const:", 0) == 0)
        return constant(std::strtod(id.substr(6).c_str(), nullptr));
    throw ArgumentError("unknown probe function '" + id + "'");
}

} // namespace probes

std::vector<double> sample(const Grid& grid, const GridFunction& f)
{
    std::vector<double> v(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i)
        v[i] = f(grid[i], grid.side(i));
    return v;
}

std::vector<double> sample_transported(const Grid& g, double eps, const GridFunction& f)
{
    std::vector<double> v(g.size());
    const double fm = f(0.0, Side::Minus), fp = f(0.0, Side::Plus);
    for (std::size_t i = 0; i < g.size(); ++i) {
        double x = g[i];
        if (x <= -eps)
            v[i] = f(x + eps, Side::Minus);
        else if (x >= eps)
            v[i] = f(x - eps, Side::Plus);
        else
            v[i] = fm + (fp - fm) * (x + eps) / (2.0 * eps);
    }
    return v;
}

} // namespace stifflab
