#include "stifflab/tridiagonal.hpp"

#include "stifflab/errors.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

namespace stifflab {

SymTridiagonal::SymTridiagonal(std::vector<double> diag, std::vector<double> off)
{
    const std::size_t n = diag.size();
    if (n == 0 || off.size() + 1 != n)
        throw NumericalError("tridiagonal system with inconsistent band sizes");
    d_.resize(n);
    l_.assign(n > 0 ? n - 1 : 0, 0.0);
    double pmax = 0.0, pmin = INFINITY;
    for (std::size_t i = 0; i < n; ++i) {
        double p = diag[i];
        if (i > 0) {
            l_[i - 1] = off[i - 1] / d_[i - 1];
            p -= l_[i - 1] * off[i - 1];
        }
        double scale = std::abs(diag[i]);
        pmax = std::max(pmax, std::abs(p));
        pmin = std::min(pmin, std::abs(p));
        if (!std::isfinite(p) || !(p > 1e-13 * scale)) {
            double cond = pmin > 0.0 ? pmax / pmin : INFINITY;
            throw NumericalError(
                fmt::format("singular tridiagonal block: pivot {} at row {} (condition estimate {:.3g})", p, i, cond));
        }
        d_[i] = p;
    }
    cond_ = pmax / pmin;
}

void SymTridiagonal::solve_in_place(std::vector<double>& x) const
{
    const std::size_t n = d_.size();
    for (std::size_t i = 1; i < n; ++i)
        x[i] -= l_[i - 1] * x[i - 1];
    for (std::size_t i = 0; i < n; ++i)
        x[i] /= d_[i];
    for (std::size_t i = n - 1; i-- > 0;)
        x[i] -= l_[i] * x[i + 1];
}

std::vector<double> SymTridiagonal::solve(std::span<const double> rhs) const
{
    std::vector<double> x(rhs.begin(), rhs.end());
    solve_in_place(x);
    return x;
}

} // namespace stifflab
