#pragma once

#include <span>
#include <vector>

namespace stifflab {

/// LDL^T factorization of a symmetric tridiagonal matrix given by its
/// diagonal and its (n-1) off-diagonal entries. Pivots are checked; a pivot
/// that is not positive relative to its diagonal raises NumericalError
/// carrying a pivot-ratio condition estimate.
class SymTridiagonal
{
  public:
    SymTridiagonal() = default;
    SymTridiagonal(std::vector<double> diag, std::vector<double> off);

    std::size_t size() const noexcept { return d_.size(); }
    std::vector<double> solve(std::span<const double> rhs) const;
    void solve_in_place(std::vector<double>& x) const;
    /// max pivot / min pivot
    double condition_estimate() const noexcept { return cond_; }

  private:
    std::vector<double> d_; // pivots
    std::vector<double> l_; // unit lower factor
    double cond_ = 1.0;
};

} // namespace stifflab
