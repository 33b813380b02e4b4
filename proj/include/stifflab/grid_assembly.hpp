#pragma once

// Ordered grids on [-L, L], optionally with the origin split into 0- and 0+,
// and the discrete Dirichlet forms living on them.
//
// Every form here is a weighted path graph: node masses, one conductance per
// consecutive pair, and a nonnegative killing weight per node:
//
//   q(u) = sum_i w_i (u_{i+1} - u_i)^2 + sum_i k_i u_i^2
//
// The 0-/0+ coupling is just the conductance of the edge between the two
// adjacent logical nodes, so all forms stay tridiagonal.

#include "stifflab/scenario.hpp"

#include <array>
#include <cstddef>
#include <limits>
#include <span>
#include <utility>
#include <vector>

namespace stifflab {

enum class Side
{
    Minus = -1,
    Origin = 0, ///< the single node at 0 of a grid without a doubled origin
    Plus = 1
};

enum class OriginMode
{
    Single,
    Doubled
};

class Grid
{
  public:
    static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

    /// Uniform spacing L/round(L/h) on each side of 0; `extra` nodes are
    /// inserted (and their mirror images are not implied).
    static Grid uniform(double L, double h, OriginMode mode, std::span<const double> extra = {});
    /// `total` nodes on [-L, L]; with a doubled origin each side gets total/2
    /// nodes including its copy of 0.
    static Grid with_count(double L, std::size_t total, OriginMode mode);
    /// Strictly increasing nodes; with a doubled origin, 0 must be present
    /// once and is split into 0- and 0+.
    static Grid from_nodes(std::vector<double> nodes, OriginMode mode);
    /// The ε-barrier grid built from a doubled grid: left nodes shifted by
    /// -eps, right nodes by +eps, and `cells` equal cells across [-eps, eps].
    static Grid barrier_grid(const Grid& doubled, double eps, std::size_t cells);

    std::size_t size() const noexcept { return x_.size(); }
    double operator[](std::size_t i) const { return x_[i]; }
    const std::vector<double>& nodes() const noexcept { return x_; }
    OriginMode mode() const noexcept { return mode_; }
    bool doubled() const noexcept { return mode_ == OriginMode::Doubled; }
    /// Index of 0- / 0+ (npos without a doubled origin).
    std::size_t zero_minus() const noexcept { return zm_; }
    std::size_t zero_plus() const noexcept { return zp_; }
    Side side(std::size_t i) const;
    double lower() const { return x_.front(); }
    double upper() const { return x_.back(); }
    /// Largest spacing between distinct consecutive coordinates.
    double max_spacing() const;

    /// Sub-grid on the given sorted node indices.
    Grid subset(std::span<const std::size_t> keep) const;

  private:
    Grid(std::vector<double> x, OriginMode mode, std::size_t zm, std::size_t zp);
    std::vector<double> x_;
    OriginMode mode_ = OriginMode::Single;
    std::size_t zm_ = npos;
    std::size_t zp_ = npos;
};

struct PhaseTag
{
    enum class Kind
    {
        Separate,
        Snapping,
        SkewSnapping,
        Continuous,
        EpsBarrier,
        Killed,
        Darned,
        Trace
    };
    Kind kind = Kind::Continuous;
    double kappa = 0.0;
    double alpha_skew = 0.5;
    double gamma_bar = 0.0; ///< barrier resistance for ε-barrier forms
    double epsilon = 0.0;   ///< barrier half-width for ε-barrier forms
};

struct Triplet
{
    std::size_t row;
    std::size_t col;
    double value;
    bool operator==(const Triplet&) const = default;
};

class DiscreteForm
{
  public:
    DiscreteForm(Grid grid, std::vector<double> mass, std::vector<double> conductance, std::vector<double> killing, PhaseTag tag);

    const Grid& grid() const noexcept { return grid_; }
    std::size_t size() const noexcept { return mass_.size(); }
    const std::vector<double>& mass() const noexcept { return mass_; }
    /// Edge weight between node i and i+1.
    const std::vector<double>& conductance() const noexcept { return w_; }
    const std::vector<double>& killing() const noexcept { return k_; }
    const PhaseTag& tag() const noexcept { return tag_; }

    double diagonal(std::size_t i) const;
    /// Stiffness entry (i, i+1).
    double off_diagonal(std::size_t i) const { return -w_[i]; }
    /// Interface conductance between 0- and 0+ (doubled grids only).
    double interface_weight() const;

    /// Nonzero stiffness entries, row-major.
    std::vector<Triplet> triplets() const;
    double quadratic(std::span<const double> u) const;
    double bilinear(std::span<const double> u, std::span<const double> v) const;
    /// Stiffness times u.
    std::vector<double> apply(std::span<const double> u) const;
    double total_killing() const;

  private:
    Grid grid_;
    std::vector<double> mass_;
    std::vector<double> w_;
    std::vector<double> k_;
    PhaseTag tag_;
};

/// Grid prescribed by the scenario's grid policy and phase.
Grid make_grid(const Scenario& scenario);

/// Node-centered finite-volume assembly: mass of the dual cell around each
/// node, edge weight 1/(2 Δλ) per cell, and the phase's interface weight.
DiscreteForm assemble(const Scenario& scenario, const Grid& grid);
DiscreteForm assemble(const Scenario& scenario);

/// Interface weight of a phase on a doubled grid: 0, kappa/4, or
/// alpha_skew(1-alpha_skew)kappa.
double interface_weight(const Phase& phase);

/// Adds nonnegative killing weights at the given nodes.
DiscreteForm kill(const DiscreteForm& form, std::span<const std::pair<std::size_t, double>> weights);
/// The elastic companion: killing kappa/2 at each of 0- and 0+ on the
/// interface-free form.
DiscreteForm elastic(const DiscreteForm& form, double kappa);

/// Merges 0- and 0+ into a single node at 0.
DiscreteForm darn(const DiscreteForm& form);

/// Schur complement onto the sorted node indices `keep`.
DiscreteForm trace_schur(const DiscreteForm& form, std::span<const std::size_t> keep);

/// Matrix dump: "row,col,value" triplets and "index,x,mass" rows.
void write_triplets_csv(const DiscreteForm& form, const std::string& path);
void write_mass_csv(const DiscreteForm& form, const std::string& path);

} // namespace stifflab
