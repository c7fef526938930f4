#pragma once

#include <array>
#include <span>
#include <vector>

#include "metamorph/linalg.hpp"

namespace metamorph {

struct JetEvaluation {
    Vec2 value;
    Mat2 jacobian;                 // (i, k) = d_k Phi^i
    std::array<Mat2, 2> hessian;   // hessian[i](k, l) = d_k d_l Phi^i
    Vec2 laplacian;
    Mat2 grad_laplacian;           // (i, k) = d_k Laplace Phi^i
};

/// One-dimensional constrained basis restricted to a single spline cell: the
/// free basis functions that do not vanish there, with derivatives up to third
/// order. The two outermost B-splines on each side are folded into their
/// neighbours so that every function in the span vanishes at 0 and 1.
struct FreeBasis1d {
    int count = 0;
    std::array<int, 4> index{};
    std::array<std::array<double, 4>, 4> w{};  // w[order][k]
};

/// x in [0, 1]; n = number of spline cells.
FreeBasis1d free_basis_1d(double x, int n, int max_order);

/// Map Phi(x) = x + d(x) on the unit square, with d a tensor cubic B-spline on
/// the uniform mesh of level N. Control displacements live on an (n+3)^2 grid,
/// n = 2^N; full index k has its basis centred at (k - 1) H. The interior
/// (n+1)^2 control points per component are the degrees of freedom and the
/// outer ring is determined by them so that d vanishes on the boundary.
class Deformation {
public:
    Deformation() : Deformation(1) {}
    explicit Deformation(int level);  // identity

    static Deformation identity(int level) { return Deformation(level); }
    /// dofs = [x components of all free control points, then y components],
    /// free point (a, b) at position b (n+1) + a.
    static Deformation from_dofs(int level, std::span<const double> dofs);
    /// Full control grid including the ghost ring; throws FormatError if the
    /// ghosts are inconsistent with the boundary construction.
    static Deformation from_control_grid(int level, std::vector<Vec2> control, double tolerance = 1e-9);
    /// Full control grid taken as is, without the boundary construction. The
    /// result need not fix the boundary; used for diagnostics and tests.
    static Deformation unconstrained(int level, std::vector<Vec2> control);

    int level() const { return level_; }
    int cells() const { return n_; }
    double spacing() const { return 1.0 / n_; }
    int free_per_dim() const { return n_ + 1; }
    std::size_t dofs_per_component() const { return static_cast<std::size_t>(n_ + 1) * (n_ + 1); }
    std::size_t dof_count() const { return 2 * dofs_per_component(); }
    int control_per_dim() const { return n_ + 3; }

    std::vector<double> dofs() const;
    const std::vector<Vec2>& control() const { return control_; }
    Vec2 control(int i, int j) const { return control_[static_cast<std::size_t>(j) * (n_ + 3) + i]; }

    /// Phi(x); throws DomainError outside [0, 1]^2.
    Vec2 eval(Vec2 x) const;
    Vec2 eval_unchecked(Vec2 x) const;
    Mat2 jacobian(Vec2 x) const;
    /// Derivatives up to max_order (0..3) are filled; the rest stay zero.
    JetEvaluation jet(Vec2 x, int max_order = 3) const;
    JetEvaluation jet_unchecked(Vec2 x, int max_order = 3) const;

    bool is_identity() const;

private:
    int level_;
    int n_;
    std::vector<Vec2> control_;
};

/// Fills the ghost ring of a full control grid from its interior.
void complete_ghosts(int n, std::vector<Vec2>& control);

/// Sup norm over control points of the difference of displacements.
double max_control_difference(const Deformation& a, const Deformation& b);

/// Exact refinement by knot insertion.
Deformation prolong_deformation(const Deformation& d);

/// Minimum of det D Phi over the points of a quadrature rule at the spline level.
double min_jacobian_determinant(const Deformation& d, int points_per_dim = 3);

}  // namespace metamorph
