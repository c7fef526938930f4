#pragma once

#include <array>
#include <vector>

#include "metamorph/linalg.hpp"

namespace metamorph {

/// Spline level N (mesh size 2^-N) and image level M (mesh size 2^-M), M > N.
struct GridSpec {
    int spline_level = 5;
    int image_level = 6;

    static GridSpec from_spline_level(int n) { return {n, n + 1}; }
    /// Throws DomainError unless 1 <= N < M.
    void validate() const;
};

inline int cells_per_dim(int level) { return 1 << level; }
inline double mesh_size(int level) { return 1.0 / static_cast<double>(1 << level); }

/// Gauss-Legendre nodes and weights mapped to [0, 1].
struct GaussRule1d {
    std::vector<double> nodes;
    std::vector<double> weights;
};

GaussRule1d gauss_legendre(int points);

/// Tensor Gauss-Legendre rule replicated over every cell of a uniform mesh.
class QuadratureRule {
public:
    QuadratureRule(int level, int points_per_dim);

    int level() const { return level_; }
    int cells_per_dim() const { return cells_; }
    int points_per_dim() const { return static_cast<int>(rule_.nodes.size()); }
    int points_per_cell() const { return points_per_dim() * points_per_dim(); }
    double cell_size() const { return size_; }

    /// q runs over 0 .. points_per_cell()-1, x fastest.
    Vec2 point(int cx, int cy, int q) const {
        const int p = points_per_dim();
        return {(cx + rule_.nodes[q % p]) * size_, (cy + rule_.nodes[q / p]) * size_};
    }
    double weight(int q) const {
        const int p = points_per_dim();
        return rule_.weights[q % p] * rule_.weights[q / p] * size_ * size_;
    }
    const GaussRule1d& rule_1d() const { return rule_; }

private:
    int level_;
    int cells_;
    double size_;
    GaussRule1d rule_;
};

/// Three points per dimension: exact for polynomials of degree 5 in each coordinate.
QuadratureRule build_quadrature(int level);

/// Uniform cubic B-spline weights of the four active basis functions in a cell,
/// with derivatives up to third order, already scaled by the knot spacing.
struct CubicWeights {
    std::array<std::array<double, 4>, 4> w{};  // w[derivative order][local index]
};

/// Cell index of coordinate x in [0, 1] on a mesh with n cells; the last cell is
/// closed on the right.
inline int cell_of(double x, int n, double& local) {
    const double s = x * n;
    int c = static_cast<int>(s);
    if (c > n - 1) c = n - 1;
    if (c < 0) c = 0;
    local = s - c;
    return c;
}

CubicWeights cubic_weights(double t, double spacing, int max_order);

}  // namespace metamorph
