#pragma once

#include <functional>
#include <vector>

#include "metamorph/linalg.hpp"

namespace metamorph {

/// Piecewise bilinear function on the unit square, given by its values on the
/// (2^M + 1)^2 nodes of the uniform mesh of level M. Node (i, j) sits at
/// (i h, j h); i runs along x and is the fastest index in storage.
class Image {
public:
    Image() = default;
    explicit Image(int level, double value = 0.0);
    Image(int level, std::vector<double> values);

    static Image from_function(int level, const std::function<double(Vec2)>& f);

    int level() const { return level_; }
    int cells() const { return cells_; }
    int nodes_per_dim() const { return cells_ + 1; }
    std::size_t node_count() const { return values_.size(); }
    double mesh() const { return 1.0 / cells_; }
    Vec2 node(int i, int j) const { return {i * mesh(), j * mesh()}; }

    double& at(int i, int j) { return values_[static_cast<std::size_t>(j) * (cells_ + 1) + i]; }
    double at(int i, int j) const { return values_[static_cast<std::size_t>(j) * (cells_ + 1) + i]; }
    std::vector<double>& values() { return values_; }
    const std::vector<double>& values() const { return values_; }

    /// Throws DomainError outside [0, 1]^2.
    double eval(Vec2 x) const;
    /// Cellwise gradient; on a cell edge the cell to the lower left is used,
    /// except on the top and right boundary where the adjacent interior cell is used.
    Vec2 grad(Vec2 x) const;

    /// Evaluation without the domain check; x must lie in [0, 1]^2.
    double eval_unchecked(Vec2 x) const;
    Vec2 grad_unchecked(Vec2 x) const;

private:
    int level_ = 0;
    int cells_ = 1;
    std::vector<double> values_{0.0, 0.0, 0.0, 0.0};
};

Image operator+(const Image& a, const Image& b);
Image operator-(const Image& a, const Image& b);
Image operator*(double s, const Image& a);

/// Exact refinement (bilinear functions are nested).
Image prolong_image(const Image& u);
/// Full-weighting restriction, renormalized at the boundary.
Image restrict_image(const Image& u);
Image restrict_to_level(const Image& u, int level);

/// L2 norm of the bilinear function, integrated exactly cell by cell.
double l2_norm(const Image& u);
double l2_distance(const Image& a, const Image& b);
double max_abs_difference(const Image& a, const Image& b);

void check_in_domain(Vec2 x);

}  // namespace metamorph
