#include "metamorph/grid.hpp"

#include <cmath>
#include <numbers>

#include "metamorph/errors.hpp"

namespace metamorph {

void GridSpec::validate() const {
    if (spline_level < 1) throw DomainError("spline level must be at least 1");
    if (image_level <= spline_level) throw DomainError("image level must exceed spline level");
    if (image_level > 14) throw DomainError("image level too large");
}

GaussRule1d gauss_legendre(int points) {
    if (points < 1) throw DomainError("quadrature needs at least one point");
    GaussRule1d r;
    r.nodes.resize(points);
    r.weights.resize(points);
    if (points == 3) {
        // Closed form so the production rule carries no Newton round-off.
        const double a = std::sqrt(3.0 / 5.0) / 2.0;
        r.nodes = {0.5 - a, 0.5, 0.5 + a};
        r.weights = {5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0};
        return r;
    }
    for (int i = 0; i < points; ++i) {
        double z = std::cos(std::numbers::pi * (i + 0.75) / (points + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = z;
            for (int k = 2; k <= points; ++k) {
                const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = points * (z * p1 - p0) / (z * z - 1.0);
            const double dz = p1 / dp;
            z -= dz;
            if (std::abs(dz) < 1e-16) break;
        }
        r.nodes[points - 1 - i] = 0.5 * (1.0 + z);
        r.weights[points - 1 - i] = 1.0 / ((1.0 - z * z) * dp * dp);
    }
    return r;
}

QuadratureRule::QuadratureRule(int level, int points_per_dim)
    : level_(level), cells_(1 << level), size_(1.0 / (1 << level)), rule_(gauss_legendre(points_per_dim)) {
    if (level < 0) throw DomainError("quadrature level must be nonnegative");
}

QuadratureRule build_quadrature(int level) {
    if (level < 1) throw DomainError("quadrature level must be at least 1");
    return QuadratureRule(level, 3);
}

CubicWeights cubic_weights(double t, double spacing, int max_order) {
    CubicWeights c;
    const double s = 1.0 - t;
    auto& w = c.w;
    w[0] = {s * s * s / 6.0, (3.0 * t * t * t - 6.0 * t * t + 4.0) / 6.0,
            (-3.0 * t * t * t + 3.0 * t * t + 3.0 * t + 1.0) / 6.0, t * t * t / 6.0};
    if (max_order >= 1) {
        const double k = 1.0 / spacing;
        w[1] = {-0.5 * s * s * k, (1.5 * t * t - 2.0 * t) * k, (-1.5 * t * t + t + 0.5) * k, 0.5 * t * t * k};
    }
    if (max_order >= 2) {
        const double k = 1.0 / (spacing * spacing);
        w[2] = {s * k, (3.0 * t - 2.0) * k, (-3.0 * t + 1.0) * k, t * k};
    }
    if (max_order >= 3) {
        const double k = 1.0 / (spacing * spacing * spacing);
        w[3] = {-k, 3.0 * k, -3.0 * k, k};
    }
    return c;
}

}  // namespace metamorph
