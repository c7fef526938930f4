#include "metamorph/scenes.hpp"

#include <cmath>

namespace metamorph {

Image gaussian_blob(int level, Vec2 center, double sigma, double amplitude, double base) {
    return Image::from_function(level, [&](Vec2 x) {
        const Vec2 d = x - center;
        return base + amplitude * std::exp(-dot(d, d) / (2.0 * sigma * sigma));
    });
}

Image ellipse_image(int level, const Ellipse* ellipses, int count, double edge_width, double background) {
    return Image::from_function(level, [&](Vec2 x) {
        double v = background;
        for (int k = 0; k < count; ++k) {
            const Ellipse& e = ellipses[k];
            const double c = std::cos(e.angle), s = std::sin(e.angle);
            const Vec2 d = x - e.center;
            const double u = (c * d.x + s * d.y) / e.radii.x;
            const double w = (-s * d.x + c * d.y) / e.radii.y;
            // Approximate signed distance to the boundary, scaled by the mean radius.
            const double dist = (std::sqrt(u * u + w * w) - 1.0) * 0.5 * (e.radii.x + e.radii.y);
            v += (e.intensity - background) * 0.5 * (1.0 - std::tanh(dist / edge_width));
        }
        return v;
    });
}

Image three_ellipse_scene(int level, bool second) {
    const double t = second ? 1.0 : 0.0;
    const Ellipse e[3] = {
        {{0.32 + 0.02 * t, 0.35}, {0.14, 0.10}, 0.3, 0.8},
        {{0.66, 0.36 + 0.015 * t}, {0.10 + 0.01 * t, 0.12}, -0.2, 0.6 + 0.05 * t},
        {{0.50 - 0.01 * t, 0.70 - 0.01 * t}, {0.16, 0.08}, 0.1 + 0.05 * t, 0.9},
    };
    return ellipse_image(level, e, 3, 0.03, 0.1);
}

}  // namespace metamorph
