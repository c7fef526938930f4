#pragma once

#include "metamorph/image.hpp"

namespace metamorph {

/// base + amplitude * exp(-|x - c|^2 / (2 sigma^2)) sampled at the nodes.
Image gaussian_blob(int level, Vec2 center, double sigma, double amplitude = 1.0, double base = 0.0);

/// Filled ellipse with a smooth edge of the given width (tanh profile).
struct Ellipse {
    Vec2 center;
    Vec2 radii;
    double angle = 0.0;
    double intensity = 1.0;
};

Image ellipse_image(int level, const Ellipse* ellipses, int count, double edge_width, double background = 0.0);

/// Three ellipses and a slightly moved, reshaped and reweighted copy of them;
/// `second` selects the copy.
Image three_ellipse_scene(int level, bool second);

}  // namespace metamorph
