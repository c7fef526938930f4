#pragma once

#include "metamorph/io.hpp"
#include "metamorph/shooting.hpp"

namespace metamorph {

struct Rgb {
    double r = 0.0, g = 0.0, b = 0.0;
};

/// h in degrees, s and v in [0, 1].
Rgb hsv_to_rgb(double h, double s, double v);

/// Hue encodes the direction (0 degrees along +x, counterclockwise), value the
/// norm relative to the largest one; all black for a vanishing field.
RgbRaster velocity_image(const VectorField& v);
RgbRaster velocity_viz(const Deformation& phi, int image_level, int steps);

struct SignedMap {
    Image gray;
    /// Largest |value|; mapped to 0 and 1, zero to 0.5.
    double bound = 0.0;
};

SignedMap modulation_map(const Image& modulation);

}  // namespace metamorph
