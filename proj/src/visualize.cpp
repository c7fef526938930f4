#include "metamorph/visualize.hpp"

#include <algorithm>
#include <cmath>

namespace metamorph {

Rgb hsv_to_rgb(double h, double s, double v) {
    h = std::fmod(h, 360.0);
    if (h < 0.0) h += 360.0;
    const double c = v * s;
    const double hp = h / 60.0;
    const double x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
    Rgb out;
    switch (static_cast<int>(hp)) {
        case 0: out = {c, x, 0}; break;
        case 1: out = {x, c, 0}; break;
        case 2: out = {0, c, x}; break;
        case 3: out = {0, x, c}; break;
        case 4: out = {x, 0, c}; break;
        default: out = {c, 0, x}; break;
    }
    const double m = v - c;
    return {out.r + m, out.g + m, out.b + m};
}

RgbRaster velocity_image(const VectorField& v) {
    const int side = (1 << v.level) + 1;
    RgbRaster out;
    out.width = out.height = side;
    out.pixels.assign(3 * v.values.size(), 0);
    double largest = 0.0;
    for (const Vec2& x : v.values) largest = std::max(largest, norm(x));
    if (largest < 1e-12) return out;
    auto byte = [](double c) { return static_cast<std::uint8_t>(std::floor(std::clamp(c, 0.0, 1.0) * 255.0 + 0.5)); };
    for (std::size_t i = 0; i < v.values.size(); ++i) {
        const Vec2 x = v.values[i];
        double hue = std::atan2(x.y, x.x) * 180.0 / M_PI;
        if (hue < 0.0) hue += 360.0;
        const Rgb c = hsv_to_rgb(hue, 1.0, norm(x) / largest);
        out.pixels[3 * i] = byte(c.r);
        out.pixels[3 * i + 1] = byte(c.g);
        out.pixels[3 * i + 2] = byte(c.b);
    }
    return out;
}

RgbRaster velocity_viz(const Deformation& phi, int image_level, int steps) {
    return velocity_image(velocity_field(phi, image_level, steps));
}

SignedMap modulation_map(const Image& modulation) {
    SignedMap out{Image(modulation.level(), 0.5), 0.0};
    for (double x : modulation.values()) out.bound = std::max(out.bound, std::abs(x));
    if (out.bound < 1e-12) return out;
    for (std::size_t i = 0; i < modulation.node_count(); ++i)
        out.gray.values()[i] = 0.5 + 0.5 * modulation.values()[i] / out.bound;
    return out;
}

}  // namespace metamorph
