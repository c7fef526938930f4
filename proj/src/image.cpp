#include "metamorph/image.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "metamorph/errors.hpp"
#include "metamorph/grid.hpp"

namespace metamorph {

void check_in_domain(Vec2 x) {
    if (!(x.x >= 0.0 && x.x <= 1.0 && x.y >= 0.0 && x.y <= 1.0)) {
        throw DomainError("point (" + std::to_string(x.x) + ", " + std::to_string(x.y) +
                          ") outside the unit square");
    }
}

Image::Image(int level, double value) : level_(level), cells_(1 << level) {
    if (level < 0 || level > 14) throw DomainError("invalid image level " + std::to_string(level));
    values_.assign(static_cast<std::size_t>(cells_ + 1) * (cells_ + 1), value);
}

Image::Image(int level, std::vector<double> values) : Image(level) {
    if (values.size() != values_.size()) throw DimensionError("image value count does not match level");
    values_ = std::move(values);
}

Image Image::from_function(int level, const std::function<double(Vec2)>& f) {
    Image u(level);
    for (int j = 0; j <= u.cells_; ++j)
        for (int i = 0; i <= u.cells_; ++i) u.at(i, j) = f(u.node(i, j));
    return u;
}

double Image::eval(Vec2 x) const {
    check_in_domain(x);
    return eval_unchecked(x);
}

Vec2 Image::grad(Vec2 x) const {
    check_in_domain(x);
    return grad_unchecked(x);
}

namespace {

// Lower-left convention: a point on an interior edge belongs to the cell below/left of it.
inline int cell_lower_left(double x, int n, double& t) {
    const double s = x * n;
    int c = static_cast<int>(std::ceil(s)) - 1;
    c = std::clamp(c, 0, n - 1);
    t = s - c;
    return c;
}

}  // namespace

double Image::eval_unchecked(Vec2 x) const {
    double tx, ty;
    const int cx = cell_of(x.x, cells_, tx);
    const int cy = cell_of(x.y, cells_, ty);
    const double v00 = at(cx, cy), v10 = at(cx + 1, cy), v01 = at(cx, cy + 1), v11 = at(cx + 1, cy + 1);
    return (1 - ty) * ((1 - tx) * v00 + tx * v10) + ty * ((1 - tx) * v01 + tx * v11);
}

Vec2 Image::grad_unchecked(Vec2 x) const {
    double tx, ty;
    const int cx = cell_lower_left(x.x, cells_, tx);
    const int cy = cell_lower_left(x.y, cells_, ty);
    const double v00 = at(cx, cy), v10 = at(cx + 1, cy), v01 = at(cx, cy + 1), v11 = at(cx + 1, cy + 1);
    const double n = cells_;
    return {n * ((1 - ty) * (v10 - v00) + ty * (v11 - v01)), n * ((1 - tx) * (v01 - v00) + tx * (v11 - v10))};
}

Image operator+(const Image& a, const Image& b) {
    if (a.level() != b.level()) throw DimensionError("image levels differ");
    Image r = a;
    for (std::size_t k = 0; k < r.values().size(); ++k) r.values()[k] += b.values()[k];
    return r;
}

Image operator-(const Image& a, const Image& b) {
    if (a.level() != b.level()) throw DimensionError("image levels differ");
    Image r = a;
    for (std::size_t k = 0; k < r.values().size(); ++k) r.values()[k] -= b.values()[k];
    return r;
}

Image operator*(double s, const Image& a) {
    Image r = a;
    for (double& v : r.values()) v *= s;
    return r;
}

Image prolong_image(const Image& u) {
    Image f(u.level() + 1);
    const int n = u.cells();
    for (int j = 0; j <= 2 * n; ++j) {
        for (int i = 0; i <= 2 * n; ++i) {
            const int i0 = i / 2, j0 = j / 2;
            const int i1 = i0 + (i % 2), j1 = j0 + (j % 2);
            f.at(i, j) = 0.25 * (u.at(i0, j0) + u.at(i1, j0) + u.at(i0, j1) + u.at(i1, j1));
        }
    }
    return f;
}

Image restrict_image(const Image& u) {
    if (u.level() < 1) throw DomainError("cannot restrict below level 0");
    Image c(u.level() - 1);
    const int nf = u.cells();
    static constexpr double w1[3] = {1.0, 2.0, 1.0};
    for (int j = 0; j <= c.cells(); ++j) {
        for (int i = 0; i <= c.cells(); ++i) {
            double sum = 0.0, wsum = 0.0;
            for (int b = -1; b <= 1; ++b) {
                const int fj = 2 * j + b;
                if (fj < 0 || fj > nf) continue;
                for (int a = -1; a <= 1; ++a) {
                    const int fi = 2 * i + a;
                    if (fi < 0 || fi > nf) continue;
                    const double w = w1[a + 1] * w1[b + 1];
                    sum += w * u.at(fi, fj);
                    wsum += w;
                }
            }
            c.at(i, j) = sum / wsum;
        }
    }
    return c;
}

Image restrict_to_level(const Image& u, int level) {
    if (level > u.level()) throw DomainError("restriction target finer than source");
    Image r = u;
    while (r.level() > level) r = restrict_image(r);
    return r;
}

double l2_norm(const Image& u) {
    // Exact for bilinear functions: tensor of 1D mass matrices [2 1; 1 2] / 6.
    const int n = u.cells();
    const double h2 = 1.0 / (static_cast<double>(n) * n);
    double sum = 0.0;
    static constexpr double m[2][2] = {{2.0 / 6.0, 1.0 / 6.0}, {1.0 / 6.0, 2.0 / 6.0}};
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
            const double v[2][2] = {{u.at(i, j), u.at(i + 1, j)}, {u.at(i, j + 1), u.at(i + 1, j + 1)}};
            for (int b = 0; b < 2; ++b)
                for (int a = 0; a < 2; ++a)
                    for (int d = 0; d < 2; ++d)
                        for (int c = 0; c < 2; ++c) sum += m[b][d] * m[a][c] * v[b][a] * v[d][c];
        }
    }
    return std::sqrt(std::max(0.0, sum * h2));
}

double l2_distance(const Image& a, const Image& b) { return l2_norm(a - b); }

double max_abs_difference(const Image& a, const Image& b) {
    if (a.level() != b.level()) throw DimensionError("image levels differ");
    double m = 0.0;
    for (std::size_t k = 0; k < a.values().size(); ++k) m = std::max(m, std::abs(a.values()[k] - b.values()[k]));
    return m;
}

}  // namespace metamorph
