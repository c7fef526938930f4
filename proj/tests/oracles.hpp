#pragma once

// Independent reference implementations used by the unit and acceptance tests.

#include <cmath>
#include <vector>

#include "metamorph/deformation.hpp"
#include "metamorph/energy.hpp"
#include "metamorph/grid.hpp"
#include "metamorph/image.hpp"

namespace oracle {

using metamorph::Deformation;
using metamorph::Image;
using metamorph::Mat2;
using metamorph::Vec2;

/// Uniform cubic B-spline with unit knot spacing centred at 0, and its derivative.
inline double bspline(double t) {
    t = std::abs(t);
    if (t >= 2.0) return 0.0;
    if (t >= 1.0) return (2.0 - t) * (2.0 - t) * (2.0 - t) / 6.0;
    return 2.0 / 3.0 - t * t + 0.5 * t * t * t;
}

inline double bspline_d(double t) {
    const double a = std::abs(t), s = t < 0 ? -1.0 : 1.0;
    if (a >= 2.0) return 0.0;
    if (a >= 1.0) return -0.5 * s * (2.0 - a) * (2.0 - a);
    return s * (-2.0 * a + 1.5 * a * a);
}

/// Value and derivative of the free 1D basis function `a` (0..n) at x: the
/// B-spline centred at a H, plus the folded outer splines at -H and 1 + H.
inline void free_1d(int a, int n, double x, double& v, double& d) {
    const double h = 1.0 / n;
    auto add = [&](double centre, double coef) {
        v += coef * bspline((x - centre) / h);
        d += coef * bspline_d((x - centre) / h) / h;
    };
    v = d = 0.0;
    add(a * h, 1.0);
    if (a == 0) add(-h, -4.0);
    if (a == 1) add(-h, -1.0);
    if (a == n - 1) add(1.0 + h, -1.0);
    if (a == n) add(1.0 + h, -4.0);
}

/// Right-hand side in the form that still contains the image gradient:
/// T(Psi) = -(2/delta) int r (grad u1 . (D Phi)^-1 Psi) o Phi_1
///          -(1/delta) int r^2 / det D Phi_1 ((D Phi)^-T : (D^2 Phi (D Phi)^-1 Psi) - (D Phi)^-T : D Psi) o Phi_1
/// with r = u1 o Phi_1 - u0, integrated with a p-point rule on the image mesh.
inline std::vector<double> gradient_form_rhs(const Deformation& phi, const Deformation& phi1, const Image& u0,
                                             const Image& u1, const metamorph::EnergyParams& p, int points = 3) {
    const int n = phi.cells();
    const std::size_t per = static_cast<std::size_t>(n + 1) * (n + 1);
    std::vector<double> out(2 * per, 0.0);
    const metamorph::QuadratureRule q(u0.level(), points);
    for (int cy = 0; cy < q.cells_per_dim(); ++cy)
        for (int cx = 0; cx < q.cells_per_dim(); ++cx)
            for (int k = 0; k < q.points_per_cell(); ++k) {
                const Vec2 x = q.point(cx, cy, k);
                const double w = q.weight(k);
                const auto j1 = phi1.jet(x, 1);
                Vec2 y = j1.value;
                y.x = std::min(1.0, std::max(0.0, y.x));
                y.y = std::min(1.0, std::max(0.0, y.y));
                const double r = u1.eval(y) - u0.eval(x);
                const double det1 = j1.jacobian(0, 0) * j1.jacobian(1, 1) - j1.jacobian(0, 1) * j1.jacobian(1, 0);
                const auto j = phi.jet(y, 2);
                const Mat2& m = j.jacobian;
                const double det = m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
                Mat2 a;  // inverse
                a(0, 0) = m(1, 1) / det;
                a(1, 1) = m(0, 0) / det;
                a(0, 1) = -m(0, 1) / det;
                a(1, 0) = -m(1, 0) / det;
                const Vec2 gu = u1.grad(y);
                // Active free functions around y.
                const int ax = static_cast<int>(std::floor(y.x * n)), ay = static_cast<int>(std::floor(y.y * n));
                for (int b = std::max(0, ay - 2); b <= std::min(n, ay + 3); ++b)
                    for (int a_ = std::max(0, ax - 2); a_ <= std::min(n, ax + 3); ++a_) {
                        double vx, dx, vy, dy;
                        free_1d(a_, n, y.x, vx, dx);
                        free_1d(b, n, y.y, vy, dy);
                        const double psi = vx * vy;
                        const Vec2 dpsi{dx * vy, vx * dy};
                        if (psi == 0.0 && dpsi.x == 0.0 && dpsi.y == 0.0) continue;
                        for (int c = 0; c < 2; ++c) {
                            // (D Phi)^-1 Psi = psi * column c of A
                            const Vec2 apsi{a(0, c) * psi, a(1, c) * psi};
                            double contraction = 0.0;  // (D Phi)^-T : (D^2 Phi (D Phi)^-1 Psi), cofactor-derivative index form
                            for (int i = 0; i < 2; ++i)
                                for (int jj = 0; jj < 2; ++jj)
                                    for (int kk = 0; kk < 2; ++kk)
                                        contraction += a(kk, i) * j.hessian[i](jj, kk) * apsi[jj];
                            const double div = a(0, c) * dpsi.x + a(1, c) * dpsi.y;
                            const double v = -(2.0 / p.delta) * r * dot(gu, apsi) -
                                             (1.0 / p.delta) * r * r / det1 * (contraction - div);
                            out[c * per + static_cast<std::size_t>(b) * (n + 1) + a_] += w * v;
                        }
                    }
            }
    return out;
}

}  // namespace oracle
