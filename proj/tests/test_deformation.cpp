#include <doctest.h>

#include <cmath>

#include "metamorph/deformation.hpp"
#include "metamorph/errors.hpp"
#include "metamorph/grid.hpp"
#include "test_support.hpp"

using namespace metamorph;

TEST_CASE("identity jet") {
    const Deformation id(3);
    auto g = testing::rng(1);
    for (int k = 0; k < 100; ++k) {
        const Vec2 x = testing::random_point(g);
        const auto j = id.jet(x);
        CHECK(j.value.x == x.x);
        CHECK(j.value.y == x.y);
        for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b) {
                CHECK(j.jacobian(a, b) == (a == b ? 1.0 : 0.0));
                CHECK(j.hessian[a](0, b) == 0.0);
                CHECK(j.grad_laplacian(a, b) == 0.0);
            }
        CHECK(j.laplacian.x == 0.0);
    }
    CHECK(id.is_identity());
}

TEST_CASE("constant control displacements give a translation") {
    auto g = testing::rng(2);
    const Deformation id(3);
    const Vec2 c{0.013, -0.021};
    const Deformation d = Deformation::unconstrained(3, std::vector<Vec2>(id.control().size(), c));
    for (int k = 0; k < 1000; ++k) {
        const Vec2 x = testing::random_point(g);
        const auto j = d.jet(x);
        CHECK(std::abs(j.value.x - x.x - c.x) < 1e-14);
        CHECK(std::abs(j.value.y - x.y - c.y) < 1e-14);
        for (int a = 0; a < 2; ++a) {
            for (int b = 0; b < 2; ++b) {
                CHECK(std::abs(j.jacobian(a, b) - (a == b ? 1.0 : 0.0)) < 1e-12);
                CHECK(std::abs(j.hessian[a](0, b)) < 1e-9);
                CHECK(std::abs(j.hessian[a](1, b)) < 1e-9);
                CHECK(std::abs(j.grad_laplacian(a, b)) < 1e-6);
            }
        }
    }
}

TEST_CASE("jet derivatives match finite differences") {
    auto g = testing::rng(3);
    const Deformation d = testing::random_deformation(3, g, 0.05);
    const double e = 1e-5;
    for (Vec2 x : {Vec2{0.37, 0.61}, Vec2{0.52, 0.13}, Vec2{0.81, 0.9}}) {
        const auto j = d.jet(x);
        for (int k = 0; k < 2; ++k) {
            Vec2 xp = x, xm = x;
            xp[k] += e;
            xm[k] -= e;
            const auto jp = d.jet(xp), jm = d.jet(xm);
            for (int i = 0; i < 2; ++i) {
                const double fd_jac = (jp.value[i] - jm.value[i]) / (2 * e);
                CHECK(testing::rel_err(fd_jac, j.jacobian(i, k)) < 1e-6);
                for (int l = 0; l < 2; ++l) {
                    const double fd_hess = (jp.jacobian(i, l) - jm.jacobian(i, l)) / (2 * e);
                    CHECK(std::abs(fd_hess - j.hessian[i](l, k)) < 1e-6 * std::max(1.0, std::abs(j.hessian[i](l, k))));
                }
                const double fd_gl = (jp.laplacian[i] - jm.laplacian[i]) / (2 * e);
                CHECK(std::abs(fd_gl - j.grad_laplacian(i, k)) < 1e-6 * std::max(1.0, std::abs(j.grad_laplacian(i, k))));
            }
        }
        for (int i = 0; i < 2; ++i) {
            CHECK(j.hessian[i](0, 1) == j.hessian[i](1, 0));
            CHECK(j.laplacian[i] == doctest::Approx(j.hessian[i](0, 0) + j.hessian[i](1, 1)));
        }
    }
}

TEST_CASE("boundary is fixed by the constrained construction") {
    auto g = testing::rng(4);
    for (int level : {1, 2, 4}) {
        const Deformation d = testing::random_deformation(level, g, 0.1);
        double worst = 0.0;
        for (int k = 0; k < 1000; ++k) {
            const double s = testing::uniform(g);
            Vec2 x;
            switch (k % 4) {
                case 0: x = {0.0, s}; break;
                case 1: x = {1.0, s}; break;
                case 2: x = {s, 0.0}; break;
                default: x = {s, 1.0}; break;
            }
            const Vec2 y = d.eval(x);
            worst = std::max({worst, std::abs(y.x - x.x), std::abs(y.y - x.y)});
        }
        CHECK(worst < 1e-12);
    }
}

TEST_CASE("dofs round-trip and the ghost check") {
    auto g = testing::rng(5);
    const Deformation d = testing::random_deformation(3, g, 0.02);
    const auto dofs = d.dofs();
    const Deformation e = Deformation::from_dofs(3, dofs);
    CHECK(max_control_difference(d, e) == 0.0);
    CHECK(Deformation::from_control_grid(3, d.control()).dofs() == dofs);
    auto bad = d.control();
    bad[0].x += 1e-3;
    CHECK_THROWS_AS(Deformation::from_control_grid(3, bad), FormatError);
    CHECK_THROWS_AS(Deformation::from_dofs(3, std::vector<double>(5)), DimensionError);
}

TEST_CASE("free basis reproduces deformation evaluation") {
    auto g = testing::rng(6);
    for (int level : {1, 2, 3}) {
        const Deformation d = testing::random_deformation(level, g, 0.03);
        const auto dofs = d.dofs();
        const int n = d.cells();
        const std::size_t per = d.dofs_per_component();
        for (int k = 0; k < 200; ++k) {
            const Vec2 x = testing::random_point(g);
            const auto bx = free_basis_1d(x.x, n, 3), by = free_basis_1d(x.y, n, 3);
            Vec2 v, dxx;
            for (int b = 0; b < by.count; ++b)
                for (int a = 0; a < bx.count; ++a) {
                    const std::size_t s = static_cast<std::size_t>(by.index[b]) * (n + 1) + bx.index[a];
                    const double psi = bx.w[0][a] * by.w[0][b];
                    const double psi_xx = bx.w[2][a] * by.w[0][b];
                    v += psi * Vec2{dofs[s], dofs[per + s]};
                    dxx += psi_xx * Vec2{dofs[s], dofs[per + s]};
                }
            const auto j = d.jet(x);
            CHECK(std::abs(j.value.x - x.x - v.x) < 1e-14);
            CHECK(std::abs(j.value.y - x.y - v.y) < 1e-14);
            CHECK(std::abs(j.hessian[0](0, 0) - dxx.x) < 1e-10);
        }
    }
}

TEST_CASE("knot-insertion prolongation reproduces the spline") {
    auto g = testing::rng(7);
    const Deformation d = testing::random_deformation(3, g, 0.02);
    const Deformation f = prolong_deformation(d);
    CHECK(f.level() == 4);
    for (int k = 0; k < 100; ++k) {
        const Vec2 x = testing::random_point(g);
        const auto a = d.jet(x), b = f.jet(x);
        CHECK(std::abs(a.value.x - b.value.x) < 1e-12);
        CHECK(std::abs(a.value.y - b.value.y) < 1e-12);
        CHECK(std::abs(a.jacobian(0, 1) - b.jacobian(0, 1)) < 1e-11);
    }
}

TEST_CASE("Laplacian and Hessian norms agree for displacements clamped to second order") {
    // Zeroing the two outer free rings makes value and normal derivative vanish
    // on the boundary; for such functions int |Lap|^2 = int |D^2|^2.
    auto g = testing::rng(8);
    for (int level : {5, 6}) {
        const int n = 1 << level;
        Deformation id(level);
        std::vector<double> dofs(id.dof_count(), 0.0);
        const std::size_t per = id.dofs_per_component();
        for (int b = 2; b <= n - 2; ++b)
            for (int a = 2; a <= n - 2; ++a) {
                const double bump = std::sin(3.0 * a / n) * std::cos(2.0 * b / n);
                dofs[static_cast<std::size_t>(b) * (n + 1) + a] = 0.01 * bump + 1e-3 * testing::uniform(g, -1, 1);
                dofs[per + static_cast<std::size_t>(b) * (n + 1) + a] = 1e-3 * testing::uniform(g, -1, 1);
            }
        const Deformation d = Deformation::from_dofs(level, dofs);
        const auto q = build_quadrature(level);
        double lap = 0.0, hess = 0.0;
        for (int cy = 0; cy < n; ++cy)
            for (int cx = 0; cx < n; ++cx)
                for (int k = 0; k < 9; ++k) {
                    const auto j = d.jet(q.point(cx, cy, k), 2);
                    lap += q.weight(k) * dot(j.laplacian, j.laplacian);
                    hess += q.weight(k) * (frobenius_sq(j.hessian[0]) + frobenius_sq(j.hessian[1]));
                }
        CHECK(std::abs(lap - hess) / hess < 1e-2);
    }
}

TEST_CASE("jacobian determinant of the identity is one") {
    CHECK(min_jacobian_determinant(Deformation(3)) == doctest::Approx(1.0));
}

TEST_CASE("evaluation outside the square is rejected") {
    const Deformation d(2);
    CHECK_THROWS_AS(d.eval({1.5, 0.5}), DomainError);
    CHECK_THROWS_AS(d.jet({0.5, -0.1}), DomainError);
}
