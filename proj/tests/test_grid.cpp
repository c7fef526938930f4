#include <doctest.h>

#include <cmath>

#include "metamorph/errors.hpp"
#include "metamorph/grid.hpp"
#include "metamorph/image.hpp"
#include "test_support.hpp"

using namespace metamorph;

namespace {

template <class F>
double integrate(const QuadratureRule& q, F&& f) {
    double s = 0.0;
    for (int cy = 0; cy < q.cells_per_dim(); ++cy)
        for (int cx = 0; cx < q.cells_per_dim(); ++cx)
            for (int k = 0; k < q.points_per_cell(); ++k) s += q.weight(k) * f(q.point(cx, cy, k));
    return s;
}

}  // namespace

TEST_CASE("quadrature weights sum to the area") {
    for (int level = 1; level <= 5; ++level) {
        const auto q = build_quadrature(level);
        CHECK(q.points_per_cell() == 9);
        CHECK(integrate(q, [](Vec2) { return 1.0; }) == doctest::Approx(1.0).epsilon(1e-13));
        double cell = 0.0;
        for (int k = 0; k < 9; ++k) {
            CHECK(q.weight(k) > 0.0);
            cell += q.weight(k);
        }
        CHECK(cell == doctest::Approx(q.cell_size() * q.cell_size()).epsilon(1e-14));
    }
}

TEST_CASE("x^3 y^2 integrates to one twelfth") {
    const auto q = build_quadrature(3);
    const double v = integrate(q, [](Vec2 x) { return x.x * x.x * x.x * x.y * x.y; });
    CHECK(std::abs(v - 1.0 / 12.0) < 1e-15);
}

TEST_CASE("random tensor polynomials of degree five are integrated exactly") {
    auto g = testing::rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        double c[6][6];
        double exact = 0.0;
        for (int a = 0; a < 6; ++a)
            for (int b = 0; b < 6; ++b) {
                c[a][b] = testing::uniform(g, -1, 1);
                exact += c[a][b] / ((a + 1.0) * (b + 1.0));
            }
        auto poly = [&](Vec2 x) {
            double s = 0.0;
            for (int a = 0; a < 6; ++a)
                for (int b = 0; b < 6; ++b) s += c[a][b] * std::pow(x.x, a) * std::pow(x.y, b);
            return s;
        };
        for (int level : {1, 3}) {
            const double v = integrate(build_quadrature(level), poly);
            CHECK(std::abs(v - exact) / std::abs(exact) < 1e-12);
        }
    }
}

TEST_CASE("degree six is not exact for the three-point rule") {
    const auto q = build_quadrature(1);
    const double v = integrate(q, [](Vec2 x) { return std::pow(x.x, 6); });
    CHECK(std::abs(v - 1.0 / 7.0) > 1e-8);
}

TEST_CASE("general Gauss-Legendre rules are exact to degree 2p-1") {
    for (int p : {1, 2, 4, 6, 8}) {
        const auto r = gauss_legendre(p);
        for (int deg = 0; deg <= 2 * p - 1; ++deg) {
            double s = 0.0;
            for (int i = 0; i < p; ++i) s += r.weights[i] * std::pow(r.nodes[i], deg);
            CHECK(std::abs(s - 1.0 / (deg + 1)) < 1e-14);
        }
    }
}

TEST_CASE("cubic B-spline weights form a partition of unity with vanishing derivative sums") {
    for (double t : {0.0, 0.2, 0.5, 0.77, 1.0}) {
        const auto c = cubic_weights(t, 0.125, 3);
        for (int o = 0; o < 4; ++o) {
            double s = 0.0;
            for (double v : c.w[o]) s += v;
            CHECK(std::abs(s - (o == 0 ? 1.0 : 0.0)) < 1e-12);
        }
    }
}

TEST_CASE("image evaluation") {
    SUBCASE("constant image") {
        const Image u(4, 0.3);
        auto g = testing::rng(5);
        for (int k = 0; k < 50; ++k) {
            const Vec2 x = testing::random_point(g);
            CHECK(u.eval(x) == doctest::Approx(0.3).epsilon(1e-15));
            CHECK(u.grad(x).x == 0.0);
            CHECK(u.grad(x).y == 0.0);
        }
    }
    SUBCASE("linear image is reproduced") {
        const Image u = Image::from_function(3, [](Vec2 x) { return x.x; });
        auto g = testing::rng(6);
        for (int k = 0; k < 50; ++k) {
            const Vec2 x = testing::random_point(g);
            CHECK(u.eval(x) == doctest::Approx(x.x).epsilon(1e-14));
            CHECK(u.grad(x).x == doctest::Approx(1.0).epsilon(1e-14));
            CHECK(std::abs(u.grad(x).y) < 1e-14);
        }
        CHECK(u.eval({1.0, 1.0}) == doctest::Approx(1.0));
    }
    SUBCASE("random image against a direct bilinear oracle") {
        auto g = testing::rng(9);
        const Image u = testing::random_image(4, g);
        for (int k = 0; k < 200; ++k) {
            const Vec2 x = testing::random_point(g);
            CHECK(std::abs(u.eval(x) - testing::bilinear_reference(u, x)) < 1e-14);
        }
    }
    SUBCASE("points outside the square are rejected") {
        const Image u(2);
        CHECK_THROWS_AS(u.eval({-1e-9, 0.5}), DomainError);
        CHECK_THROWS_AS(u.eval({0.5, 1.0 + 1e-12}), DomainError);
        CHECK_THROWS_AS(u.grad({std::nan(""), 0.5}), DomainError);
    }
}

TEST_CASE("gradient on an interior edge uses the lower-left cell") {
    // Level 1: nodes at 0, 0.5, 1. Values x^2 at the nodes give slopes 0.5 and 1.5.
    const Image u = Image::from_function(1, [](Vec2 x) { return x.x * x.x; });
    CHECK(u.grad({0.5, 0.25}).x == doctest::Approx(0.5));
    CHECK(u.grad({0.5 + 1e-9, 0.25}).x == doctest::Approx(1.5));
    CHECK(u.grad({1.0, 0.25}).x == doctest::Approx(1.5));
    CHECK(u.grad({0.0, 0.25}).x == doctest::Approx(0.5));
}

TEST_CASE("image transfer operators") {
    auto g = testing::rng(12);
    SUBCASE("constants survive both directions") {
        const Image c(3, 0.7);
        const Image f = prolong_image(c), r = restrict_image(c);
        for (double v : f.values()) CHECK(v == doctest::Approx(0.7).epsilon(1e-15));
        for (double v : r.values()) CHECK(v == doctest::Approx(0.7).epsilon(1e-15));
    }
    SUBCASE("prolongation preserves the function") {
        const Image u = testing::random_image(3, g);
        const Image f = prolong_image(u);
        CHECK(f.level() == 4);
        for (int k = 0; k < 100; ++k) {
            const Vec2 x = testing::random_point(g);
            CHECK(std::abs(f.eval(x) - u.eval(x)) < 1e-14);
        }
    }
    SUBCASE("restriction of a linear function is exact") {
        const Image u = Image::from_function(4, [](Vec2 x) { return 0.2 + 0.3 * x.x - 0.1 * x.y; });
        const Image c = restrict_image(u);
        // Boundary renormalization keeps interior linear functions exact; at the
        // boundary the one-sided average is biased by a quarter cell.
        for (int j = 1; j < c.cells(); ++j)
            for (int i = 1; i < c.cells(); ++i) {
                const Vec2 x = c.node(i, j);
                CHECK(c.at(i, j) == doctest::Approx(0.2 + 0.3 * x.x - 0.1 * x.y).epsilon(1e-14));
            }
    }
}

TEST_CASE("exact L2 norm of bilinear images") {
    const Image u = Image::from_function(3, [](Vec2 x) { return x.x * x.y; });
    CHECK(l2_norm(u) == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
    CHECK(l2_norm(Image(2, 0.5)) == doctest::Approx(0.5).epsilon(1e-15));
}
