#include <doctest.h>

#include <cmath>

#include "metamorph/energy.hpp"
#include "metamorph/errors.hpp"
#include "metamorph/grid.hpp"
#include "test_support.hpp"

using namespace metamorph;

namespace {

// Independent evaluation of W with a p-point Gauss rule per dimension on both meshes.
double energy_with_rule(const Image& u, const Image& ut, const Deformation& phi, const EnergyParams& p, int points) {
    const QuadratureRule qs(phi.level(), points), qi(u.level(), points);
    double reg = 0.0, mat = 0.0;
    for (int cy = 0; cy < qs.cells_per_dim(); ++cy)
        for (int cx = 0; cx < qs.cells_per_dim(); ++cx)
            for (int k = 0; k < qs.points_per_cell(); ++k) {
                const auto j = phi.jet(qs.point(cx, cy, k), 2);
                double s = 0.0;
                for (int a = 0; a < 2; ++a)
                    for (int b = 0; b < 2; ++b) s += std::pow(j.jacobian(a, b) - (a == b), 2);
                reg += qs.weight(k) * (s + p.gamma * (j.laplacian.x * j.laplacian.x + j.laplacian.y * j.laplacian.y));
            }
    for (int cy = 0; cy < qi.cells_per_dim(); ++cy)
        for (int cx = 0; cx < qi.cells_per_dim(); ++cx)
            for (int k = 0; k < qi.points_per_cell(); ++k) {
                const Vec2 x = qi.point(cx, cy, k);
                const double r = testing::bilinear_reference(ut, phi.eval(x)) - testing::bilinear_reference(u, x);
                mat += qi.weight(k) * r * r / p.delta;
            }
    return reg + mat;
}

double directional_fd(const Image& u, const Image& ut, const Deformation& phi, const EnergyParams& p,
                      const std::vector<double>& dir, double step) {
    auto dofs = phi.dofs();
    auto shifted = [&](double s) {
        std::vector<double> v = dofs;
        for (std::size_t i = 0; i < v.size(); ++i) v[i] += s * dir[i];
        return matching_energy(u, ut, Deformation::from_dofs(phi.level(), v), p).total;
    };
    return (shifted(step) - shifted(-step)) / (2.0 * step);
}

}  // namespace

TEST_CASE("identical images under the identity have zero energy") {
    auto g = testing::rng(1);
    const Image u = testing::random_image(4, g);
    const auto e = matching_energy(u, u, Deformation(3), {});
    CHECK(e.total == 0.0);
    CHECK(e.clamped_points == 0);
    const auto grad = matching_energy_grad(u, u, Deformation(3), {});
    CHECK(norm_inf(grad) == 0.0);
}

TEST_CASE("constant images under the identity") {
    const auto e = matching_energy(Image(4, 0.0), Image(4, 0.1), Deformation(3), {});
    CHECK(e.regularizer == 0.0);
    CHECK(e.matching == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(e.total == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("path energy of constant images") {
    const std::vector<Image> imgs{Image(4, 0.0), Image(4, 0.05), Image(4, 0.1)};
    const std::vector<Deformation> phis{Deformation(3), Deformation(3)};
    CHECK(path_energy(imgs, phis, {}) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(path_energy({imgs[0], imgs[0], imgs[0]}, phis, {}) == 0.0);
    CHECK_THROWS_AS(path_energy(imgs, {Deformation(3)}, {}), DimensionError);
}

TEST_CASE("path energy is K times the sum of segment energies") {
    auto g = testing::rng(2);
    std::vector<Image> imgs;
    std::vector<Deformation> phis;
    for (int k = 0; k < 4; ++k) imgs.push_back(testing::smooth_random_image(4, g));
    for (int k = 0; k < 3; ++k) phis.push_back(testing::random_deformation(3, g, 0.01));
    double sum = 0.0;
    for (int k = 0; k < 3; ++k) sum += matching_energy(imgs[k], imgs[k + 1], phis[k], {}).total;
    CHECK(path_energy(imgs, phis, {}) == doctest::Approx(3.0 * sum).epsilon(1e-14));
}

TEST_CASE("energy parts add up and are nonnegative") {
    auto g = testing::rng(3);
    for (int trial = 0; trial < 5; ++trial) {
        const auto e = matching_energy(testing::random_image(4, g), testing::random_image(4, g),
                                       testing::random_deformation(3, g, 0.02), {});
        CHECK(e.regularizer > 0.0);
        CHECK(e.matching > 0.0);
        CHECK(std::abs(e.total - (e.regularizer + e.matching)) <= 1e-12 * e.total);
    }
}

TEST_CASE("constant target image contributes no matching gradient") {
    auto g = testing::rng(4);
    const Deformation phi = testing::random_deformation(3, g, 0.02);
    const Image u = testing::random_image(4, g);
    const auto grad = matching_energy_grad(u, Image(4, 0.4), phi, {});
    // With both images constant the matching residual is constant too, but its
    // gradient factor vanishes; the regularizer gradient is all that remains.
    const auto reg_only = matching_energy_grad(Image(4, 0.4), Image(4, 0.4), phi, {});
    for (std::size_t i = 0; i < grad.size(); ++i) CHECK(std::abs(grad[i] - reg_only[i]) < 1e-14);
}

TEST_CASE("gradient matches central differences") {
    auto g = testing::rng(5);
    const EnergyParams p;
    for (int trial = 0; trial < 3; ++trial) {
        const Image u = testing::random_image(5, g);
        const Image ut = testing::smooth_target_image(5, g);
        const Deformation phi = testing::random_deformation(4, g, 0.005);
        const auto grad = matching_energy_grad(u, ut, phi, p);
        for (int k = 0; k < 4; ++k) {
            const auto dir = testing::random_unit_vector(phi.dof_count(), g);
            const double fd = directional_fd(u, ut, phi, p, dir, 1e-6);
            CHECK(testing::rel_err(dot(grad, dir), fd) < 1e-4);
        }
    }
}

TEST_CASE("gradient is exact for a kink-free target") {
    // A globally bilinear target has no kinks along mesh edges, so the energy
    // is smooth in the control points and differences converge cleanly.
    auto g = testing::rng(15);
    const EnergyParams p;
    const Image u = testing::random_image(4, g);
    const Image ut = Image::from_function(4, [](Vec2 x) { return 0.2 + 0.5 * x.x - 0.3 * x.y + 0.4 * x.x * x.y; });
    const Deformation phi = testing::random_deformation(3, g, 0.01);
    const auto grad = matching_energy_grad(u, ut, phi, p);
    for (int k = 0; k < 10; ++k) {
        const auto dir = testing::random_unit_vector(phi.dof_count(), g);
        const double fd = directional_fd(u, ut, phi, p, dir, 1e-5);
        CHECK(testing::rel_err(dot(grad, dir), fd) < 1e-7);
    }
}

TEST_CASE("serial reference and parallel kernels agree") {
    auto g = testing::rng(6);
    const Image u = testing::random_image(5, g), ut = testing::random_image(5, g);
    const Deformation phi = testing::random_deformation(4, g, 0.01);
    const auto a = matching_energy_and_grad(u, ut, phi, {}, Execution::Serial);
    const auto b = matching_energy_and_grad(u, ut, phi, {}, Execution::Parallel);
    CHECK(testing::rel_err(a.energy.total, b.energy.total) < 1e-12);
    const double scale = norm_inf(a.gradient);
    for (std::size_t i = 0; i < a.gradient.size(); ++i) CHECK(std::abs(a.gradient[i] - b.gradient[i]) <= 1e-12 * scale);
    // Repeated parallel runs are bit-identical.
    const auto c = matching_energy_and_grad(u, ut, phi, {}, Execution::Parallel);
    CHECK(c.energy.total == b.energy.total);
    CHECK(c.gradient == b.gradient);
}

TEST_CASE("three-point rule against a refined six-point rule") {
    auto g = testing::rng(7);
    const EnergyParams p;
    SUBCASE("identity deformation: all integrands are within the exact degree") {
        const Image u = testing::random_image(4, g), ut = testing::random_image(4, g);
        const double e3 = matching_energy(u, ut, Deformation(3), p).total;
        const double e6 = energy_with_rule(u, ut, Deformation(3), p, 6);
        CHECK(testing::rel_err(e3, e6) < 1e-12);
    }
    SUBCASE("small smooth deformation of smooth images") {
        // The integrands are piecewise polynomials of higher degree with kinks
        // along preimages of image-mesh edges, so agreement is approximate.
        const Image u = testing::smooth_random_image(5, g), ut = testing::smooth_random_image(5, g);
        const Deformation phi = testing::random_deformation(4, g, 0.005);
        const double e3 = matching_energy(u, ut, phi, p).total;
        const double e6 = energy_with_rule(u, ut, phi, p, 6);
        MESSAGE("relative difference 3-point vs 6-point: " << testing::rel_err(e3, e6));
        CHECK(testing::rel_err(e3, e6) < 1e-4);
    }
}

TEST_CASE("points mapped outside the square are clamped and counted") {
    Deformation id(2);
    std::vector<Vec2> c(id.control().size(), Vec2{0.3, 0.0});
    const Deformation shift = Deformation::unconstrained(2, c);
    const auto e = matching_energy(Image(3, 0.2), Image(3, 0.2), shift, {});
    CHECK(e.clamped_points > 0);
    CHECK(e.matching == doctest::Approx(0.0));
}

TEST_CASE("level mismatches are rejected") {
    CHECK_THROWS_AS(matching_energy(Image(4), Image(5), Deformation(3), {}), DimensionError);
    CHECK_THROWS_AS(matching_energy(Image(4), Image(4), Deformation(4), {}), DimensionError);
    CHECK_THROWS_AS((EnergyParams{-1.0, 1.0}.validate()), ConfigError);
}
