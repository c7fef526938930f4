#include <doctest.h>

#include <cmath>

#include "metamorph/errors.hpp"
#include "metamorph/registration.hpp"
#include "metamorph/scenes.hpp"
#include "test_support.hpp"

using namespace metamorph;

TEST_CASE("identical images need no iterations") {
    auto g = testing::rng(11);
    const Image u = testing::smooth_random_image(5, g);
    RegistrationReport rep;
    const Deformation phi = register_images(u, u, {}, {}, &rep);
    CHECK(phi.is_identity());
    for (const auto& l : rep.levels) CHECK(l.iterations == 0);
    CHECK(rep.final_energy == 0.0);
    CHECK(rep.converged);
}

TEST_CASE("constant images register to the identity") {
    const Deformation phi = register_images(Image(5, 0.2), Image(5, 0.7), {}, {});
    CHECK(max_control_difference(phi, Deformation(4)) < 1e-12);
}

TEST_CASE("translated blob") {
    const EnergyParams p;
    const Image u0 = gaussian_blob(5, {0.5, 0.5}, 0.1);
    const Image u1 = gaussian_blob(5, {0.52, 0.5}, 0.1);
    RegistrationReport rep;
    const Deformation phi = register_images(u0, u1, p, {}, &rep);

    CHECK(rep.final_energy < rep.identity_energy);
    CHECK(rep.final_energy <= (1.0 / p.delta) * std::pow(l2_distance(u1, u0), 2) + 1e-12);
    CHECK(min_jacobian_determinant(phi) >= 0.1);
    for (std::size_t i = 1; i < rep.history.size(); ++i) CHECK(rep.history[i] <= rep.history[i - 1]);

    // Mean displacement over the blob points along +x.
    Vec2 mean{0.0, 0.0};
    for (int j = 0; j <= 16; ++j)
        for (int i = 0; i <= 16; ++i) {
            const Vec2 x{0.35 + 0.3 * i / 16.0, 0.35 + 0.3 * j / 16.0};
            mean = mean + (phi.eval(x) - x);
        }
    REQUIRE(norm(mean) > 0.0);
    CHECK(mean.x / norm(mean) > std::cos(M_PI / 6));
}

TEST_CASE("random pairs never beat the identity bound") {
    auto g = testing::rng(12);
    const EnergyParams p;
    RegistrationConfig cfg;
    cfg.max_iterations = 40;
    for (int trial = 0; trial < 4; ++trial) {
        const Image u0 = testing::smooth_random_image(4, g), u1 = testing::smooth_random_image(4, g);
        RegistrationReport rep;
        const Deformation phi = register_images(u0, u1, p, cfg, &rep);
        CHECK(rep.final_energy <= rep.identity_energy + 1e-12);
        CHECK(rep.final_energy <= (1.0 / p.delta) * std::pow(l2_distance(u1, u0), 2) + 1e-12);
        CHECK(min_jacobian_determinant(phi) >= cfg.det_guard);
        for (std::size_t i = 1; i < rep.history.size(); ++i) CHECK(rep.history[i] <= rep.history[i - 1]);
    }
}

TEST_CASE("refinement from a start point does not increase the energy") {
    const EnergyParams p;
    const Image u0 = gaussian_blob(4, {0.5, 0.5}, 0.12), u1 = gaussian_blob(4, {0.52, 0.51}, 0.12);
    RegistrationConfig cfg;
    cfg.max_iterations = 10;
    const Deformation first = register_images(u0, u1, p, cfg);
    LevelReport lr;
    const Deformation second = refine_registration(u0, u1, first, p, cfg, &lr);
    CHECK(lr.final_energy <= lr.initial_energy);
    CHECK(testing::rel_err(lr.initial_energy, matching_energy(u0, u1, first, p).total) < 1e-14);
    CHECK(min_jacobian_determinant(second) >= 0.1);
}

TEST_CASE("serial and parallel registration agree") {
    const Image u0 = gaussian_blob(4, {0.5, 0.5}, 0.12), u1 = gaussian_blob(4, {0.52, 0.5}, 0.12);
    RegistrationConfig a, b;
    a.max_iterations = b.max_iterations = 15;
    a.execution = Execution::Serial;
    const Deformation pa = register_images(u0, u1, {}, a), pb = register_images(u0, u1, {}, b);
    CHECK(max_control_difference(pa, pb) < 1e-12);
}

TEST_CASE("registration configuration validation") {
    RegistrationConfig cfg;
    cfg.armijo_c1 = 0.7;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = {};
    cfg.backtrack = 1.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    CHECK_THROWS_AS(register_images(Image(4), Image(5), {}, {}), DimensionError);
}
