// Times the serial reference kernels against the OpenMP kernels.
#include <omp.h>

#include <CLI11.hpp>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <vector>

#include "metamorph/filtering.hpp"
#include "metamorph/interpolation.hpp"
#include "metamorph/scenes.hpp"
#include "metamorph/shooting.hpp"

using namespace metamorph;

namespace {

Deformation swirl(int level, double amplitude) {
    const int n = 1 << level;
    const std::size_t per = static_cast<std::size_t>(n + 1) * (n + 1);
    std::vector<double> dofs(2 * per);
    for (int b = 0; b <= n; ++b)
        for (int a = 0; a <= n; ++a) {
            const double x = static_cast<double>(a) / n, y = static_cast<double>(b) / n;
            const double s = std::sin(std::numbers::pi * x) * std::sin(std::numbers::pi * y);
            dofs[static_cast<std::size_t>(b) * (n + 1) + a] = amplitude * s * (y - 0.5);
            dofs[per + static_cast<std::size_t>(b) * (n + 1) + a] = -amplitude * s * (x - 0.5);
        }
    return Deformation::from_dofs(level, dofs);
}

double seconds_per_call(const std::function<void()>& f, int repeat) {
    f();
    const auto t0 = std::chrono::steady_clock::now();
    for (int r = 0; r < repeat; ++r) f();
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() / repeat;
}

void report(const char* name, const std::function<void(Execution)>& kernel, int repeat) {
    const double serial = seconds_per_call([&] { kernel(Execution::Serial); }, repeat);
    const double parallel = seconds_per_call([&] { kernel(Execution::Parallel); }, repeat);
    std::printf("%-28s %12.3f %12.3f %9.2fx\n", name, serial * 1e3, parallel * 1e3, serial / parallel);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Serial versus parallel kernel timings"};
    int level = 5;
    int repeat = 5;
    app.add_option("--spline-level", level, "spline level N; images use N+1")->check(CLI::Range(2, 9));
    app.add_option("--repeat", repeat, "timed calls per kernel")->check(CLI::PositiveNumber);
    CLI11_PARSE(app, argc, argv);

    const EnergyParams p;
    const Image u0 = gaussian_blob(level + 1, {0.45, 0.5}, 0.12, 0.8, 0.1);
    const Image u1 = gaussian_blob(level + 1, {0.55, 0.5}, 0.12, 0.8, 0.1);
    const Deformation phi = swirl(level, 0.05);
    const Deformation phi1 = swirl(level, 0.03);
    const std::vector<Image> path{u0, compose(u0, phi1), u1};
    const std::vector<Deformation> phis{phi1, phi};

    std::printf("spline level %d, image level %d, %d threads\n", level, level + 1, omp_get_max_threads());
    std::printf("%-28s %12s %12s %10s\n", "kernel", "serial ms", "parallel ms", "speedup");
    report("energy and gradient", [&](Execution ex) { matching_energy_and_grad(u0, u1, phi, p, ex); }, repeat);
    report("gradient right-hand side", [&](Execution ex) { apply_T_tilde(phi, phi1, u0, u1, p, ex); }, repeat);
    report("regularizer matrix", [&](Execution ex) { assemble_R(level, p, ex); }, repeat);
    report("anisotropic filter", [&](Execution ex) { anisotropic_smooth(u0, {}, ex); }, repeat);
    report("path image gradient", [&](Execution ex) { interior_image_gradient(path, phis, p, ex); }, repeat);
    return 0;
}
