#pragma once

#include <cstddef>
#include <vector>

#include "metamorph/deformation.hpp"
#include "metamorph/image.hpp"
#include "metamorph/parallel.hpp"

namespace metamorph {

struct EnergyParams {
    double gamma = 1e-4;  // weight of |Laplace Phi|^2
    double delta = 1e-2;  // matching term is scaled by 1/delta

    void validate() const;
};

struct EnergyBreakdown {
    double regularizer = 0.0;  // int |D Phi - Id|^2 + gamma |Laplace Phi|^2
    double matching = 0.0;     // (1/delta) int (u_tilde o Phi - u)^2
    double total = 0.0;
    /// Deformed quadrature points that left the closed unit square and were clamped.
    std::size_t clamped_points = 0;
};

/// W[u, u_tilde, Phi]: regularizer on the spline mesh, matching term on the
/// image mesh, both with three-point Gauss rules.
EnergyBreakdown matching_energy(const Image& u, const Image& u_tilde, const Deformation& phi,
                                const EnergyParams& p, Execution ex = Execution::Parallel);

/// Gradient with respect to the free control displacements, in the layout of
/// Deformation::dofs().
std::vector<double> matching_energy_grad(const Image& u, const Image& u_tilde, const Deformation& phi,
                                         const EnergyParams& p, Execution ex = Execution::Parallel);

struct EnergyAndGradient {
    EnergyBreakdown energy;
    std::vector<double> gradient;
};

EnergyAndGradient matching_energy_and_grad(const Image& u, const Image& u_tilde, const Deformation& phi,
                                           const EnergyParams& p, Execution ex = Execution::Parallel);

/// K * sum_k W[u_{k-1}, u_k, Phi_k].
double path_energy(const std::vector<Image>& images, const std::vector<Deformation>& phis,
                   const EnergyParams& p, Execution ex = Execution::Parallel);

/// Per-segment energies W[u_{k-1}, u_k, Phi_k] (without the factor K).
std::vector<double> segment_energies(const std::vector<Image>& images, const std::vector<Deformation>& phis,
                                     const EnergyParams& p, Execution ex = Execution::Parallel);

/// Clamps into [0, 1]^2; returns true if the point was moved.
inline bool clamp_to_domain(Vec2& y) {
    bool moved = false;
    if (y.x < 0.0) { y.x = 0.0; moved = true; }
    if (y.x > 1.0) { y.x = 1.0; moved = true; }
    if (y.y < 0.0) { y.y = 0.0; moved = true; }
    if (y.y > 1.0) { y.y = 1.0; moved = true; }
    return moved;
}

}  // namespace metamorph
