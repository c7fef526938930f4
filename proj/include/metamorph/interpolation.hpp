#pragma once

#include <vector>

#include "metamorph/deformation.hpp"
#include "metamorph/energy.hpp"
#include "metamorph/image.hpp"
#include "metamorph/parallel.hpp"
#include "metamorph/registration.hpp"

namespace metamorph {

struct InterpolationConfig {
    int segments = 4;
    /// Coarsest spline level of the multilevel scheme; the path is solved there
    /// first and prolonged level by level. 0 means the finest level only.
    int coarsest_level = 3;
    /// Finest spline level; 0 means image level - 1.
    int finest_level = 0;
    /// Sweep cap per level.
    int max_sweeps = 100;
    /// Registration iterations per segment and sweep, after the first sweep.
    int sweep_iterations = 20;
    /// Stop a level once a sweep lowers the path energy by less than this fraction.
    double tolerance = 1e-6;
    /// Sup norm of the image gradient at which the image solve stops.
    double image_tolerance = 1e-11;
    int max_cg_iterations = 5000;
    RegistrationConfig registration;
    Execution execution = Execution::Parallel;

    void validate() const;
};

struct SweepReport {
    double energy_after_registration = 0.0;
    double energy_after_images = 0.0;
    int cg_iterations = 0;
    /// Sup norm of the derivative of the matching terms in the interior images.
    double image_residual = 0.0;
};

struct InterpolationLevel {
    int level = 0;
    double initial_energy = 0.0;
    std::vector<SweepReport> sweeps;
    bool converged = false;

    double final_energy() const { return sweeps.empty() ? initial_energy : sweeps.back().energy_after_images; }
};

struct InterpolationResult {
    std::vector<Image> images;              // u_0 .. u_K
    std::vector<Deformation> deformations;  // Phi_1 .. Phi_K
    std::vector<InterpolationLevel> levels; // coarsest first

    double final_energy() const { return levels.back().final_energy(); }
    bool converged() const { return levels.back().converged; }
};

/// Alternating minimization of the path energy with fixed end images: every
/// sweep registers each segment and then minimizes over all interior images
/// jointly. Images start as the linear blend, deformations as the identity.
InterpolationResult interpolate(const Image& u0, const Image& uK, const EnergyParams& p,
                                const InterpolationConfig& cfg);

/// Derivative of sum_k W[u_{k-1}, u_k, Phi_k] with respect to the nodal values
/// of the interior images u_1 .. u_{K-1}, concatenated.
std::vector<double> interior_image_gradient(const std::vector<Image>& images, const std::vector<Deformation>& phis,
                                            const EnergyParams& p, Execution ex = Execution::Parallel);

/// Replaces the interior images by the minimizer of the matching terms for
/// fixed deformations. Returns the number of conjugate gradient iterations.
int minimize_interior_images(std::vector<Image>& images, const std::vector<Deformation>& phis,
                             const EnergyParams& p, double tolerance, int max_iterations,
                             Execution ex = Execution::Parallel);

}  // namespace metamorph
