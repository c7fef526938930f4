#pragma once

#include <optional>
#include <vector>

#include "metamorph/deformation.hpp"
#include "metamorph/energy.hpp"
#include "metamorph/image.hpp"
#include "metamorph/parallel.hpp"

namespace metamorph {

struct RegistrationConfig {
    int coarsest_level = 3;
    /// Finest spline level; 0 means image level - 1.
    int finest_level = 0;
    int max_iterations = 500;
    double armijo_c1 = 1e-4;
    double backtrack = 0.5;
    double gradient_tolerance = 1e-8;
    int restart_period = 20;
    double det_guard = 0.1;
    Execution execution = Execution::Parallel;

    void validate() const;
};

struct LevelReport {
    int level = 0;
    int iterations = 0;
    double initial_energy = 0.0;
    double final_energy = 0.0;
    double gradient_norm = 0.0;
    bool converged = false;
};

struct RegistrationReport {
    std::vector<LevelReport> levels;
    /// Energies of the accepted iterates on the finest level.
    std::vector<double> history;
    double identity_energy = 0.0;
    double final_energy = 0.0;
    bool converged = false;
};

/// Multilevel Fletcher-Reeves descent for argmin_Phi W[u0, u1, Phi], starting
/// from the identity on the coarsest level.
Deformation register_images(const Image& u0, const Image& u1, const EnergyParams& p, const RegistrationConfig& cfg,
                            RegistrationReport* report = nullptr);

/// Single-level descent started from `start` (level of `start`).
Deformation refine_registration(const Image& u0, const Image& u1, const Deformation& start, const EnergyParams& p,
                                const RegistrationConfig& cfg, LevelReport* report = nullptr,
                                std::vector<double>* history = nullptr);

}  // namespace metamorph
