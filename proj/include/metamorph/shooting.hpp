#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "metamorph/deformation.hpp"
#include "metamorph/energy.hpp"
#include "metamorph/image.hpp"
#include "metamorph/linalg.hpp"
#include "metamorph/parallel.hpp"
#include "metamorph/registration.hpp"

namespace metamorph {

/// Where the anisotropic filter acts in the image update: on the modulation
/// quotient before it is transported by the inverse of the new deformation,
/// or on the transported difference U_k - U_{k-1} o Phi_k^-1.
enum class FilterPlacement { BeforeComposition, AfterComposition };

struct ShootingConfig {
    double threshold = 1e-12;
    int max_iterations = 200;
    double det_guard = 0.1;
    bool smoothing = true;
    double tau0 = 1e-3;
    double beta = 0.8;
    double lambda = 0.5;
    FilterPlacement placement = FilterPlacement::BeforeComposition;
    /// Register Phi_1 afresh for every step instead of inheriting the previous Phi_2.
    bool reregister = false;
    Execution execution = Execution::Parallel;

    void validate() const;
};

/// Galerkin matrix of (zeta, psi) -> int 2 gamma Lap zeta . Lap psi + 2 D zeta : D psi
/// over the interior spline degrees of freedom of both components (block diagonal).
SparseSymmetricMatrix assemble_R(int level, const EnergyParams& p, Execution ex = Execution::Parallel);
/// One scalar block of assemble_R.
SparseSymmetricMatrix assemble_R_block(int level, const EnergyParams& p, Execution ex = Execution::Parallel);

/// d/de [det D(Phi + e Psi)] o (Phi + e Psi)^-1 at z = Phi(x), divided by det D Phi(x),
/// for Psi = psi e_c. jet is the jet of Phi at x (order >= 2); psi and grad_psi are
/// the test function and its gradient at x.
double transported_det_derivative(const JetEvaluation& jet, double psi, Vec2 grad_psi, int c);

/// Everything in the right-hand side that depends only on (Phi_1, U_0, U_1).
class RightHandSide {
public:
    RightHandSide(const Deformation& phi1, const Image& u0, const Image& u1, const EnergyParams& p,
                  double det_guard = 0.1);
    ~RightHandSide();
    RightHandSide(RightHandSide&&) noexcept;
    RightHandSide& operator=(RightHandSide&&) noexcept;

    /// T~[Phi](Psi) for every interior basis function Psi; layout as Deformation::dofs().
    /// Throws DegenerateDeformationError if det D Phi < det_guard where it is evaluated.
    std::vector<double> apply(const Deformation& phi, Execution ex = Execution::Parallel) const;

    int level() const;

private:
    struct Data;
    std::unique_ptr<Data> d_;
};

std::vector<double> apply_T_tilde(const Deformation& phi, const Deformation& phi1, const Image& u0, const Image& u1,
                                  const EnergyParams& p, Execution ex = Execution::Parallel);

struct FixedPointReport {
    int iterations = 0;
    double final_difference = 0.0;
    /// sup norm over dofs of R[Phi_2] - T~[Phi_2]
    double residual = 0.0;
    double min_det = 1.0;
    std::vector<double> differences;
};

/// Assembled and factored R for one spline level; reused across steps.
class FixedPointSolver {
public:
    FixedPointSolver(int level, const EnergyParams& p, Execution ex = Execution::Parallel);

    /// Phi^{j+1} = R^-1 T~[Phi^j] from Phi^0 = Id. Throws NonConvergenceError at the cap.
    Deformation solve(const Deformation& phi1, const Image& u0, const Image& u1, const ShootingConfig& cfg,
                      FixedPointReport* report = nullptr) const;

    /// R applied to the displacement of phi, in dof layout.
    std::vector<double> apply_R(const Deformation& phi) const;
    int level() const { return level_; }

private:
    int level_;
    EnergyParams params_;
    SparseSymmetricMatrix block_;
    CholeskyFactor factor_;
    std::vector<double> solve_dofs(std::span<const double> rhs) const;
};

Deformation fixed_point_solve(const Deformation& phi1, const Image& u0, const Image& u1, const EnergyParams& p,
                              const ShootingConfig& cfg, FixedPointReport* report = nullptr);

/// Approximate inverse in the spline space: target points are located in the
/// deformed spline cells, mapped back through the bilinear interpolation of the
/// deformed cell vertices, and interpolated at the collocation abscissae.
Deformation invert_deformation(const Deformation& phi);

/// (U_1 - U_0 o Phi_1^-1) / (det D Phi_1 o Phi_1^-1) at the image nodes.
Image modulation_quotient(const Image& u0, const Image& u1, const Deformation& phi1_inverse,
                          const Deformation& phi1);
/// u o phi at the image nodes (points clamped into the square).
Image compose(const Image& u, const Deformation& phi);

/// U_2 = Q o Phi_2^-1 + U_1 o Phi_2^-1, Q the modulation quotient; `image_index`
/// selects the filter time step.
Image image_update(const Image& u0, const Image& u1, const Deformation& phi1, const Deformation& phi2,
                   const ShootingConfig& cfg, int image_index = 2);

struct Exp2Result {
    Image u2;
    Deformation phi2;
    FixedPointReport report;
};

Exp2Result exp2(const Image& u0, const Image& u1, const Deformation& phi1, const EnergyParams& p,
                const ShootingConfig& cfg, int image_index = 2);

/// Vector field sampled at the image nodes.
struct VectorField {
    int level = 0;
    std::vector<Vec2> values;
};

struct StepDiagnostics {
    int index = 0;
    int iterations = 0;
    double final_difference = 0.0;
    double residual = 0.0;
    double min_det = 1.0;
    double energy = 0.0;
};

struct ShootingResult {
    std::vector<Image> images;             // U_0 .. U_K
    std::vector<Deformation> deformations; // Phi_1 .. Phi_K
    std::vector<VectorField> velocities;   // V_k = K (Phi_k - Id)
    std::vector<Image> modulations;        // I_k = U_k o Phi_k - U_{k-1}
    std::vector<StepDiagnostics> steps;    // one per computed image U_2 .. U_K
    RegistrationReport registration;
    /// Index k of the image whose step failed, if any; the fields above then
    /// hold the images and deformations computed before the failure.
    std::optional<int> failed_step;
    std::string failure;

    bool complete() const { return !failed_step.has_value(); }
};

VectorField velocity_field(const Deformation& phi, int image_level, int steps);
Image intensity_modulation(const Image& previous, const Image& current, const Deformation& phi);

ShootingResult exp_k(const Image& u0, const Image& u1, int steps, const EnergyParams& p, const ShootingConfig& cfg,
                     const RegistrationConfig& reg);

}  // namespace metamorph
