#pragma once

#include "metamorph/image.hpp"
#include "metamorph/linalg.hpp"
#include "metamorph/parallel.hpp"

namespace metamorph {

struct FilterParams {
    double tau = 1e-3;
    double lambda = 0.5;

    void validate() const;
};

/// Time step for image index k: beta^(k-2) * tau0.
double filter_time_step(int image_index, double tau0 = 1e-3, double beta = 0.8);

/// Bilinear mass matrix on the image mesh.
SparseSymmetricMatrix assemble_mass(int level);

/// Stiffness matrix with the edge-stopping weight (1 + |grad J|^2 / lambda^2)^-1
/// evaluated at the quadrature points.
SparseSymmetricMatrix assemble_weighted_stiffness(const Image& j, double lambda,
                                                  Execution ex = Execution::Parallel);

/// One implicit step: solves (M + tau S[J]) x = M J with natural boundary conditions.
Image anisotropic_smooth(const Image& j, const FilterParams& p, Execution ex = Execution::Parallel);

/// int |grad u|^2, exact for bilinear u.
double dirichlet_energy(const Image& u);
/// int |grad u| with the three-point rule.
double total_variation(const Image& u);
/// 1^T M u, the integral of u.
double integral(const Image& u);

}  // namespace metamorph
