#include "metamorph/energy.hpp"

#include <string>

#include "metamorph/errors.hpp"
#include "metamorph/grid.hpp"

namespace metamorph {

void EnergyParams::validate() const {
    if (!(gamma > 0.0)) throw ConfigError("gamma must be positive");
    if (!(delta > 0.0)) throw ConfigError("delta must be positive");
}

namespace {

struct Accumulator {
    double regularizer = 0.0;
    double matching = 0.0;
    std::size_t clamped = 0;
    std::vector<double> grad;
};

struct Problem {
    const Image& u;
    const Image& ut;
    const Deformation& phi;
    const EnergyParams& p;
    QuadratureRule spline_rule;
    QuadratureRule image_rule;
    bool with_grad;
};

void check_levels(const Image& u, const Image& ut, const Deformation& phi) {
    if (u.level() != ut.level()) throw DimensionError("images must share a level");
    if (phi.level() >= u.level()) throw DimensionError("spline level must be below the image level");
}

void regularizer_rows(const Problem& pr, int row_begin, int row_end, Accumulator& acc) {
    const QuadratureRule& q = pr.spline_rule;
    const int n = q.cells_per_dim();
    const std::size_t per = pr.phi.dofs_per_component();
    const double gamma = pr.p.gamma;
    for (int cy = row_begin; cy < row_end; ++cy) {
        for (int cx = 0; cx < n; ++cx) {
            for (int k = 0; k < q.points_per_cell(); ++k) {
                const Vec2 x = q.point(cx, cy, k);
                const double w = q.weight(k);
                const JetEvaluation j = pr.phi.jet_unchecked(x, 2);
                const Mat2 dd = j.jacobian - Mat2::identity();
                acc.regularizer += w * (frobenius_sq(dd) + gamma * dot(j.laplacian, j.laplacian));
                if (!pr.with_grad) continue;
                const FreeBasis1d bx = free_basis_1d(x.x, n, 2);
                const FreeBasis1d by = free_basis_1d(x.y, n, 2);
                for (int b = 0; b < by.count; ++b) {
                    for (int a = 0; a < bx.count; ++a) {
                        const double gx = bx.w[1][a] * by.w[0][b];
                        const double gy = bx.w[0][a] * by.w[1][b];
                        const double lap = bx.w[2][a] * by.w[0][b] + bx.w[0][a] * by.w[2][b];
                        const std::size_t s = static_cast<std::size_t>(by.index[b]) * (n + 1) + bx.index[a];
                        for (int c = 0; c < 2; ++c) {
                            acc.grad[c * per + s] +=
                                w * (2.0 * (dd(c, 0) * gx + dd(c, 1) * gy) + 2.0 * gamma * j.laplacian[c] * lap);
                        }
                    }
                }
            }
        }
    }
}

void matching_rows(const Problem& pr, int row_begin, int row_end, Accumulator& acc) {
    const QuadratureRule& q = pr.image_rule;
    const int n_img = q.cells_per_dim();
    const int n = pr.phi.cells();
    const std::size_t per = pr.phi.dofs_per_component();
    const double inv_delta = 1.0 / pr.p.delta;
    for (int cy = row_begin; cy < row_end; ++cy) {
        for (int cx = 0; cx < n_img; ++cx) {
            for (int k = 0; k < q.points_per_cell(); ++k) {
                const Vec2 x = q.point(cx, cy, k);
                const double w = q.weight(k);
                const Vec2 y_raw = pr.phi.eval_unchecked(x);
                Vec2 y = y_raw;
                if (clamp_to_domain(y)) ++acc.clamped;
                const double r = pr.ut.eval_unchecked(y) - pr.u.eval_unchecked(x);
                acc.matching += w * inv_delta * r * r;
                if (!pr.with_grad) continue;
                // The clamped energy does not vary along a clamped coordinate.
                Vec2 g = pr.ut.grad_unchecked(y);
                if (y.x != y_raw.x) g.x = 0.0;
                if (y.y != y_raw.y) g.y = 0.0;
                const double f = 2.0 * inv_delta * w * r;
                const FreeBasis1d bx = free_basis_1d(x.x, n, 0);
                const FreeBasis1d by = free_basis_1d(x.y, n, 0);
                for (int b = 0; b < by.count; ++b) {
                    for (int a = 0; a < bx.count; ++a) {
                        const double psi = bx.w[0][a] * by.w[0][b];
                        const std::size_t s = static_cast<std::size_t>(by.index[b]) * (n + 1) + bx.index[a];
                        acc.grad[s] += f * g.x * psi;
                        acc.grad[per + s] += f * g.y * psi;
                    }
                }
            }
        }
    }
}

EnergyAndGradient evaluate(const Image& u, const Image& ut, const Deformation& phi, const EnergyParams& p,
                           Execution ex, bool with_grad) {
    check_levels(u, ut, phi);
    const Problem pr{u, ut, phi, p, build_quadrature(phi.level()), build_quadrature(u.level()), with_grad};
    const std::size_t dofs = with_grad ? phi.dof_count() : 0;

    EnergyAndGradient out;
    if (ex == Execution::Serial) {
        Accumulator acc;
        acc.grad.assign(dofs, 0.0);
        regularizer_rows(pr, 0, pr.spline_rule.cells_per_dim(), acc);
        matching_rows(pr, 0, pr.image_rule.cells_per_dim(), acc);
        out.energy = {acc.regularizer, acc.matching, acc.regularizer + acc.matching, acc.clamped};
        out.gradient = std::move(acc.grad);
        return out;
    }

    std::vector<Accumulator> reg(kReductionBlocks), mat(kReductionBlocks);
    for (auto& a : reg) a.grad.assign(dofs, 0.0);
    for (auto& a : mat) a.grad.assign(dofs, 0.0);
    parallel_blocks(pr.spline_rule.cells_per_dim(),
                    [&](int b, int r0, int r1) { regularizer_rows(pr, r0, r1, reg[b]); });
    parallel_blocks(pr.image_rule.cells_per_dim(),
                    [&](int b, int r0, int r1) { matching_rows(pr, r0, r1, mat[b]); });
    EnergyBreakdown e;
    out.gradient.assign(dofs, 0.0);
    for (int b = 0; b < kReductionBlocks; ++b) {
        e.regularizer += reg[b].regularizer;
        for (std::size_t i = 0; i < dofs; ++i) out.gradient[i] += reg[b].grad[i];
    }
    for (int b = 0; b < kReductionBlocks; ++b) {
        e.matching += mat[b].matching;
        e.clamped_points += mat[b].clamped;
        for (std::size_t i = 0; i < dofs; ++i) out.gradient[i] += mat[b].grad[i];
    }
    e.total = e.regularizer + e.matching;
    out.energy = e;
    return out;
}

}  // namespace

EnergyBreakdown matching_energy(const Image& u, const Image& u_tilde, const Deformation& phi,
                                const EnergyParams& p, Execution ex) {
    return evaluate(u, u_tilde, phi, p, ex, false).energy;
}

std::vector<double> matching_energy_grad(const Image& u, const Image& u_tilde, const Deformation& phi,
                                         const EnergyParams& p, Execution ex) {
    return evaluate(u, u_tilde, phi, p, ex, true).gradient;
}

EnergyAndGradient matching_energy_and_grad(const Image& u, const Image& u_tilde, const Deformation& phi,
                                           const EnergyParams& p, Execution ex) {
    return evaluate(u, u_tilde, phi, p, ex, true);
}

std::vector<double> segment_energies(const std::vector<Image>& images, const std::vector<Deformation>& phis,
                                     const EnergyParams& p, Execution ex) {
    if (images.size() != phis.size() + 1) {
        throw DimensionError("path needs one more image than deformations (" + std::to_string(images.size()) +
                             " images, " + std::to_string(phis.size()) + " deformations)");
    }
    std::vector<double> w(phis.size());
    for (std::size_t k = 0; k < phis.size(); ++k) w[k] = matching_energy(images[k], images[k + 1], phis[k], p, ex).total;
    return w;
}

double path_energy(const std::vector<Image>& images, const std::vector<Deformation>& phis, const EnergyParams& p,
                   Execution ex) {
    const auto w = segment_energies(images, phis, p, ex);
    double sum = 0.0;
    for (double v : w) sum += v;
    return static_cast<double>(phis.size()) * sum;
}

}  // namespace metamorph
