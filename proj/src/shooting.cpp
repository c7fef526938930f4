#include "metamorph/shooting.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "metamorph/errors.hpp"
#include "metamorph/filtering.hpp"
#include "metamorph/grid.hpp"

namespace metamorph {

void ShootingConfig::validate() const {
    if (!(threshold > 0.0)) throw ConfigError("fixed-point threshold must be positive");
    if (max_iterations < 1) throw ConfigError("fixed-point iteration cap must be positive");
    if (!(beta > 0.0 && beta < 1.0)) throw ConfigError("smoothing decay beta must lie in (0, 1)");
    if (!(tau0 >= 0.0)) throw ConfigError("smoothing time step must be nonnegative");
    if (!(lambda > 0.0)) throw ConfigError("smoothing lambda must be positive");
    if (!(det_guard > 0.0)) throw ConfigError("determinant guard must be positive");
}

namespace {

std::size_t free_index(int a, int b, int n) { return static_cast<std::size_t>(b) * (n + 1) + a; }

void r_rows(int level, const EnergyParams& p, int r0, int r1, std::vector<Triplet>& out) {
    const QuadratureRule q = build_quadrature(level);
    const int n = q.cells_per_dim();
    for (int cy = r0; cy < r1; ++cy) {
        for (int cx = 0; cx < n; ++cx) {
            // All quadrature points of a cell share the same active functions.
            const FreeBasis1d probe_x = free_basis_1d((cx + 0.5) / n, n, 0);
            const FreeBasis1d probe_y = free_basis_1d((cy + 0.5) / n, n, 0);
            const int count = probe_x.count * probe_y.count;
            double local[16][16] = {};
            std::size_t index[16];
            for (int k = 0; k < q.points_per_cell(); ++k) {
                const Vec2 x = q.point(cx, cy, k);
                const double w = q.weight(k);
                const FreeBasis1d bx = free_basis_1d(x.x, n, 2);
                const FreeBasis1d by = free_basis_1d(x.y, n, 2);
                Vec2 grad[16];
                double lap[16];
                for (int b = 0; b < by.count; ++b)
                    for (int a = 0; a < bx.count; ++a) {
                        const int s = b * bx.count + a;
                        grad[s] = {bx.w[1][a] * by.w[0][b], bx.w[0][a] * by.w[1][b]};
                        lap[s] = bx.w[2][a] * by.w[0][b] + bx.w[0][a] * by.w[2][b];
                        index[s] = free_index(bx.index[a], by.index[b], n);
                    }
                for (int s = 0; s < count; ++s)
                    for (int t = 0; t < count; ++t)
                        local[s][t] += w * (2.0 * p.gamma * lap[s] * lap[t] + 2.0 * dot(grad[s], grad[t]));
            }
            for (int s = 0; s < count; ++s)
                for (int t = 0; t < count; ++t) out.push_back({index[s], index[t], local[s][t]});
        }
    }
}

std::vector<Triplet> r_triplets(int level, const EnergyParams& p, Execution ex) {
    const int n = cells_per_dim(level);
    std::vector<Triplet> all;
    if (ex == Execution::Serial) {
        r_rows(level, p, 0, n, all);
        return all;
    }
    std::vector<std::vector<Triplet>> parts(kReductionBlocks);
    parallel_blocks(n, [&](int b, int r0, int r1) { r_rows(level, p, r0, r1, parts[b]); });
    for (auto& part : parts) all.insert(all.end(), part.begin(), part.end());
    return all;
}

// sum_{i,j,k} A_ki d_j d_k Phi^i A_jc: the gradient of log det D Phi applied to A e_c.
double log_det_gradient_term(const Mat2& a, const std::array<Mat2, 2>& hess, int c) {
    double h = 0.0;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            for (int k = 0; k < 2; ++k) h += a(k, i) * hess[i](j, k) * a(j, c);
    return h;
}

void guard(double det, double limit, Vec2 where, const char* what) {
    if (!(det >= limit)) {
        throw DegenerateDeformationError(std::string(what) + ": det D Phi = " + std::to_string(det) + " at (" +
                                             std::to_string(where.x) + ", " + std::to_string(where.y) + ")",
                                         where.x, where.y, det);
    }
}

}  // namespace

SparseSymmetricMatrix assemble_R_block(int level, const EnergyParams& p, Execution ex) {
    p.validate();
    const std::size_t per = static_cast<std::size_t>(cells_per_dim(level) + 1) * (cells_per_dim(level) + 1);
    return SparseSymmetricMatrix::from_triplets(per, r_triplets(level, p, ex));
}

SparseSymmetricMatrix assemble_R(int level, const EnergyParams& p, Execution ex) {
    p.validate();
    const std::size_t per = static_cast<std::size_t>(cells_per_dim(level) + 1) * (cells_per_dim(level) + 1);
    auto t = r_triplets(level, p, ex);
    const std::size_t m = t.size();
    t.reserve(2 * m);
    for (std::size_t k = 0; k < m; ++k) t.push_back({t[k].row + per, t[k].col + per, t[k].value});
    return SparseSymmetricMatrix::from_triplets(2 * per, std::move(t));
}

double transported_det_derivative(const JetEvaluation& jet, double psi, Vec2 grad_psi, int c) {
    const Mat2 a = inv2(jet.jacobian);
    return a(0, c) * grad_psi.x + a(1, c) * grad_psi.y - psi * log_det_gradient_term(a, jet.hessian, c);
}

// ---------------------------------------------------------------------------
// Right-hand side

struct RightHandSide::Data {
    int level = 0;
    int n = 0;       // spline cells per dimension
    int n_img = 0;   // image cells per dimension
    EnergyParams p;
    double det_guard = 0.1;

    struct SplinePoint {
        Vec2 y;          // Phi_1(x)
        double w;
        Mat2 jac1;       // D Phi_1(x)
        Mat2 grad_lap1;  // D Lap Phi_1(x)
        Vec2 lap1;       // Lap Phi_1(x)
    };
    struct ImagePoint {
        Vec2 y;
        double coeff;    // -w (U_1 o Phi_1 - U_0)^2 / (delta det D Phi_1)
    };
    std::vector<SplinePoint> spline;  // cell-row major, 9 per cell
    std::vector<ImagePoint> image;

    void spline_rows(const Deformation& phi, int r0, int r1, std::vector<double>& rhs) const;
    void image_rows(const Deformation& phi, int r0, int r1, std::vector<double>& rhs) const;
};

void RightHandSide::Data::spline_rows(const Deformation& phi, int r0, int r1, std::vector<double>& rhs) const {
    const std::size_t per = static_cast<std::size_t>(n + 1) * (n + 1);
    const double gamma = p.gamma;
    for (std::size_t idx = static_cast<std::size_t>(r0) * n * 9; idx < static_cast<std::size_t>(r1) * n * 9; ++idx) {
        const SplinePoint& sp = spline[idx];
        const JetEvaluation jet = phi.jet_unchecked(sp.y, 2);
        guard(det2(jet.jacobian), det_guard, sp.y, "right-hand side");
        const Mat2 a = inv2(jet.jacobian);
        const Mat2 pm = transpose(a) * sp.grad_lap1;  // (D Phi)^-T D Lap Phi_1
        // d_l A = -A (d_l D Phi) A, with (d_l D Phi)_{mn} = d_n d_l Phi^m.
        Mat2 da[2];
        for (int l = 0; l < 2; ++l) {
            Mat2 e;
            for (int m = 0; m < 2; ++m)
                for (int q = 0; q < 2; ++q) e(m, q) = jet.hessian[m](q, l);
            da[l] = -1.0 * (a * e * a);
        }
        double coef_b[2] = {0.0, 0.0};
        double coef_c[2] = {0.0, 0.0};
        for (int c = 0; c < 2; ++c) {
            for (int i = 0; i < 2; ++i) {
                for (int k = 0; k < 2; ++k) {
                    // d_k (A_ic o Phi_1)
                    const double d = da[0](i, c) * sp.jac1(0, k) + da[1](i, c) * sp.jac1(1, k);
                    coef_b[c] += sp.grad_lap1(i, k) * d;
                }
                coef_c[c] += sp.lap1[i] * a(i, c);
            }
        }
        const FreeBasis1d bx = free_basis_1d(sp.y.x, n, 1);
        const FreeBasis1d by = free_basis_1d(sp.y.y, n, 1);
        for (int b = 0; b < by.count; ++b) {
            for (int a_ = 0; a_ < bx.count; ++a_) {
                const double psi = bx.w[0][a_] * by.w[0][b];
                const Vec2 dpsi{bx.w[1][a_] * by.w[0][b], bx.w[0][a_] * by.w[1][b]};
                // D(psi o Phi_1) = grad psi(y)^T D Phi_1(x)
                const double g0 = dpsi.x * sp.jac1(0, 0) + dpsi.y * sp.jac1(1, 0);
                const double g1 = dpsi.x * sp.jac1(0, 1) + dpsi.y * sp.jac1(1, 1);
                const std::size_t s = free_index(bx.index[a_], by.index[b], n);
                for (int c = 0; c < 2; ++c) {
                    const double v = -2.0 * gamma * (pm(c, 0) * g0 + pm(c, 1) * g1) - 2.0 * gamma * psi * coef_b[c] -
                                     2.0 * psi * coef_c[c];
                    rhs[c * per + s] += sp.w * v;
                }
            }
        }
    }
}

void RightHandSide::Data::image_rows(const Deformation& phi, int r0, int r1, std::vector<double>& rhs) const {
    const std::size_t per = static_cast<std::size_t>(n + 1) * (n + 1);
    for (std::size_t idx = static_cast<std::size_t>(r0) * n_img * 9; idx < static_cast<std::size_t>(r1) * n_img * 9;
         ++idx) {
        const ImagePoint& ip = image[idx];
        if (ip.coeff == 0.0) continue;
        const JetEvaluation jet = phi.jet_unchecked(ip.y, 2);
        guard(det2(jet.jacobian), det_guard, ip.y, "right-hand side");
        const Mat2 a = inv2(jet.jacobian);
        const double h[2] = {log_det_gradient_term(a, jet.hessian, 0), log_det_gradient_term(a, jet.hessian, 1)};
        const FreeBasis1d bx = free_basis_1d(ip.y.x, n, 1);
        const FreeBasis1d by = free_basis_1d(ip.y.y, n, 1);
        for (int b = 0; b < by.count; ++b) {
            for (int a_ = 0; a_ < bx.count; ++a_) {
                const double psi = bx.w[0][a_] * by.w[0][b];
                const Vec2 dpsi{bx.w[1][a_] * by.w[0][b], bx.w[0][a_] * by.w[1][b]};
                const std::size_t s = free_index(bx.index[a_], by.index[b], n);
                for (int c = 0; c < 2; ++c) {
                    const double div = a(0, c) * dpsi.x + a(1, c) * dpsi.y;  // (D Phi)^-T : D Psi
                    rhs[c * per + s] += ip.coeff * (psi * h[c] - div);
                }
            }
        }
    }
}

RightHandSide::RightHandSide(const Deformation& phi1, const Image& u0, const Image& u1, const EnergyParams& p,
                             double det_guard)
    : d_(std::make_unique<Data>()) {
    p.validate();
    if (u0.level() != u1.level()) throw DimensionError("images must share a level");
    if (phi1.level() >= u0.level()) throw DimensionError("spline level must be below the image level");
    Data& d = *d_;
    d.level = phi1.level();
    d.n = phi1.cells();
    d.n_img = u0.cells();
    d.p = p;
    d.det_guard = det_guard;

    const QuadratureRule qs = build_quadrature(d.level);
    d.spline.resize(static_cast<std::size_t>(d.n) * d.n * 9);
    parallel_rows_rethrow(d.n, [&](int cy) {
        for (int cx = 0; cx < d.n; ++cx)
            for (int k = 0; k < 9; ++k) {
                const Vec2 x = qs.point(cx, cy, k);
                const JetEvaluation j = phi1.jet_unchecked(x, 3);
                guard(det2(j.jacobian), det_guard, x, "first deformation");
                Vec2 y = j.value;
                clamp_to_domain(y);
                d.spline[(static_cast<std::size_t>(cy) * d.n + cx) * 9 + k] = {y, qs.weight(k), j.jacobian,
                                                                               j.grad_laplacian, j.laplacian};
            }
    });

    const QuadratureRule qi = build_quadrature(u0.level());
    d.image.resize(static_cast<std::size_t>(d.n_img) * d.n_img * 9);
    const double inv_delta = 1.0 / p.delta;
    parallel_rows_rethrow(d.n_img, [&](int cy) {
        for (int cx = 0; cx < d.n_img; ++cx)
            for (int k = 0; k < 9; ++k) {
                const Vec2 x = qi.point(cx, cy, k);
                const JetEvaluation j = phi1.jet_unchecked(x, 1);
                const double det = det2(j.jacobian);
                guard(det, det_guard, x, "first deformation");
                Vec2 y = j.value;
                clamp_to_domain(y);
                const double r = u1.eval_unchecked(y) - u0.eval_unchecked(x);
                d.image[(static_cast<std::size_t>(cy) * d.n_img + cx) * 9 + k] = {y,
                                                                                  -qi.weight(k) * inv_delta * r * r / det};
            }
    });
}

RightHandSide::~RightHandSide() = default;
RightHandSide::RightHandSide(RightHandSide&&) noexcept = default;
RightHandSide& RightHandSide::operator=(RightHandSide&&) noexcept = default;

int RightHandSide::level() const { return d_->level; }

std::vector<double> RightHandSide::apply(const Deformation& phi, Execution ex) const {
    const Data& d = *d_;
    if (phi.level() != d.level) throw DimensionError("deformation level does not match the right-hand side");
    const std::size_t dofs = phi.dof_count();
    if (ex == Execution::Serial) {
        std::vector<double> rhs(dofs, 0.0);
        d.spline_rows(phi, 0, d.n, rhs);
        d.image_rows(phi, 0, d.n_img, rhs);
        return rhs;
    }
    std::vector<std::vector<double>> s(kReductionBlocks, std::vector<double>(dofs, 0.0));
    std::vector<std::vector<double>> m(kReductionBlocks, std::vector<double>(dofs, 0.0));
    parallel_blocks_rethrow(d.n, [&](int b, int r0, int r1) { d.spline_rows(phi, r0, r1, s[b]); });
    parallel_blocks_rethrow(d.n_img, [&](int b, int r0, int r1) { d.image_rows(phi, r0, r1, m[b]); });
    std::vector<double> rhs(dofs, 0.0);
    for (const auto& part : s)
        for (std::size_t i = 0; i < dofs; ++i) rhs[i] += part[i];
    for (const auto& part : m)
        for (std::size_t i = 0; i < dofs; ++i) rhs[i] += part[i];
    return rhs;
}

std::vector<double> apply_T_tilde(const Deformation& phi, const Deformation& phi1, const Image& u0, const Image& u1,
                                  const EnergyParams& p, Execution ex) {
    return RightHandSide(phi1, u0, u1, p).apply(phi, ex);
}

// ---------------------------------------------------------------------------
// Fixed point

FixedPointSolver::FixedPointSolver(int level, const EnergyParams& p, Execution ex)
    : level_(level), params_(p), block_(assemble_R_block(level, p, ex)), factor_(block_) {}

std::vector<double> FixedPointSolver::solve_dofs(std::span<const double> rhs) const {
    const std::size_t per = block_.size();
    std::vector<double> x(2 * per);
    for (int c = 0; c < 2; ++c) {
        const auto b = rhs.subspan(c * per, per);
        const auto xc = factor_.solve(b);
        const double rel = relative_residual(block_, xc, b);
        if (!(rel < 1e-10)) throw SolverError("residual contract violated: " + std::to_string(rel), 0);
        std::copy(xc.begin(), xc.end(), x.begin() + static_cast<std::ptrdiff_t>(c * per));
    }
    return x;
}

std::vector<double> FixedPointSolver::apply_R(const Deformation& phi) const {
    const std::size_t per = block_.size();
    const auto dofs = phi.dofs();
    std::vector<double> out(2 * per);
    for (int c = 0; c < 2; ++c) {
        const auto y = block_.multiply(std::span<const double>(dofs).subspan(c * per, per));
        std::copy(y.begin(), y.end(), out.begin() + static_cast<std::ptrdiff_t>(c * per));
    }
    return out;
}

Deformation FixedPointSolver::solve(const Deformation& phi1, const Image& u0, const Image& u1,
                                    const ShootingConfig& cfg, FixedPointReport* report) const {
    cfg.validate();
    if (phi1.level() != level_) throw DimensionError("first deformation has the wrong level");
    const RightHandSide rhs(phi1, u0, u1, params_, cfg.det_guard);
    FixedPointReport rep;
    Deformation phi(level_);
    bool converged = false;
    for (int j = 1; j <= cfg.max_iterations; ++j) {
        const Deformation next = Deformation::from_dofs(level_, solve_dofs(rhs.apply(phi, cfg.execution)));
        const double diff = max_control_difference(next, phi);
        phi = next;
        rep.iterations = j;
        rep.final_difference = diff;
        rep.differences.push_back(diff);
        if (diff < cfg.threshold) {
            converged = true;
            break;
        }
    }
    if (!converged) {
        if (report) *report = rep;
        throw NonConvergenceError("fixed-point iteration did not converge in " + std::to_string(rep.iterations) +
                                      " iterations (last difference " + std::to_string(rep.final_difference) + ")",
                                  rep.final_difference, rep.iterations);
    }
    const auto t = rhs.apply(phi, cfg.execution);
    const auto r = apply_R(phi);
    for (std::size_t i = 0; i < t.size(); ++i) rep.residual = std::max(rep.residual, std::abs(r[i] - t[i]));
    rep.min_det = min_jacobian_determinant(phi);
    if (report) *report = rep;
    guard(rep.min_det, cfg.det_guard, Vec2{-1.0, -1.0}, "second deformation");
    return phi;
}

Deformation fixed_point_solve(const Deformation& phi1, const Image& u0, const Image& u1, const EnergyParams& p,
                              const ShootingConfig& cfg, FixedPointReport* report) {
    return FixedPointSolver(phi1.level(), p, cfg.execution).solve(phi1, u0, u1, cfg, report);
}

// ---------------------------------------------------------------------------
// Inversion

namespace {

// Solves P(s, t) = z for the bilinear map of a quadrilateral with corners
// p00, p10, p01, p11. Returns false if Newton does not converge.
bool invert_quad(const Vec2 (&p)[4], Vec2 z, double& s, double& t) {
    const Vec2 e1 = p[1] - p[0], e2 = p[2] - p[0], e3 = p[3] - p[1] - p[2] + p[0];
    s = 0.5;
    t = 0.5;
    for (int it = 0; it < 50; ++it) {
        const Vec2 r = p[0] + s * e1 + t * e2 + (s * t) * e3 - z;
        Mat2 j;
        j(0, 0) = e1.x + t * e3.x;
        j(1, 0) = e1.y + t * e3.y;
        j(0, 1) = e2.x + s * e3.x;
        j(1, 1) = e2.y + s * e3.y;
        const double det = det2(j);
        if (std::abs(det) < 1e-300) return false;
        const double ds = (j(1, 1) * r.x - j(0, 1) * r.y) / det;
        const double dt = (-j(1, 0) * r.x + j(0, 0) * r.y) / det;
        s -= ds;
        t -= dt;
        if (std::abs(ds) < 1e-15 && std::abs(dt) < 1e-15) return true;
    }
    return std::isfinite(s) && std::isfinite(t);
}

// Dense LU with partial pivoting for the small collocation systems.
class DenseLu {
public:
    explicit DenseLu(std::vector<double> a, int n) : n_(n), a_(std::move(a)), perm_(n) {
        for (int i = 0; i < n; ++i) perm_[i] = i;
        for (int k = 0; k < n; ++k) {
            int piv = k;
            for (int i = k + 1; i < n; ++i)
                if (std::abs(at(i, k)) > std::abs(at(piv, k))) piv = i;
            if (std::abs(at(piv, k)) < 1e-14) throw SingularMatrixError("collocation matrix is singular");
            if (piv != k) {
                for (int j = 0; j < n; ++j) std::swap(at(k, j), at(piv, j));
                std::swap(perm_[k], perm_[piv]);
            }
            for (int i = k + 1; i < n; ++i) {
                at(i, k) /= at(k, k);
                for (int j = k + 1; j < n; ++j) at(i, j) -= at(i, k) * at(k, j);
            }
        }
    }

    void solve(std::vector<double>& b) const {
        std::vector<double> x(n_);
        for (int i = 0; i < n_; ++i) x[i] = b[perm_[i]];
        for (int i = 0; i < n_; ++i)
            for (int j = 0; j < i; ++j) x[i] -= at(i, j) * x[j];
        for (int i = n_ - 1; i >= 0; --i) {
            for (int j = i + 1; j < n_; ++j) x[i] -= at(i, j) * x[j];
            x[i] /= at(i, i);
        }
        b = std::move(x);
    }

private:
    double& at(int i, int j) { return a_[static_cast<std::size_t>(i) * n_ + j]; }
    double at(int i, int j) const { return a_[static_cast<std::size_t>(i) * n_ + j]; }
    int n_;
    std::vector<double> a_;
    std::vector<int> perm_;
};

std::vector<double> collocation_abscissae(int n) {
    std::vector<double> s(n + 1);
    const double h = 1.0 / n;
    s[0] = 0.5 * h;
    for (int i = 1; i < n; ++i) s[i] = i * h;
    s[n] = 1.0 - 0.5 * h;
    return s;
}

}  // namespace

Deformation invert_deformation(const Deformation& phi) {
    if (phi.is_identity()) return phi;
    const int n = phi.cells();
    const double h = phi.spacing();
    const int nv = n + 1;
    std::vector<Vec2> vertex(static_cast<std::size_t>(nv) * nv);
    for (int j = 0; j < nv; ++j)
        for (int i = 0; i < nv; ++i) vertex[static_cast<std::size_t>(j) * nv + i] = phi.eval_unchecked({i * h, j * h});
    auto quad = [&](int cx, int cy, Vec2 (&p)[4]) {
        p[0] = vertex[static_cast<std::size_t>(cy) * nv + cx];
        p[1] = vertex[static_cast<std::size_t>(cy) * nv + cx + 1];
        p[2] = vertex[static_cast<std::size_t>(cy + 1) * nv + cx];
        p[3] = vertex[static_cast<std::size_t>(cy + 1) * nv + cx + 1];
    };
    constexpr double kInside = 1e-10;
    auto try_cell = [&](int cx, int cy, Vec2 z, double& s, double& t) {
        Vec2 p[4];
        quad(cx, cy, p);
        return invert_quad(p, z, s, t) && s >= -kInside && s <= 1 + kInside && t >= -kInside && t <= 1 + kInside;
    };

    const auto abscissae = collocation_abscissae(n);
    std::vector<Vec2> samples(static_cast<std::size_t>(nv) * nv);
    std::vector<int> failed(nv, 0);
    parallel_rows(nv, [&](int j) {
        for (int i = 0; i < nv; ++i) {
            const Vec2 z{abscissae[i], abscissae[j]};
            double ls, lt;
            int cx = cell_of(z.x, n, ls), cy = cell_of(z.y, n, lt);
            double s = 0.5, t = 0.5;
            bool found = false;
            // Walk towards the containing cell, then fall back to a full scan.
            for (int step = 0; step < 2 * n + 4 && !found; ++step) {
                if (try_cell(cx, cy, z, s, t)) {
                    found = true;
                    break;
                }
                const int nx = std::clamp(cx + (s < 0 ? -1 : s > 1 ? 1 : 0), 0, n - 1);
                const int ny = std::clamp(cy + (t < 0 ? -1 : t > 1 ? 1 : 0), 0, n - 1);
                if (nx == cx && ny == cy) break;
                cx = nx;
                cy = ny;
            }
            for (int c = 0; c < n * n && !found; ++c) {
                cx = c % n;
                cy = c / n;
                found = try_cell(cx, cy, z, s, t);
            }
            if (!found) {
                failed[j] = 1;
                continue;
            }
            s = std::clamp(s, 0.0, 1.0);
            t = std::clamp(t, 0.0, 1.0);
            samples[static_cast<std::size_t>(j) * nv + i] = Vec2{(cx + s) * h, (cy + t) * h} - z;
        }
    });
    for (int j = 0; j < nv; ++j)
        if (failed[j]) throw InversionError("point covered by no deformed cell in sample row " + std::to_string(j));

    // Collocation: samples = B F B^T per component.
    std::vector<double> b(static_cast<std::size_t>(nv) * nv);
    for (int i = 0; i < nv; ++i) {
        const FreeBasis1d fb = free_basis_1d(abscissae[i], n, 0);
        for (int k = 0; k < fb.count; ++k) b[static_cast<std::size_t>(i) * nv + fb.index[k]] += fb.w[0][k];
    }
    const DenseLu lu(std::move(b), nv);
    const std::size_t per = static_cast<std::size_t>(nv) * nv;
    std::vector<double> dofs(2 * per);
    for (int c = 0; c < 2; ++c) {
        std::vector<double> g(per);  // g[j][i]
        for (std::size_t k = 0; k < per; ++k) g[k] = c == 0 ? samples[k].x : samples[k].y;
        // Along x for every sample row j.
        for (int j = 0; j < nv; ++j) {
            std::vector<double> row(g.begin() + static_cast<std::ptrdiff_t>(j) * nv,
                                    g.begin() + static_cast<std::ptrdiff_t>(j + 1) * nv);
            lu.solve(row);
            std::copy(row.begin(), row.end(), g.begin() + static_cast<std::ptrdiff_t>(j) * nv);
        }
        // Along y for every coefficient column a.
        for (int a = 0; a < nv; ++a) {
            std::vector<double> col(nv);
            for (int j = 0; j < nv; ++j) col[j] = g[static_cast<std::size_t>(j) * nv + a];
            lu.solve(col);
            for (int bb = 0; bb < nv; ++bb) dofs[c * per + static_cast<std::size_t>(bb) * nv + a] = col[bb];
        }
    }
    return Deformation::from_dofs(phi.level(), dofs);
}

// ---------------------------------------------------------------------------
// Image update

Image compose(const Image& u, const Deformation& phi) {
    Image out(u.level());
    const int nv = u.nodes_per_dim();
    parallel_rows(nv, [&](int j) {
        for (int i = 0; i < nv; ++i) {
            Vec2 y = phi.eval_unchecked(u.node(i, j));
            clamp_to_domain(y);
            out.at(i, j) = u.eval_unchecked(y);
        }
    });
    return out;
}

Image modulation_quotient(const Image& u0, const Image& u1, const Deformation& phi1_inverse,
                          const Deformation& phi1) {
    Image q(u1.level());
    const int nv = u1.nodes_per_dim();
    parallel_rows(nv, [&](int j) {
        for (int i = 0; i < nv; ++i) {
            Vec2 z = phi1_inverse.eval_unchecked(u1.node(i, j));
            clamp_to_domain(z);
            const double det = det2(phi1.jet_unchecked(z, 1).jacobian);
            q.at(i, j) = (u1.at(i, j) - u0.eval_unchecked(z)) / det;
        }
    });
    return q;
}

Image image_update(const Image& u0, const Image& u1, const Deformation& phi1, const Deformation& phi2,
                   const ShootingConfig& cfg, int image_index) {
    const Deformation inv1 = invert_deformation(phi1);
    const Deformation inv2 = invert_deformation(phi2);
    Image q = modulation_quotient(u0, u1, inv1, phi1);
    const FilterParams fp{filter_time_step(image_index, cfg.tau0, cfg.beta), cfg.lambda};
    if (cfg.smoothing && cfg.placement == FilterPlacement::BeforeComposition) q = anisotropic_smooth(q, fp, cfg.execution);
    Image j = compose(q, inv2);
    if (cfg.smoothing && cfg.placement == FilterPlacement::AfterComposition) j = anisotropic_smooth(j, fp, cfg.execution);
    return j + compose(u1, inv2);
}

Exp2Result exp2(const Image& u0, const Image& u1, const Deformation& phi1, const EnergyParams& p,
                const ShootingConfig& cfg, int image_index) {
    Exp2Result r;
    r.phi2 = fixed_point_solve(phi1, u0, u1, p, cfg, &r.report);
    r.u2 = image_update(u0, u1, phi1, r.phi2, cfg, image_index);
    return r;
}

// ---------------------------------------------------------------------------
// Iterated map

VectorField velocity_field(const Deformation& phi, int image_level, int steps) {
    VectorField v;
    v.level = image_level;
    const int nv = cells_per_dim(image_level) + 1;
    const double h = mesh_size(image_level);
    v.values.resize(static_cast<std::size_t>(nv) * nv);
    for (int j = 0; j < nv; ++j)
        for (int i = 0; i < nv; ++i) {
            const Vec2 x{i * h, j * h};
            v.values[static_cast<std::size_t>(j) * nv + i] = static_cast<double>(steps) * (phi.eval_unchecked(x) - x);
        }
    return v;
}

Image intensity_modulation(const Image& previous, const Image& current, const Deformation& phi) {
    return compose(current, phi) - previous;
}

ShootingResult exp_k(const Image& u0, const Image& u1, int steps, const EnergyParams& p, const ShootingConfig& cfg,
                     const RegistrationConfig& reg) {
    if (steps < 1) throw ConfigError("number of steps must be at least 1");
    cfg.validate();
    p.validate();
    ShootingResult res;
    res.images = {u0, u1};
    res.deformations.push_back(register_images(u0, u1, p, reg, &res.registration));
    const FixedPointSolver solver(res.deformations.front().level(), p, cfg.execution);
    for (int k = 2; k <= steps; ++k) {
        const Image& a = res.images[k - 2];
        const Image& b = res.images[k - 1];
        try {
            const Deformation phi1 = cfg.reregister && k > 2 ? register_images(a, b, p, reg) : res.deformations.back();
            StepDiagnostics diag;
            diag.index = k;
            FixedPointReport fp;
            try {
                const Deformation phi2 = solver.solve(phi1, a, b, cfg, &fp);
                Image next = image_update(a, b, phi1, phi2, cfg, k);
                diag.energy = matching_energy(b, next, phi2, p, cfg.execution).total;
                res.images.push_back(std::move(next));
                res.deformations.push_back(phi2);
            } catch (...) {
                diag.iterations = fp.iterations;
                diag.final_difference = fp.final_difference;
                res.steps.push_back(diag);
                throw;
            }
            diag.iterations = fp.iterations;
            diag.final_difference = fp.final_difference;
            diag.residual = fp.residual;
            diag.min_det = fp.min_det;
            res.steps.push_back(diag);
        } catch (const Error& e) {
            res.failed_step = k;
            res.failure = e.what();
            break;
        }
    }
    const int level = u0.level();
    for (std::size_t k = 0; k < res.deformations.size(); ++k) {
        res.velocities.push_back(velocity_field(res.deformations[k], level, steps));
        res.modulations.push_back(intensity_modulation(res.images[k], res.images[k + 1], res.deformations[k]));
    }
    return res;
}

}  // namespace metamorph
