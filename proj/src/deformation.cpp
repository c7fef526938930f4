#include "metamorph/deformation.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "metamorph/errors.hpp"
#include "metamorph/grid.hpp"
#include "metamorph/image.hpp"

namespace metamorph {

FreeBasis1d free_basis_1d(double x, int n, int max_order) {
    double t;
    const int c = cell_of(x, n, t);
    const CubicWeights cw = cubic_weights(t, 1.0 / n, max_order);
    FreeBasis1d fb;
    auto add = [&](int free, int local, double coef) {
        int k = 0;
        while (k < fb.count && fb.index[k] != free) ++k;
        if (k == fb.count) {
            fb.index[k] = free;
            for (int o = 0; o < 4; ++o) fb.w[o][k] = 0.0;
            ++fb.count;
        }
        for (int o = 0; o <= max_order; ++o) fb.w[o][k] += coef * cw.w[o][local];
    };
    for (int local = 0; local < 4; ++local) {
        const int full = c + local;
        if (full == 0) {
            add(0, local, -4.0);
            add(1, local, -1.0);
        } else if (full == n + 2) {
            add(n - 1, local, -1.0);
            add(n, local, -4.0);
        } else {
            add(full - 1, local, 1.0);
        }
    }
    return fb;
}

Deformation::Deformation(int level) : level_(level), n_(1 << level) {
    if (level < 1 || level > 12) throw DomainError("invalid spline level " + std::to_string(level));
    control_.assign(static_cast<std::size_t>(n_ + 3) * (n_ + 3), Vec2{});
}

void complete_ghosts(int n, std::vector<Vec2>& c) {
    const int m = n + 3;
    auto at = [&](int i, int j) -> Vec2& { return c[static_cast<std::size_t>(j) * m + i]; };
    for (int j = 1; j <= n + 1; ++j) {
        at(0, j) = -4.0 * at(1, j) - at(2, j);
        at(n + 2, j) = -4.0 * at(n + 1, j) - at(n, j);
    }
    for (int i = 0; i < m; ++i) {
        at(i, 0) = -4.0 * at(i, 1) - at(i, 2);
        at(i, n + 2) = -4.0 * at(i, n + 1) - at(i, n);
    }
}

Deformation Deformation::from_dofs(int level, std::span<const double> dofs) {
    Deformation d(level);
    const int n = d.n_;
    const std::size_t per = d.dofs_per_component();
    if (dofs.size() != 2 * per) throw DimensionError("deformation dof vector has wrong length");
    for (int b = 0; b <= n; ++b) {
        for (int a = 0; a <= n; ++a) {
            const std::size_t s = static_cast<std::size_t>(b) * (n + 1) + a;
            d.control_[static_cast<std::size_t>(b + 1) * (n + 3) + (a + 1)] = {dofs[s], dofs[per + s]};
        }
    }
    complete_ghosts(n, d.control_);
    return d;
}

Deformation Deformation::from_control_grid(int level, std::vector<Vec2> control, double tolerance) {
    Deformation d(level);
    if (control.size() != d.control_.size()) throw FormatError("control grid has wrong size");
    d.control_ = control;
    complete_ghosts(d.n_, d.control_);
    double worst = 0.0;
    for (std::size_t k = 0; k < control.size(); ++k) {
        const Vec2 diff = control[k] - d.control_[k];
        worst = std::max({worst, std::abs(diff.x), std::abs(diff.y)});
    }
    if (!(worst <= tolerance)) {
        throw FormatError("ghost control points violate the boundary construction (mismatch " +
                          std::to_string(worst) + ")");
    }
    return d;
}

Deformation Deformation::unconstrained(int level, std::vector<Vec2> control) {
    Deformation d(level);
    if (control.size() != d.control_.size()) throw DimensionError("control grid has wrong size");
    d.control_ = std::move(control);
    return d;
}

std::vector<double> Deformation::dofs() const {
    const std::size_t per = dofs_per_component();
    std::vector<double> out(2 * per);
    for (int b = 0; b <= n_; ++b) {
        for (int a = 0; a <= n_; ++a) {
            const std::size_t s = static_cast<std::size_t>(b) * (n_ + 1) + a;
            const Vec2 v = control(a + 1, b + 1);
            out[s] = v.x;
            out[per + s] = v.y;
        }
    }
    return out;
}

Vec2 Deformation::eval(Vec2 x) const {
    check_in_domain(x);
    return eval_unchecked(x);
}

Vec2 Deformation::eval_unchecked(Vec2 x) const {
    double tx, ty;
    const int cx = cell_of(x.x, n_, tx);
    const int cy = cell_of(x.y, n_, ty);
    const double h = 1.0 / n_;
    const CubicWeights wx = cubic_weights(tx, h, 0);
    const CubicWeights wy = cubic_weights(ty, h, 0);
    Vec2 d;
    for (int b = 0; b < 4; ++b) {
        Vec2 row;
        const Vec2* c = &control_[static_cast<std::size_t>(cy + b) * (n_ + 3) + cx];
        for (int a = 0; a < 4; ++a) row += wx.w[0][a] * c[a];
        d += wy.w[0][b] * row;
    }
    return x + d;
}

Mat2 Deformation::jacobian(Vec2 x) const { return jet(x, 1).jacobian; }

JetEvaluation Deformation::jet(Vec2 x, int max_order) const {
    check_in_domain(x);
    return jet_unchecked(x, max_order);
}

JetEvaluation Deformation::jet_unchecked(Vec2 x, int max_order) const {
    double tx, ty;
    const int cx = cell_of(x.x, n_, tx);
    const int cy = cell_of(x.y, n_, ty);
    const double h = 1.0 / n_;
    const CubicWeights wx = cubic_weights(tx, h, max_order);
    const CubicWeights wy = cubic_weights(ty, h, max_order);

    // rows[p][b] = sum_a wx^(p)_a c_{cx+a, cy+b}
    Vec2 rows[4][4];
    for (int b = 0; b < 4; ++b) {
        const Vec2* c = &control_[static_cast<std::size_t>(cy + b) * (n_ + 3) + cx];
        for (int p = 0; p <= max_order; ++p) {
            Vec2 s;
            for (int a = 0; a < 4; ++a) s += wx.w[p][a] * c[a];
            rows[p][b] = s;
        }
    }
    auto deriv = [&](int p, int q) {
        Vec2 s;
        for (int b = 0; b < 4; ++b) s += wy.w[q][b] * rows[p][b];
        return s;
    };

    JetEvaluation j;
    j.value = x + deriv(0, 0);
    j.jacobian = Mat2::identity();
    if (max_order >= 1) {
        const Vec2 dx = deriv(1, 0), dy = deriv(0, 1);
        for (int i = 0; i < 2; ++i) {
            j.jacobian(i, 0) += dx[i];
            j.jacobian(i, 1) += dy[i];
        }
    }
    if (max_order >= 2) {
        const Vec2 dxx = deriv(2, 0), dxy = deriv(1, 1), dyy = deriv(0, 2);
        for (int i = 0; i < 2; ++i) {
            j.hessian[i](0, 0) = dxx[i];
            j.hessian[i](0, 1) = dxy[i];
            j.hessian[i](1, 0) = dxy[i];
            j.hessian[i](1, 1) = dyy[i];
            j.laplacian[i] = dxx[i] + dyy[i];
        }
    }
    if (max_order >= 3) {
        const Vec2 dxxx = deriv(3, 0), dxxy = deriv(2, 1), dxyy = deriv(1, 2), dyyy = deriv(0, 3);
        for (int i = 0; i < 2; ++i) {
            j.grad_laplacian(i, 0) = dxxx[i] + dxyy[i];
            j.grad_laplacian(i, 1) = dxxy[i] + dyyy[i];
        }
    }
    return j;
}

bool Deformation::is_identity() const {
    return std::all_of(control_.begin(), control_.end(), [](const Vec2& v) { return v.x == 0.0 && v.y == 0.0; });
}

double max_control_difference(const Deformation& a, const Deformation& b) {
    if (a.level() != b.level()) throw DimensionError("deformation levels differ");
    double m = 0.0;
    for (std::size_t k = 0; k < a.control().size(); ++k) {
        const Vec2 d = a.control()[k] - b.control()[k];
        m = std::max({m, std::abs(d.x), std::abs(d.y)});
    }
    return m;
}

Deformation prolong_deformation(const Deformation& d) {
    const int n = d.cells();
    const int nf = 2 * n;
    // Coarse full index k maps to fine full index 2k - 1 with mask (1 4 6 4 1) / 8.
    auto refine_1d = [](const std::vector<Vec2>& c) {
        const int m = static_cast<int>(c.size());  // n + 3
        std::vector<Vec2> f(2 * m - 3);
        for (int fi = 0; fi < static_cast<int>(f.size()); ++fi) {
            if (fi % 2 == 1) {
                const int k = (fi + 1) / 2;
                f[fi] = 0.125 * (c[k - 1] + 6.0 * c[k] + c[k + 1]);
            } else {
                const int k = fi / 2;
                f[fi] = 0.5 * (c[k] + c[k + 1]);
            }
        }
        return f;
    };
    const int mc = n + 3, mf = nf + 3;
    std::vector<Vec2> tmp(static_cast<std::size_t>(mc) * mf);  // refined in x, coarse in y
    for (int j = 0; j < mc; ++j) {
        std::vector<Vec2> row(d.control().begin() + j * mc, d.control().begin() + (j + 1) * mc);
        const auto fr = refine_1d(row);
        std::copy(fr.begin(), fr.end(), tmp.begin() + static_cast<std::ptrdiff_t>(j) * mf);
    }
    std::vector<Vec2> fine(static_cast<std::size_t>(mf) * mf);
    for (int i = 0; i < mf; ++i) {
        std::vector<Vec2> col(mc);
        for (int j = 0; j < mc; ++j) col[j] = tmp[static_cast<std::size_t>(j) * mf + i];
        const auto fc = refine_1d(col);
        for (int j = 0; j < mf; ++j) fine[static_cast<std::size_t>(j) * mf + i] = fc[j];
    }
    const std::size_t per = static_cast<std::size_t>(nf + 1) * (nf + 1);
    std::vector<double> dofs(2 * per);
    for (int b = 0; b <= nf; ++b) {
        for (int a = 0; a <= nf; ++a) {
            const Vec2 v = fine[static_cast<std::size_t>(b + 1) * mf + (a + 1)];
            dofs[static_cast<std::size_t>(b) * (nf + 1) + a] = v.x;
            dofs[per + static_cast<std::size_t>(b) * (nf + 1) + a] = v.y;
        }
    }
    return Deformation::from_dofs(d.level() + 1, dofs);
}

double min_jacobian_determinant(const Deformation& d, int points_per_dim) {
    const QuadratureRule q(d.level(), points_per_dim);
    double m = 1e300;
    for (int cy = 0; cy < q.cells_per_dim(); ++cy)
        for (int cx = 0; cx < q.cells_per_dim(); ++cx)
            for (int k = 0; k < q.points_per_cell(); ++k)
                m = std::min(m, det2(d.jet_unchecked(q.point(cx, cy, k), 1).jacobian));
    return m;
}

}  // namespace metamorph
