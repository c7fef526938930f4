#include "metamorph/filtering.hpp"

#include <cmath>

#include "metamorph/errors.hpp"
#include "metamorph/grid.hpp"

namespace metamorph {

void FilterParams::validate() const {
    if (!(tau >= 0.0)) throw ConfigError("filter time step must be nonnegative");
    if (!(lambda > 0.0)) throw ConfigError("filter lambda must be positive");
}

double filter_time_step(int image_index, double tau0, double beta) {
    return std::pow(beta, image_index - 2) * tau0;
}

namespace {

// Local bilinear basis on a cell, corners ordered (0,0), (1,0), (0,1), (1,1).
struct LocalBasis {
    double v[4];
    Vec2 g[4];
};

LocalBasis local_basis(double s, double t, double h) {
    LocalBasis b;
    b.v[0] = (1 - s) * (1 - t);
    b.v[1] = s * (1 - t);
    b.v[2] = (1 - s) * t;
    b.v[3] = s * t;
    b.g[0] = Vec2{-(1 - t), -(1 - s)} * (1.0 / h);
    b.g[1] = Vec2{1 - t, -s} * (1.0 / h);
    b.g[2] = Vec2{-t, 1 - s} * (1.0 / h);
    b.g[3] = Vec2{t, s} * (1.0 / h);
    return b;
}

std::size_t corner_index(int cx, int cy, int corner, int n) {
    return static_cast<std::size_t>(cy + corner / 2) * (n + 1) + cx + corner % 2;
}

// weight(cx, cy, basis) multiplies grad.grad when stiffness is true; the
// mass matrix uses value.value.
template <class Weight>
void assemble_rows(const QuadratureRule& q, int r0, int r1, bool stiffness, Weight&& weight,
                   std::vector<Triplet>& out) {
    const int n = q.cells_per_dim();
    const double h = q.cell_size();
    const auto& rule = q.rule_1d();
    const int p = q.points_per_dim();
    for (int cy = r0; cy < r1; ++cy) {
        for (int cx = 0; cx < n; ++cx) {
            double local[4][4] = {};
            for (int k = 0; k < q.points_per_cell(); ++k) {
                const LocalBasis b = local_basis(rule.nodes[k % p], rule.nodes[k / p], h);
                const double w = q.weight(k) * weight(cx, cy, b);
                for (int a = 0; a < 4; ++a)
                    for (int c = 0; c < 4; ++c) local[a][c] += w * (stiffness ? dot(b.g[a], b.g[c]) : b.v[a] * b.v[c]);
            }
            for (int a = 0; a < 4; ++a)
                for (int c = 0; c < 4; ++c)
                    out.push_back({corner_index(cx, cy, a, n), corner_index(cx, cy, c, n), local[a][c]});
        }
    }
}

template <class Weight>
SparseSymmetricMatrix assemble(int level, bool stiffness, Weight&& weight, Execution ex) {
    const QuadratureRule q = build_quadrature(level);
    const int n = q.cells_per_dim();
    const std::size_t size = static_cast<std::size_t>(n + 1) * (n + 1);
    std::vector<Triplet> all;
    if (ex == Execution::Serial) {
        assemble_rows(q, 0, n, stiffness, weight, all);
    } else {
        std::vector<std::vector<Triplet>> parts(kReductionBlocks);
        parallel_blocks(n, [&](int b, int r0, int r1) { assemble_rows(q, r0, r1, stiffness, weight, parts[b]); });
        for (auto& part : parts) all.insert(all.end(), part.begin(), part.end());
    }
    return SparseSymmetricMatrix::from_triplets(size, std::move(all));
}

Vec2 cell_gradient(const Image& u, int cx, int cy, const LocalBasis& b) {
    Vec2 g{0.0, 0.0};
    const int n = u.cells();
    for (int a = 0; a < 4; ++a) g += u.values()[corner_index(cx, cy, a, n)] * b.g[a];
    return g;
}

}  // namespace

SparseSymmetricMatrix assemble_mass(int level) {
    return assemble(level, false, [](int, int, const LocalBasis&) { return 1.0; }, Execution::Serial);
}

SparseSymmetricMatrix assemble_weighted_stiffness(const Image& j, double lambda, Execution ex) {
    const double inv_l2 = 1.0 / (lambda * lambda);
    return assemble(
        j.level(), true,
        [&](int cx, int cy, const LocalBasis& b) {
            const Vec2 g = cell_gradient(j, cx, cy, b);
            return 1.0 / (1.0 + inv_l2 * dot(g, g));
        },
        ex);
}

Image anisotropic_smooth(const Image& j, const FilterParams& p, Execution ex) {
    p.validate();
    if (p.tau == 0.0) return j;
    const SparseSymmetricMatrix m = assemble_mass(j.level());
    const SparseSymmetricMatrix s = assemble_weighted_stiffness(j, p.lambda, ex);
    // M and S share the Q1 sparsity pattern, so the sum can be formed entrywise.
    std::vector<Triplet> t;
    t.reserve(m.nonzeros());
    const auto rp = m.row_ptr();
    const auto cols = m.cols();
    const auto mv = m.values();
    const auto sv = s.values();
    for (std::size_t r = 0; r + 1 < rp.size(); ++r)
        for (std::size_t k = rp[r]; k < rp[r + 1]; ++k) t.push_back({r, cols[k], mv[k] + p.tau * sv[k]});
    const auto a = SparseSymmetricMatrix::from_triplets(m.size(), std::move(t));
    const auto rhs = m.multiply(j.values());
    return Image(j.level(), solve_spd(a, rhs));
}

double dirichlet_energy(const Image& u) {
    const auto s = assemble(u.level(), true, [](int, int, const LocalBasis&) { return 1.0; }, Execution::Serial);
    return dot(u.values(), s.multiply(u.values()));
}

double total_variation(const Image& u) {
    const QuadratureRule q = build_quadrature(u.level());
    const auto& rule = q.rule_1d();
    const int p = q.points_per_dim();
    double tv = 0.0;
    for (int cy = 0; cy < q.cells_per_dim(); ++cy)
        for (int cx = 0; cx < q.cells_per_dim(); ++cx)
            for (int k = 0; k < q.points_per_cell(); ++k) {
                const LocalBasis b = local_basis(rule.nodes[k % p], rule.nodes[k / p], q.cell_size());
                tv += q.weight(k) * norm(cell_gradient(u, cx, cy, b));
            }
    return tv;
}

double integral(const Image& u) {
    const auto mu = assemble_mass(u.level()).multiply(u.values());
    double s = 0.0;
    for (double v : mu) s += v;
    return s;
}

}  // namespace metamorph
