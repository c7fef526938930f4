#include "metamorph/interpolation.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "metamorph/errors.hpp"
#include "metamorph/grid.hpp"

namespace metamorph {

void InterpolationConfig::validate() const {
    if (segments < 2) throw ConfigError("interpolation needs at least two segments");
    if (max_sweeps < 1) throw ConfigError("interpolation needs at least one sweep");
    if (coarsest_level < 0) throw ConfigError("coarsest interpolation level must be nonnegative");
    if (finest_level < 0) throw ConfigError("finest interpolation level must be nonnegative");
    if (sweep_iterations < 0) throw ConfigError("sweep registration iterations must be nonnegative");
    if (!(tolerance >= 0.0)) throw ConfigError("interpolation tolerance must be nonnegative");
    if (!(image_tolerance > 0.0)) throw ConfigError("image tolerance must be positive");
    if (max_cg_iterations < 1) throw ConfigError("conjugate gradient cap must be positive");
    registration.validate();
}

namespace {

struct Stencil {
    std::array<std::size_t, 4> node;
    std::array<double, 4> weight;

    double apply(const double* u) const {
        return weight[0] * u[node[0]] + weight[1] * u[node[1]] + weight[2] * u[node[2]] + weight[3] * u[node[3]];
    }
    void scatter(double* g, double f) const {
        for (int i = 0; i < 4; ++i) g[node[i]] += f * weight[i];
    }
};

Stencil bilinear_stencil(Vec2 y, int cells) {
    double tx = 0.0, ty = 0.0;
    const int i = cell_of(y.x, cells, tx);
    const int j = cell_of(y.y, cells, ty);
    const std::size_t stride = static_cast<std::size_t>(cells) + 1;
    const std::size_t base = static_cast<std::size_t>(j) * stride + i;
    return {{base, base + 1, base + stride, base + stride + 1},
            {(1 - tx) * (1 - ty), tx * (1 - ty), (1 - tx) * ty, tx * ty}};
}

// The matching terms sum_k (1/delta) int (u_k o Phi_k - u_{k-1})^2 as a
// quadratic form in the nodal values, sampled at the image quadrature points.
class MatchingSystem {
public:
    MatchingSystem(int image_level, const std::vector<Deformation>& phis, const EnergyParams& p, Execution ex)
        : rule_(build_quadrature(image_level)), segments_(static_cast<int>(phis.size())), ex_(ex) {
        const int cells = rule_.cells_per_dim();
        nodes_ = static_cast<std::size_t>(cells + 1) * (cells + 1);
        const int per_cell = rule_.points_per_cell();
        const std::size_t points = static_cast<std::size_t>(cells) * cells * per_cell;
        weight_.resize(points);
        fixed_.resize(points);
        moved_.assign(static_cast<std::size_t>(segments_), std::vector<Stencil>(points));
        parallel_rows(cells, [&](int cy) {
            for (int cx = 0; cx < cells; ++cx)
                for (int q = 0; q < per_cell; ++q) {
                    const std::size_t s = (static_cast<std::size_t>(cy) * cells + cx) * per_cell + q;
                    const Vec2 x = rule_.point(cx, cy, q);
                    weight_[s] = rule_.weight(q) / p.delta;
                    fixed_[s] = bilinear_stencil(x, cells);
                    for (int k = 0; k < segments_; ++k) {
                        Vec2 y = phis[k].eval_unchecked(x);
                        clamp_to_domain(y);
                        moved_[k][s] = bilinear_stencil(y, cells);
                    }
                }
        });
    }

    std::size_t nodes() const { return nodes_; }
    std::size_t unknowns() const { return nodes_ * (segments_ - 1); }

    // Gradient in the interior images; image(k) returns the nodal values of u_k.
    template <class ImageAt>
    std::vector<double> gradient(ImageAt image) const {
        const int cells = rule_.cells_per_dim();
        auto rows = [&](int r0, int r1, std::vector<double>& g) {
            const int per_cell = rule_.points_per_cell();
            for (int k = 1; k <= segments_; ++k) {
                const double* prev = image(k - 1);
                const double* cur = image(k);
                double* g_cur = k < segments_ ? g.data() + (k - 1) * nodes_ : nullptr;
                double* g_prev = k > 1 ? g.data() + (k - 2) * nodes_ : nullptr;
                const auto& moved = moved_[k - 1];
                for (std::size_t s = static_cast<std::size_t>(r0) * cells * per_cell;
                     s < static_cast<std::size_t>(r1) * cells * per_cell; ++s) {
                    const double r = moved[s].apply(cur) - fixed_[s].apply(prev);
                    const double f = 2.0 * weight_[s] * r;
                    if (g_cur) moved[s].scatter(g_cur, f);
                    if (g_prev) fixed_[s].scatter(g_prev, -f);
                }
            }
        };
        std::vector<double> g(unknowns(), 0.0);
        if (ex_ == Execution::Serial) {
            rows(0, cells, g);
            return g;
        }
        std::vector<std::vector<double>> partial(kReductionBlocks);
        parallel_blocks(cells, [&](int b, int r0, int r1) {
            partial[b].assign(unknowns(), 0.0);
            rows(r0, r1, partial[b]);
        });
        for (const auto& part : partial)
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += part[i];
        return g;
    }

    std::vector<double> diagonal() const {
        std::vector<double> d(unknowns(), 0.0);
        for (int k = 1; k <= segments_; ++k)
            for (std::size_t s = 0; s < weight_.size(); ++s) {
                const double f = 2.0 * weight_[s];
                if (k < segments_)
                    for (int i = 0; i < 4; ++i)
                        d[(k - 1) * nodes_ + moved_[k - 1][s].node[i]] += f * std::pow(moved_[k - 1][s].weight[i], 2);
                if (k > 1)
                    for (int i = 0; i < 4; ++i)
                        d[(k - 2) * nodes_ + fixed_[s].node[i]] += f * std::pow(fixed_[s].weight[i], 2);
            }
        return d;
    }

private:
    QuadratureRule rule_;
    int segments_;
    Execution ex_;
    std::size_t nodes_ = 0;
    std::vector<double> weight_;
    std::vector<Stencil> fixed_;
    std::vector<std::vector<Stencil>> moved_;
};

void check_path(const std::vector<Image>& images, const std::vector<Deformation>& phis) {
    if (images.size() < 3 || phis.size() + 1 != images.size())
        throw DimensionError("a path needs K + 1 >= 3 images and K deformations");
    for (const auto& u : images)
        if (u.level() != images.front().level()) throw DimensionError("images must share a level");
    for (const auto& d : phis)
        if (d.level() >= images.front().level()) throw DimensionError("spline level must be below the image level");
}

}  // namespace

std::vector<double> interior_image_gradient(const std::vector<Image>& images, const std::vector<Deformation>& phis,
                                            const EnergyParams& p, Execution ex) {
    check_path(images, phis);
    const MatchingSystem sys(images.front().level(), phis, p, ex);
    return sys.gradient([&](int k) { return images[k].values().data(); });
}

int minimize_interior_images(std::vector<Image>& images, const std::vector<Deformation>& phis, const EnergyParams& p,
                             double tolerance, int max_iterations, Execution ex) {
    check_path(images, phis);
    const MatchingSystem sys(images.front().level(), phis, p, ex);
    const int segments = static_cast<int>(phis.size());
    const std::size_t nodes = sys.nodes();
    const std::vector<double> zero(nodes, 0.0);
    const std::vector<double> diag = sys.diagonal();

    std::vector<double> x(sys.unknowns());
    for (int k = 1; k < segments; ++k)
        std::copy(images[k].values().begin(), images[k].values().end(), x.begin() + (k - 1) * nodes);
    auto gradient_at = [&](const std::vector<double>& v) {
        return sys.gradient([&](int k) -> const double* {
            if (k == 0) return images.front().values().data();
            if (k == segments) return images.back().values().data();
            return v.data() + (k - 1) * nodes;
        });
    };
    // The Hessian applied to v: the gradient with both end images set to zero.
    auto hessian = [&](const std::vector<double>& v) {
        return sys.gradient([&](int k) -> const double* {
            if (k == 0 || k == segments) return zero.data();
            return v.data() + (k - 1) * nodes;
        });
    };

    int total = 0;
    // Restarting from the true gradient removes the drift of the recursive residual.
    for (int restart = 0; restart < 4 && total < max_iterations; ++restart) {
        std::vector<double> r = gradient_at(x);
        for (double& v : r) v = -v;
        if (norm_inf(r) < tolerance) break;
        std::vector<double> z(r.size());
        for (std::size_t i = 0; i < r.size(); ++i) z[i] = r[i] / diag[i];
        std::vector<double> d = z;
        double rz = dot(r, z);
        while (total < max_iterations) {
            const std::vector<double> hd = hessian(d);
            const double curvature = dot(d, hd);
            if (!(curvature > 0.0)) break;
            const double alpha = rz / curvature;
            for (std::size_t i = 0; i < x.size(); ++i) {
                x[i] += alpha * d[i];
                r[i] -= alpha * hd[i];
            }
            ++total;
            if (norm_inf(r) < 0.1 * tolerance) break;
            for (std::size_t i = 0; i < r.size(); ++i) z[i] = r[i] / diag[i];
            const double rz_next = dot(r, z);
            const double beta = rz_next / rz;
            rz = rz_next;
            for (std::size_t i = 0; i < d.size(); ++i) d[i] = z[i] + beta * d[i];
        }
    }
    for (int k = 1; k < segments; ++k)
        std::copy(x.begin() + (k - 1) * nodes, x.begin() + k * nodes, images[k].values().begin());
    return total;
}

namespace {

// Sweeps on one level until the relative energy decrease falls below the tolerance.
InterpolationLevel run_level(std::vector<Image>& images, std::vector<Deformation>& phis, const EnergyParams& p,
                             const InterpolationConfig& cfg, bool from_identity) {
    const int segments = static_cast<int>(phis.size());
    RegistrationConfig full = cfg.registration;
    full.execution = cfg.execution;
    full.finest_level = phis.front().level();
    full.coarsest_level = std::min(full.coarsest_level, full.finest_level);
    RegistrationConfig partial = full;
    partial.max_iterations = cfg.sweep_iterations;

    InterpolationLevel out;
    out.level = phis.front().level();
    out.initial_energy = path_energy(images, phis, p, cfg.execution);
    double previous = out.initial_energy;
    for (int sweep = 0; sweep < cfg.max_sweeps; ++sweep) {
        SweepReport rep;
        for (int k = 1; k <= segments; ++k) {
            const Image& a = images[k - 1];
            const Image& b = images[k];
            Deformation& phi = phis[k - 1];
            const double before = matching_energy(a, b, phi, p, cfg.execution).total;
            Deformation next = sweep == 0 && from_identity ? register_images(a, b, p, full)
                                                           : refine_registration(a, b, phi, p, partial);
            if (matching_energy(a, b, next, p, cfg.execution).total <= before) phi = std::move(next);
        }
        rep.energy_after_registration = path_energy(images, phis, p, cfg.execution);
        rep.cg_iterations =
            minimize_interior_images(images, phis, p, cfg.image_tolerance, cfg.max_cg_iterations, cfg.execution);
        rep.energy_after_images = path_energy(images, phis, p, cfg.execution);
        rep.image_residual = norm_inf(interior_image_gradient(images, phis, p, cfg.execution));
        out.sweeps.push_back(rep);
        const double decrease = previous - rep.energy_after_images;
        previous = rep.energy_after_images;
        if (decrease <= cfg.tolerance * std::abs(previous)) {
            out.converged = true;
            break;
        }
    }
    return out;
}

}  // namespace

InterpolationResult interpolate(const Image& u0, const Image& uK, const EnergyParams& p,
                                const InterpolationConfig& cfg) {
    cfg.validate();
    p.validate();
    if (u0.level() != uK.level()) throw DimensionError("end images must share a level");
    const int finest = cfg.finest_level > 0 ? cfg.finest_level : u0.level() - 1;
    if (finest < 1 || finest >= u0.level()) throw DimensionError("images are too coarse for the spline level");
    const int coarsest = cfg.coarsest_level > 0 ? std::min(cfg.coarsest_level, finest) : finest;
    const int offset = u0.level() - finest;
    const int segments = cfg.segments;

    InterpolationResult out;
    for (int level = coarsest; level <= finest; ++level) {
        const bool top = level == finest;
        const Image a = top ? u0 : restrict_to_level(u0, level + offset);
        const Image b = top ? uK : restrict_to_level(uK, level + offset);
        if (level == coarsest) {
            out.images.push_back(a);
            for (int k = 1; k < segments; ++k) {
                const double t = static_cast<double>(k) / segments;
                out.images.push_back((1.0 - t) * a + t * b);
            }
            out.images.push_back(b);
            out.deformations.assign(segments, Deformation(level));
        } else {
            out.images.front() = a;
            for (int k = 1; k < segments; ++k) out.images[k] = prolong_image(out.images[k]);
            out.images.back() = b;
            for (auto& phi : out.deformations) phi = prolong_deformation(phi);
        }
        out.levels.push_back(run_level(out.images, out.deformations, p, cfg, level == coarsest));
    }
    return out;
}

}  // namespace metamorph
