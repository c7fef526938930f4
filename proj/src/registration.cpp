#include "metamorph/registration.hpp"

#include <algorithm>
#include <cmath>

#include "metamorph/errors.hpp"

namespace metamorph {

void RegistrationConfig::validate() const {
    if (coarsest_level < 1) throw ConfigError("coarsest registration level must be at least 1");
    if (finest_level != 0 && finest_level < coarsest_level)
        throw ConfigError("finest registration level is below the coarsest level");
    if (max_iterations < 0) throw ConfigError("registration iteration cap must be nonnegative");
    if (!(armijo_c1 > 0.0 && armijo_c1 < 0.5)) throw ConfigError("Armijo constant must lie in (0, 0.5)");
    if (!(backtrack > 0.0 && backtrack < 1.0)) throw ConfigError("backtracking factor must lie in (0, 1)");
    if (!(gradient_tolerance > 0.0)) throw ConfigError("gradient tolerance must be positive");
    if (restart_period < 1) throw ConfigError("restart period must be positive");
}

namespace {

std::vector<double> axpy(const std::vector<double>& x, double a, const std::vector<double>& d) {
    std::vector<double> y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] + a * d[i];
    return y;
}

}  // namespace

Deformation refine_registration(const Image& u0, const Image& u1, const Deformation& start, const EnergyParams& p,
                                const RegistrationConfig& cfg, LevelReport* report, std::vector<double>* history) {
    const int level = start.level();
    auto evaluate = [&](const std::vector<double>& x) {
        return matching_energy_and_grad(u0, u1, Deformation::from_dofs(level, x), p, cfg.execution);
    };
    auto energy_only = [&](const std::vector<double>& x) {
        return matching_energy(u0, u1, Deformation::from_dofs(level, x), p, cfg.execution).total;
    };

    std::vector<double> x = start.dofs();
    auto eg = evaluate(x);
    double e = eg.energy.total;
    std::vector<double> g = std::move(eg.gradient);
    LevelReport rep;
    rep.level = level;
    rep.initial_energy = e;
    if (history) history->push_back(e);

    std::vector<double> d(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) d[i] = -g[i];
    bool steepest = true;
    double alpha = 0.0;
    int since_restart = 0;
    int it = 0;
    while (true) {
        const double gnorm = norm_inf(g);
        rep.gradient_norm = gnorm;
        if (gnorm < cfg.gradient_tolerance) {
            rep.converged = true;
            break;
        }
        if (it >= cfg.max_iterations) break;

        const double slope = dot(g, d);
        if (alpha == 0.0) alpha = 0.1 * start.spacing() / std::max(norm_inf(d), 1e-300);
        // Backtracking; steps that violate the determinant guard count as failures.
        bool accepted = false;
        std::vector<double> trial;
        double e_trial = e;
        for (int bt = 0; bt < 60; ++bt) {
            trial = axpy(x, alpha, d);
            const Deformation phi = Deformation::from_dofs(level, trial);
            if (min_jacobian_determinant(phi) >= cfg.det_guard) {
                e_trial = energy_only(trial);
                if (e_trial <= e + cfg.armijo_c1 * alpha * slope) {
                    accepted = true;
                    break;
                }
            }
            alpha *= cfg.backtrack;
        }
        if (!accepted) {
            if (steepest) break;
            for (std::size_t i = 0; i < g.size(); ++i) d[i] = -g[i];
            steepest = true;
            since_restart = 0;
            alpha = 0.0;
            continue;
        }

        ++it;
        x = std::move(trial);
        auto next = evaluate(x);
        e = next.energy.total;
        if (history) history->push_back(e);
        const double gg_old = dot(g, g);
        std::vector<double> gn = std::move(next.gradient);
        const double beta = dot(gn, gn) / gg_old;
        ++since_restart;
        for (std::size_t i = 0; i < d.size(); ++i) d[i] = -gn[i] + beta * d[i];
        steepest = false;
        if (since_restart >= cfg.restart_period || dot(gn, d) >= 0.0) {
            for (std::size_t i = 0; i < d.size(); ++i) d[i] = -gn[i];
            steepest = true;
            since_restart = 0;
        }
        g = std::move(gn);
        alpha *= 2.0;
    }
    rep.iterations = it;
    rep.final_energy = e;
    if (report) *report = rep;
    return Deformation::from_dofs(level, x);
}

Deformation register_images(const Image& u0, const Image& u1, const EnergyParams& p, const RegistrationConfig& cfg,
                            RegistrationReport* report) {
    cfg.validate();
    p.validate();
    if (u0.level() != u1.level()) throw DimensionError("images must share a level");
    const int finest = cfg.finest_level > 0 ? cfg.finest_level : u0.level() - 1;
    if (finest >= u0.level()) throw DimensionError("spline level must be below the image level");
    if (finest < 1) throw DimensionError("images are too coarse for registration");
    const int coarsest = std::min(cfg.coarsest_level, finest);
    const int offset = u0.level() - finest;

    RegistrationReport rep;
    Deformation phi(coarsest);
    for (int level = coarsest; level <= finest; ++level) {
        const Image a = restrict_to_level(u0, level + offset);
        const Image b = restrict_to_level(u1, level + offset);
        if (level > coarsest) phi = prolong_deformation(phi);
        // Never start worse than the identity on this level.
        const double e_id = matching_energy(a, b, Deformation(level), p, cfg.execution).total;
        if (matching_energy(a, b, phi, p, cfg.execution).total > e_id) phi = Deformation(level);
        LevelReport lr;
        std::vector<double>* hist = level == finest ? &rep.history : nullptr;
        phi = refine_registration(a, b, phi, p, cfg, &lr, hist);
        rep.levels.push_back(lr);
        if (level == finest) {
            rep.identity_energy = e_id;
            rep.final_energy = lr.final_energy;
            rep.converged = lr.converged;
        }
    }
    if (report) *report = std::move(rep);
    return phi;
}

}  // namespace metamorph
