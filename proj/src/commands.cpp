#include "metamorph/commands.hpp"

#include <algorithm>
#include <filesystem>
#include <sstream>

#include "metamorph/errors.hpp"
#include "metamorph/io.hpp"
#include "metamorph/visualize.hpp"

namespace metamorph {

namespace fs = std::filesystem;

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const ConfigError*>(&e)) return kExitConfig;
    if (dynamic_cast<const InputError*>(&e)) return kExitInput;
    if (dynamic_cast<const NonConvergenceError*>(&e) || dynamic_cast<const DegenerateDeformationError*>(&e) ||
        dynamic_cast<const InversionError*>(&e))
        return kExitSolver;
    return kExitFailure;
}

std::string indexed_name(const std::string& stem, int k, int last, const std::string& extension) {
    const int width = std::max<int>(2, static_cast<int>(std::to_string(last).size()));
    std::string digits = std::to_string(k);
    digits.insert(0, static_cast<std::size_t>(std::max(0, width - static_cast<int>(digits.size()))), '0');
    return stem + "_" + digits + "." + extension;
}

namespace {

struct Inputs {
    Image u0, u1;
    int spline_level = 0;
};

Inputs load_inputs(const RunConfig& cfg) {
    cfg.validate();
    if (cfg.u0.empty() || cfg.u1.empty()) throw ConfigError("both input images must be given");
    Inputs in{load_image(cfg.u0), load_image(cfg.u1), 0};
    if (in.u0.level() != in.u1.level())
        throw DimensionError("input images differ in size: " + std::to_string(in.u0.nodes_per_dim()) + " and " +
                             std::to_string(in.u1.nodes_per_dim()));
    if (cfg.image_level > 0 && in.u0.level() != cfg.image_level)
        throw DimensionError("input images have level " + std::to_string(in.u0.level()) + ", configuration expects " +
                             std::to_string(cfg.image_level));
    in.spline_level = cfg.spline_level > 0 ? cfg.spline_level : in.u0.level() - 1;
    if (in.spline_level >= in.u0.level())
        throw ConfigError("spline_level " + std::to_string(in.spline_level) + " is not below the image level " +
                          std::to_string(in.u0.level()));
    return in;
}

std::string path_in(const RunConfig& cfg, const std::string& name) { return (fs::path(cfg.output) / name).string(); }

std::string sci(double v) {
    std::ostringstream s;
    s.precision(10);
    s << v;
    return s.str();
}

void write_deformation_outputs(const RunConfig& cfg, const std::vector<Deformation>& phis, int image_level,
                               int steps) {
    const int last = static_cast<int>(phis.size());
    for (int k = 1; k <= last; ++k) {
        save_deformation(phis[k - 1], path_in(cfg, indexed_name("phi", k, last, "mdef")));
        if (cfg.write_velocity)
            write_rgb_png(velocity_viz(phis[k - 1], image_level, steps),
                          path_in(cfg, indexed_name("velocity", k, last, "png")));
    }
}

void write_images(const RunConfig& cfg, const std::vector<Image>& images, int last) {
    for (std::size_t k = 0; k < images.size(); ++k)
        save_image(images[k], path_in(cfg, indexed_name("u", static_cast<int>(k), last, cfg.image_format)));
}

}  // namespace

int register_command(const RunConfig& cfg, std::ostream& log) {
    const Inputs in = load_inputs(cfg);
    RegistrationConfig rc = cfg.registration;
    rc.finest_level = in.spline_level;
    log << "registering " << cfg.u0 << " to " << cfg.u1 << " at spline level " << in.spline_level << "\n";
    RegistrationReport rep;
    const Deformation phi = register_images(in.u0, in.u1, cfg.energy, rc, &rep);

    write_text_atomic(path_in(cfg, "config.txt"), serialize_config(cfg));
    save_deformation(phi, path_in(cfg, "phi.mdef"));
    save_image(compose(in.u1, phi), path_in(cfg, "warped." + cfg.image_format));
    if (cfg.write_velocity) write_rgb_png(velocity_viz(phi, in.u0.level(), 1), path_in(cfg, "velocity.png"));
    std::string energy;
    for (double e : rep.history) energy += sci(e) + "\n";
    write_text_atomic(path_in(cfg, "energy.txt"), energy);

    std::ostringstream r;
    r << "command = register\n";
    r << "identity_energy = " << sci(rep.identity_energy) << "\n";
    r << "final_energy = " << sci(rep.final_energy) << "\n";
    r << "min_det = " << sci(min_jacobian_determinant(phi)) << "\n";
    r << "converged = " << (rep.converged ? "true" : "false") << "\n";
    for (const auto& l : rep.levels)
        r << "level " << l.level << " iterations = " << l.iterations << " energy = " << sci(l.initial_energy)
          << " -> " << sci(l.final_energy) << " gradient = " << sci(l.gradient_norm) << "\n";
    write_text_atomic(path_in(cfg, "report.txt"), r.str());
    log << "energy " << rep.identity_energy << " -> " << rep.final_energy << "\n";
    return kExitSuccess;
}

int shoot_command(const RunConfig& cfg, std::ostream& log) {
    const Inputs in = load_inputs(cfg);
    RegistrationConfig rc = cfg.registration;
    rc.finest_level = in.spline_level;
    log << "shooting " << cfg.steps << " steps from " << cfg.u0 << ", " << cfg.u1 << "\n";
    const ShootingResult res = exp_k(in.u0, in.u1, cfg.steps, cfg.energy, cfg.shooting, rc);

    write_text_atomic(path_in(cfg, "config.txt"), serialize_config(cfg));
    write_images(cfg, res.images, cfg.steps);
    write_deformation_outputs(cfg, res.deformations, in.u0.level(), cfg.steps);
    if (cfg.write_modulation) {
        for (std::size_t k = 0; k < res.modulations.size(); ++k) {
            const int index = static_cast<int>(k) + 1;
            const SignedMap m = modulation_map(res.modulations[k]);
            save_image(m.gray, path_in(cfg, indexed_name("modulation", index, cfg.steps, cfg.image_format)));
            write_text_atomic(path_in(cfg, indexed_name("modulation", index, cfg.steps, "txt")),
                              "bound = " + sci(m.bound) + "\n");
        }
    }

    std::ostringstream r;
    r << "command = shoot\n";
    r << "steps = " << cfg.steps << "\n";
    r << "registration_energy = " << sci(res.registration.final_energy) << "\n";
    r << "registration_identity_energy = " << sci(res.registration.identity_energy) << "\n";
    for (const auto& s : res.steps)
        r << "step " << s.index << " iterations = " << s.iterations << " difference = " << sci(s.final_difference)
          << " residual = " << sci(s.residual) << " min_det = " << sci(s.min_det) << " energy = " << sci(s.energy)
          << "\n";
    if (res.complete()) {
        r << "status = complete\n";
    } else {
        r << "status = failed\nfailed_step = " << *res.failed_step << "\nfailure = " << res.failure << "\n";
    }
    write_text_atomic(path_in(cfg, "report.txt"), r.str());
    if (!res.complete()) {
        log << "step " << *res.failed_step << " failed: " << res.failure << "\n";
        return kExitSolver;
    }
    log << "computed " << res.images.size() << " images\n";
    return kExitSuccess;
}

int interpolate_command(const RunConfig& cfg, std::ostream& log) {
    const Inputs in = load_inputs(cfg);
    InterpolationConfig ic = cfg.interpolation;
    ic.segments = cfg.steps;
    ic.registration = cfg.registration;
    ic.finest_level = in.spline_level;
    log << "interpolating " << cfg.steps << " segments between " << cfg.u0 << " and " << cfg.u1 << "\n";
    const InterpolationResult res = interpolate(in.u0, in.u1, cfg.energy, ic);

    write_text_atomic(path_in(cfg, "config.txt"), serialize_config(cfg));
    write_images(cfg, res.images, cfg.steps);
    write_deformation_outputs(cfg, res.deformations, in.u0.level(), cfg.steps);
    std::ostringstream e;
    e << "# level sweep energy_after_registration energy_after_images\n";
    for (const auto& l : res.levels)
        for (std::size_t s = 0; s < l.sweeps.size(); ++s)
            e << l.level << " " << s + 1 << " " << sci(l.sweeps[s].energy_after_registration) << " "
              << sci(l.sweeps[s].energy_after_images) << "\n";
    write_text_atomic(path_in(cfg, "energy.txt"), e.str());

    std::ostringstream r;
    r << "command = interpolate\n";
    r << "segments = " << cfg.steps << "\n";
    r << "path_energy = " << sci(res.final_energy()) << "\n";
    r << "converged = " << (res.converged() ? "true" : "false") << "\n";
    const auto w = segment_energies(res.images, res.deformations, cfg.energy);
    for (std::size_t k = 0; k < w.size(); ++k)
        r << "segment " << k + 1 << " energy = " << sci(w[k])
          << " min_det = " << sci(min_jacobian_determinant(res.deformations[k])) << "\n";
    write_text_atomic(path_in(cfg, "report.txt"), r.str());
    log << "path energy " << res.final_energy() << "\n";
    return kExitSuccess;
}

int viz_velocity_command(const std::string& phi_path, const std::string& out_path, int steps, int image_level) {
    if (steps < 1) throw ConfigError("steps must be at least 1");
    const Deformation phi = load_deformation(phi_path);
    const int level = image_level > 0 ? image_level : phi.level() + 1;
    if (level <= phi.level()) throw ConfigError("image level must exceed the spline level");
    write_rgb_png(velocity_viz(phi, level, steps), out_path);
    return kExitSuccess;
}

int resample_command(const std::string& in_path, const std::string& out_path, int size) {
    const GrayRaster r = read_gray(in_path);
    const int target = size > 0 ? size : nearest_valid_size(std::max(r.width, r.height));
    if (nearest_valid_size(target) != target)
        throw ConfigError("size " + std::to_string(target) + " is not of the form 2^M+1");
    write_gray(resize_canvas(r, target), out_path);
    return kExitSuccess;
}

}  // namespace metamorph
