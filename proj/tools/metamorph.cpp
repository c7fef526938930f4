#include <CLI11.hpp>

#include <iostream>
#include <optional>

#include "metamorph/commands.hpp"
#include "metamorph/errors.hpp"
#include "metamorph/parallel.hpp"

using namespace metamorph;

namespace {

struct CommonOptions {
    std::string config;
    std::vector<std::string> overrides;
    std::string u0, u1, out;
    std::optional<int> steps;
    std::optional<int> threads;
};

void add_common(CLI::App* cmd, CommonOptions& o, const char* second, const char* second_help) {
    cmd->add_option("--u0", o.u0, "first image (PGM or PNG)");
    cmd->add_option(second, o.u1, second_help);
    cmd->add_option("--config", o.config, "configuration file with key = value lines");
    cmd->add_option("--set", o.overrides, "override a configuration key, key=value")->take_all();
    cmd->add_option("--out", o.out, "output directory");
    cmd->add_option("--threads", o.threads, "OpenMP threads");
}

RunConfig resolve(const CommonOptions& o) {
    RunConfig cfg = o.config.empty() ? RunConfig{} : load_config(o.config);
    for (const auto& line : o.overrides) apply_config_line(cfg, line);
    if (!o.u0.empty()) cfg.u0 = o.u0;
    if (!o.u1.empty()) cfg.u1 = o.u1;
    if (!o.out.empty()) cfg.output = o.out;
    if (o.steps) cfg.steps = *o.steps;
    if (o.threads) cfg.threads = *o.threads;
    cfg.validate();
    if (cfg.threads > 0) set_thread_count(cfg.threads);
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Geodesic shooting and interpolation in the metamorphosis image model"};
    app.require_subcommand(1);

    CommonOptions reg_opts, shoot_opts, interp_opts, cfg_opts;
    auto* reg = app.add_subcommand("register", "register u1 to u0");
    add_common(reg, reg_opts, "--u1", "second image");
    auto* shoot = app.add_subcommand("shoot", "extrapolate the image sequence from u0, u1");
    add_common(shoot, shoot_opts, "--u1", "second image");
    shoot->add_option("--steps", shoot_opts.steps, "number of steps K");
    auto* interp = app.add_subcommand("interpolate", "discrete geodesic between u0 and uK");
    add_common(interp, interp_opts, "--uK", "last image");
    interp->add_option("--segments", interp_opts.steps, "number of segments K");

    std::string phi_path, viz_out;
    int viz_steps = 1, viz_level = 0;
    auto* viz = app.add_subcommand("viz-velocity", "color-code K (Phi - Id) of a deformation file");
    viz->add_option("--phi", phi_path, "deformation file")->required();
    viz->add_option("--out", viz_out, "output PNG")->required();
    viz->add_option("--steps", viz_steps, "velocity scale K");
    viz->add_option("--image-level", viz_level, "sampling level, default spline level + 1");

    std::string rs_in, rs_out;
    int rs_size = 0;
    auto* resample = app.add_subcommand("resample", "pad or crop an image to a square of side 2^M+1");
    resample->add_option("--in", rs_in, "input image")->required();
    resample->add_option("--out", rs_out, "output image (.pgm or .png)")->required();
    resample->add_option("--size", rs_size, "side length, default the nearest valid one");

    auto* show = app.add_subcommand("config", "print the effective configuration");
    show->add_option("--config", cfg_opts.config, "configuration file");
    show->add_option("--set", cfg_opts.overrides, "override a configuration key, key=value")->take_all();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    }

    try {
        if (*reg) return register_command(resolve(reg_opts), std::cout);
        if (*shoot) return shoot_command(resolve(shoot_opts), std::cout);
        if (*interp) return interpolate_command(resolve(interp_opts), std::cout);
        if (*viz) return viz_velocity_command(phi_path, viz_out, viz_steps, viz_level);
        if (*resample) return resample_command(rs_in, rs_out, rs_size);
        if (*show) {
            std::cout << serialize_config(resolve(cfg_opts));
            return kExitSuccess;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for(e);
    }
    return kExitFailure;
}
