#pragma once

#include <exception>
#include <ostream>
#include <string>

#include "metamorph/config.hpp"

namespace metamorph {

inline constexpr int kExitSuccess = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitInput = 3;
inline constexpr int kExitSolver = 4;

/// Exit code for an exception escaping a command.
int exit_code_for(const std::exception& e);

/// Each command writes its files into cfg.output, logs progress to `log` and
/// returns an exit code; errors other than solver failures propagate.
int register_command(const RunConfig& cfg, std::ostream& log);
int shoot_command(const RunConfig& cfg, std::ostream& log);
int interpolate_command(const RunConfig& cfg, std::ostream& log);
int viz_velocity_command(const std::string& phi_path, const std::string& out_path, int steps, int image_level);
/// size 0 picks the nearest valid size.
int resample_command(const std::string& in_path, const std::string& out_path, int size);

/// "u_03.png" style names, zero padded to the width of `last` (at least 2).
std::string indexed_name(const std::string& stem, int k, int last, const std::string& extension);

}  // namespace metamorph
