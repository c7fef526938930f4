#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "metamorph/energy.hpp"
#include "metamorph/interpolation.hpp"
#include "metamorph/registration.hpp"
#include "metamorph/shooting.hpp"

namespace metamorph {

struct RunConfig {
    std::string u0;
    /// Second image for register and shoot, last image for interpolate.
    std::string u1;
    std::string output = "out";
    /// K: shooting steps or interpolation segments.
    int steps = 8;
    /// Spline level N; 0 means image level - 1.
    int spline_level = 0;
    /// Expected image level M of the inputs; 0 accepts any.
    int image_level = 0;
    std::string image_format = "png";
    EnergyParams energy;
    RegistrationConfig registration;
    ShootingConfig shooting;
    InterpolationConfig interpolation;
    bool write_velocity = true;
    bool write_modulation = true;
    int threads = 0;
    std::uint64_t seed = 1;

    void validate() const;
};

struct ConfigKey {
    std::string name;
    std::string doc;
};

/// Every recognized key in serialization order.
const std::vector<ConfigKey>& config_keys();

/// `key = value` lines; `#` starts a comment. Later lines override earlier
/// ones. Throws ConfigError on unknown keys or bad values.
void apply_config_text(RunConfig& cfg, const std::string& text);
void apply_config_line(RunConfig& cfg, const std::string& line);
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);
std::string serialize_config(const RunConfig& cfg);

}  // namespace metamorph
