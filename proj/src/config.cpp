#include "metamorph/config.hpp"

#include <charconv>
#include <functional>
#include <map>
#include <sstream>

#include "metamorph/errors.hpp"
#include "metamorph/io.hpp"

namespace metamorph {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

double parse_double(const std::string& key, const std::string& s) {
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw ConfigError("invalid number for " + key + ": '" + s + "'");
    return v;
}

template <class Int>
Int parse_int(const std::string& key, const std::string& s) {
    Int v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw ConfigError("invalid integer for " + key + ": '" + s + "'");
    return v;
}

bool parse_bool(const std::string& key, const std::string& s) {
    if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
    if (s == "false" || s == "0" || s == "no" || s == "off") return false;
    throw ConfigError("invalid boolean for " + key + ": '" + s + "'");
}

struct Field {
    ConfigKey key;
    std::function<std::string(const RunConfig&)> get;
    std::function<void(RunConfig&, const std::string&)> set;
};

Field string_field(std::string name, std::string doc, std::string RunConfig::*m) {
    return {{name, std::move(doc)},
            [m](const RunConfig& c) { return c.*m; },
            [m](RunConfig& c, const std::string& v) { c.*m = v; }};
}

template <class Get>
Field double_field(std::string name, std::string doc, Get ref) {
    return {{name, std::move(doc)},
            [ref](const RunConfig& c) { return format_double(ref(c)); },
            [ref, name](RunConfig& c, const std::string& v) { ref(c) = parse_double(name, v); }};
}

template <class Get>
Field int_field(std::string name, std::string doc, Get ref) {
    return {{name, std::move(doc)},
            [ref](const RunConfig& c) { return std::to_string(ref(c)); },
            [ref, name](RunConfig& c, const std::string& v) {
                ref(c) = parse_int<std::remove_reference_t<decltype(ref(c))>>(name, v);
            }};
}

template <class Get>
Field bool_field(std::string name, std::string doc, Get ref) {
    return {{name, std::move(doc)},
            [ref](const RunConfig& c) { return std::string(ref(c) ? "true" : "false"); },
            [ref, name](RunConfig& c, const std::string& v) { ref(c) = parse_bool(name, v); }};
}

const std::vector<Field>& fields() {
    static const std::vector<Field> table = [] {
        std::vector<Field> f;
        f.push_back(string_field("u0", "first input image", &RunConfig::u0));
        f.push_back(string_field("u1", "second input image (last image for interpolate)", &RunConfig::u1));
        f.push_back(string_field("output", "output directory", &RunConfig::output));
        f.push_back(int_field("steps", "shooting steps or interpolation segments K",
                              [](auto& c) -> auto& { return c.steps; }));
        f.push_back(int_field("spline_level", "spline level N, 0 = image level - 1",
                              [](auto& c) -> auto& { return c.spline_level; }));
        f.push_back(int_field("image_level", "required image level M, 0 = any",
                              [](auto& c) -> auto& { return c.image_level; }));
        f.push_back(string_field("image_format", "png or pgm", &RunConfig::image_format));
        f.push_back(double_field("gamma", "weight of the Laplacian term",
                                 [](auto& c) -> auto& { return c.energy.gamma; }));
        f.push_back(double_field("delta", "matching term is divided by delta",
                                 [](auto& c) -> auto& { return c.energy.delta; }));
        f.push_back(int_field("registration.coarsest_level", "coarsest spline level",
                              [](auto& c) -> auto& { return c.registration.coarsest_level; }));
        f.push_back(int_field("registration.max_iterations", "iterations per level",
                              [](auto& c) -> auto& { return c.registration.max_iterations; }));
        f.push_back(double_field("registration.armijo_c1", "sufficient decrease constant",
                                 [](auto& c) -> auto& { return c.registration.armijo_c1; }));
        f.push_back(double_field("registration.backtrack", "step reduction factor",
                                 [](auto& c) -> auto& { return c.registration.backtrack; }));
        f.push_back(double_field("registration.gradient_tolerance", "gradient sup norm at which to stop",
                                 [](auto& c) -> auto& { return c.registration.gradient_tolerance; }));
        f.push_back(int_field("registration.restart_period", "conjugate gradient restart period",
                              [](auto& c) -> auto& { return c.registration.restart_period; }));
        f.push_back(double_field("registration.det_guard", "minimum Jacobian determinant",
                                 [](auto& c) -> auto& { return c.registration.det_guard; }));
        f.push_back(double_field("shooting.threshold", "fixed point stopping threshold",
                                 [](auto& c) -> auto& { return c.shooting.threshold; }));
        f.push_back(int_field("shooting.max_iterations", "fixed point iteration cap",
                              [](auto& c) -> auto& { return c.shooting.max_iterations; }));
        f.push_back(double_field("shooting.det_guard", "minimum Jacobian determinant",
                                 [](auto& c) -> auto& { return c.shooting.det_guard; }));
        f.push_back(bool_field("shooting.smoothing", "filter the intensity modulation",
                               [](auto& c) -> auto& { return c.shooting.smoothing; }));
        f.push_back(double_field("shooting.tau0", "filter time step of the first computed image",
                                 [](auto& c) -> auto& { return c.shooting.tau0; }));
        f.push_back(double_field("shooting.beta", "filter time step decay",
                                 [](auto& c) -> auto& { return c.shooting.beta; }));
        f.push_back(double_field("shooting.lambda", "filter edge sensitivity",
                                 [](auto& c) -> auto& { return c.shooting.lambda; }));
        f.push_back({{"shooting.filter_placement", "before or after composition"},
                     [](const RunConfig& c) {
                         return std::string(c.shooting.placement == FilterPlacement::BeforeComposition ? "before"
                                                                                                       : "after");
                     },
                     [](RunConfig& c, const std::string& v) {
                         if (v == "before")
                             c.shooting.placement = FilterPlacement::BeforeComposition;
                         else if (v == "after")
                             c.shooting.placement = FilterPlacement::AfterComposition;
                         else
                             throw ConfigError("shooting.filter_placement must be before or after, got '" + v + "'");
                     }});
        f.push_back(bool_field("shooting.reregister", "register the first deformation afresh at every step",
                               [](auto& c) -> auto& { return c.shooting.reregister; }));
        f.push_back(int_field("interpolation.coarsest_level", "coarsest spline level, 0 = single level",
                              [](auto& c) -> auto& { return c.interpolation.coarsest_level; }));
        f.push_back(int_field("interpolation.max_sweeps", "sweeps per level",
                              [](auto& c) -> auto& { return c.interpolation.max_sweeps; }));
        f.push_back(int_field("interpolation.sweep_iterations", "registration iterations per sweep",
                              [](auto& c) -> auto& { return c.interpolation.sweep_iterations; }));
        f.push_back(double_field("interpolation.tolerance", "relative energy decrease at which to stop",
                                 [](auto& c) -> auto& { return c.interpolation.tolerance; }));
        f.push_back(double_field("interpolation.image_tolerance", "image gradient sup norm",
                                 [](auto& c) -> auto& { return c.interpolation.image_tolerance; }));
        f.push_back(int_field("interpolation.max_cg_iterations", "conjugate gradient cap",
                              [](auto& c) -> auto& { return c.interpolation.max_cg_iterations; }));
        f.push_back(bool_field("viz.velocity", "write velocity images",
                               [](auto& c) -> auto& { return c.write_velocity; }));
        f.push_back(bool_field("viz.modulation", "write modulation maps",
                               [](auto& c) -> auto& { return c.write_modulation; }));
        f.push_back(int_field("threads", "OpenMP threads, 0 = runtime default",
                              [](auto& c) -> auto& { return c.threads; }));
        f.push_back(int_field("seed", "seed for generated test instances",
                              [](auto& c) -> auto& { return c.seed; }));
        return f;
    }();
    return table;
}

const Field& find_field(const std::string& name) {
    static const std::map<std::string, const Field*> index = [] {
        std::map<std::string, const Field*> m;
        for (const auto& f : fields()) m[f.key.name] = &f;
        return m;
    }();
    const auto it = index.find(name);
    if (it == index.end()) throw ConfigError("unknown configuration key '" + name + "'");
    return *it->second;
}

}  // namespace

void RunConfig::validate() const {
    if (steps < 1) throw ConfigError("steps must be at least 1");
    if (spline_level < 0) throw ConfigError("spline_level must be nonnegative");
    if (image_level < 0) throw ConfigError("image_level must be nonnegative");
    if (spline_level > 0 && image_level > 0 && spline_level >= image_level)
        throw ConfigError("spline_level must be below image_level");
    if (image_format != "png" && image_format != "pgm") throw ConfigError("image_format must be png or pgm");
    if (threads < 0) throw ConfigError("threads must be nonnegative");
    energy.validate();
    registration.validate();
    shooting.validate();
    interpolation.validate();
}

const std::vector<ConfigKey>& config_keys() {
    static const std::vector<ConfigKey> keys = [] {
        std::vector<ConfigKey> k;
        for (const auto& f : fields()) k.push_back(f.key);
        return k;
    }();
    return keys;
}

void apply_config_line(RunConfig& cfg, const std::string& raw) {
    const std::string line = trim(raw.substr(0, raw.find('#')));
    if (line.empty()) return;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("expected 'key = value', got '" + line + "'");
    const std::string key = trim(line.substr(0, eq));
    find_field(key).set(cfg, trim(line.substr(eq + 1)));
}

void apply_config_text(RunConfig& cfg, const std::string& text) {
    std::istringstream in(text);
    std::string line;
    int number = 0;
    while (std::getline(in, line)) {
        ++number;
        try {
            apply_config_line(cfg, line);
        } catch (const ConfigError& e) {
            throw ConfigError("line " + std::to_string(number) + ": " + e.what());
        }
    }
}

RunConfig parse_config(const std::string& text) {
    RunConfig cfg;
    apply_config_text(cfg, text);
    return cfg;
}

RunConfig load_config(const std::string& path) {
    std::vector<std::uint8_t> bytes;
    try {
        bytes = read_file(path);
    } catch (const InputError&) {
        throw ConfigError("cannot open configuration file " + path);
    }
    return parse_config(std::string(bytes.begin(), bytes.end()));
}

std::string serialize_config(const RunConfig& cfg) {
    std::string out;
    for (const auto& f : fields()) out += f.key.name + " = " + f.get(cfg) + "\n";
    return out;
}

}  // namespace metamorph
