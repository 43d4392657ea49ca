// Flat key=value run configuration shared by the CLI and profile files.
//
//   # comment
//   profile = plausible-rifle
//   density = 500
//   ref_area = 4.8e-5
//
// Every key has a default and unknown keys are rejected.
#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "trajnet/dynamics.hpp"
#include "trajnet/error.hpp"
#include "trajnet/mlp.hpp"
#include "trajnet/train.hpp"

namespace trajnet {

using KeyValues = std::vector<std::pair<std::string, std::string>>;

namespace detail {

inline std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return std::string(s.substr(first, last - first + 1));
}

template <typename T>
T parse_number(const std::string &key, const std::string &value) {
    T out{};
    const auto *end = value.data() + value.size();
    auto [ptr, ec] = std::from_chars(value.data(), end, out);
    if (ec != std::errc{} || ptr != end || value.empty())
        throw ConfigError("invalid value for " + key + ": '" + value + "'");
    return out;
}

inline bool parse_bool(const std::string &key, const std::string &value) {
    if (value == "1" || value == "true" || value == "yes" || value == "on") return true;
    if (value == "0" || value == "false" || value == "no" || value == "off") return false;
    throw ConfigError("invalid boolean for " + key + ": '" + value + "'");
}

} // namespace detail

/// Parses `key = value` lines; blank lines and `#` comments are skipped.
inline KeyValues parse_key_values(std::istream &is) {
    KeyValues out;
    std::string line;
    for (int lineno = 1; std::getline(is, line); ++lineno) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const auto text = detail::trim(line);
        if (text.empty()) continue;
        const auto eq = text.find('=');
        if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
        auto key = detail::trim(std::string_view(text).substr(0, eq));
        auto value = detail::trim(std::string_view(text).substr(eq + 1));
        if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
        std::ranges::replace(key, '-', '_');
        out.emplace_back(std::move(key), std::move(value));
    }
    return out;
}

inline KeyValues read_key_values_file(const std::string &path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open config file: " + path);
    return parse_key_values(is);
}

struct RunConfig {
    std::string profile = "plausible-rifle";
    // Overrides applied on top of the selected profile.
    std::map<std::string, double> profile_overrides;

    SimConfig sim{.angular_density = 500, .max_radius = 200.0};
    mlp::MlpConfig mlp;
    mlp::TrainingConfig training;

    double r_max = 0.0;  // 0: use the grid's max_radius
    std::uint32_t closed_loop_targets = 0;
    bool quantize = true;
    bool single_precision = true;  // network arithmetic in f32; physics is always f64
    std::uint64_t seed = 0;
    unsigned threads = 0;
    bool csv = false;

    std::string grid, dataset, model, out, history, report, export_csv;

    static const std::vector<std::string> &keys() {
        static const std::vector<std::string> k = {
            "profile", "mass", "drag_coeff", "ref_area", "muzzle_speed", "gravity", "air_density",
            "density", "dt", "max_radius", "max_steps", "integrator",
            "layer_dims", "block_repeat", "append_8192", "bn_epsilon", "bn_momentum",
            "batch_size", "learning_rate", "momentum", "plateau_min_delta", "plateau_patience",
            "lr_reduce_factor", "min_learning_rate", "early_stop_patience", "max_epochs", "record_wall_time",
            "r_max", "closed_loop_targets", "quantize", "precision", "seed", "threads", "csv",
            "grid", "dataset", "model", "out", "history", "report", "export_csv"};
        return k;
    }

    void set(const std::string &raw_key, const std::string &value) {
        std::string key = raw_key;
        std::ranges::replace(key, '-', '_');
        if (key == "radius") key = "max_radius";
        using detail::parse_bool;
        using detail::parse_number;
        if (key == "profile") {
            profiles::by_name(value);
            profile = value;
        } else if (key == "mass" || key == "drag_coeff" || key == "ref_area" || key == "muzzle_speed" ||
                   key == "gravity" || key == "air_density") {
            profile_overrides[key] = parse_number<double>(key, value);
        } else if (key == "density") {
            sim.angular_density = parse_number<std::uint32_t>(key, value);
        } else if (key == "dt") {
            sim.dt = parse_number<double>(key, value);
        } else if (key == "max_radius") {
            sim.max_radius = parse_number<double>(key, value);
        } else if (key == "max_steps") {
            sim.max_steps = parse_number<std::uint64_t>(key, value);
        } else if (key == "integrator") {
            if (value == "euler") sim.integrator = Integrator::explicit_euler;
            else if (value == "semi-implicit") sim.integrator = Integrator::semi_implicit_euler;
            else throw ConfigError("integrator must be 'euler' or 'semi-implicit'");
        } else if (key == "layer_dims") {
            mlp.layer_dims.clear();
            std::stringstream ss(value);
            for (std::string item; std::getline(ss, item, ',');)
                mlp.layer_dims.push_back(parse_number<std::uint32_t>(key, detail::trim(item)));
        } else if (key == "block_repeat") {
            mlp.block_repeat = parse_number<std::uint32_t>(key, value);
        } else if (key == "append_8192") {
            mlp.append_8192_when_density_exceeds_4096 = parse_bool(key, value);
        } else if (key == "bn_epsilon") {
            mlp.bn_epsilon = parse_number<double>(key, value);
        } else if (key == "bn_momentum") {
            mlp.bn_momentum = parse_number<double>(key, value);
        } else if (key == "batch_size") {
            training.batch_size = parse_number<std::uint32_t>(key, value);
        } else if (key == "learning_rate") {
            training.learning_rate = parse_number<double>(key, value);
        } else if (key == "momentum") {
            training.momentum = parse_number<double>(key, value);
        } else if (key == "plateau_min_delta") {
            training.plateau_min_delta = parse_number<double>(key, value);
        } else if (key == "plateau_patience") {
            training.plateau_patience = parse_number<std::uint32_t>(key, value);
        } else if (key == "lr_reduce_factor") {
            training.lr_reduce_factor = parse_number<double>(key, value);
        } else if (key == "min_learning_rate") {
            training.min_learning_rate = parse_number<double>(key, value);
        } else if (key == "early_stop_patience") {
            training.early_stop_patience = parse_number<std::uint32_t>(key, value);
        } else if (key == "max_epochs") {
            training.max_epochs = parse_number<std::uint32_t>(key, value);
        } else if (key == "record_wall_time") {
            training.record_wall_time = parse_bool(key, value);
        } else if (key == "r_max") {
            r_max = parse_number<double>(key, value);
        } else if (key == "closed_loop_targets") {
            closed_loop_targets = parse_number<std::uint32_t>(key, value);
        } else if (key == "quantize") {
            quantize = parse_bool(key, value);
        } else if (key == "precision") {
            if (value == "f32") single_precision = true;
            else if (value == "f64") single_precision = false;
            else throw ConfigError("precision must be 'f32' or 'f64'");
        } else if (key == "seed") {
            seed = parse_number<std::uint64_t>(key, value);
        } else if (key == "threads") {
            threads = parse_number<unsigned>(key, value);
        } else if (key == "csv") {
            csv = parse_bool(key, value);
        } else if (key == "grid") {
            grid = value;
        } else if (key == "dataset") {
            dataset = value;
        } else if (key == "model") {
            model = value;
        } else if (key == "out") {
            out = value;
        } else if (key == "history") {
            history = value;
        } else if (key == "report") {
            report = value;
        } else if (key == "export_csv") {
            export_csv = value;
        } else {
            throw ConfigError("unknown config key: " + raw_key);
        }
    }

    void apply(const KeyValues &kv) {
        for (const auto &[k, v] : kv) set(k, v);
    }

    /// The selected profile with overrides applied.
    Profile resolved_profile() const {
        Profile p = profiles::by_name(profile);
        for (const auto &[k, v] : profile_overrides) {
            double *slot = k == "mass"           ? &p.projectile.mass
                           : k == "drag_coeff"   ? &p.projectile.drag_coeff
                           : k == "ref_area"     ? &p.projectile.ref_area
                           : k == "muzzle_speed" ? &p.projectile.muzzle_speed
                           : k == "gravity"      ? &p.environment.gravity
                                                 : &p.environment.air_density;
            if (*slot != v) {
                *slot = v;
                p.name = "custom";
            }
        }
        p.projectile.validate();
        p.environment.validate();
        return p;
    }

    SimConfig resolved_sim() const {
        SimConfig s = sim;
        s.profile_name = resolved_profile().name;
        s.validate();
        return s;
    }

    mlp::TrainingConfig resolved_training() const {
        auto t = training;
        t.seed = seed;
        return t;
    }
};

/// Loads a profile and simulation settings from a key=value file; keys
/// outside the physics set are rejected.
inline std::pair<Profile, SimConfig> load_profile_config(std::istream &is, const Profile &base = profiles::plausible_rifle(),
                                                         const SimConfig &base_sim = {}) {
    static const std::vector<std::string> allowed = {"profile", "mass", "drag_coeff", "ref_area", "muzzle_speed",
                                                     "gravity", "air_density", "dt", "max_radius", "max_steps",
                                                     "density", "integrator"};
    RunConfig rc;
    rc.profile = base.name == "custom" ? "plausible-rifle" : base.name;
    rc.sim = base_sim;
    if (base.name == "custom") {
        rc.profile_overrides = {{"mass", base.projectile.mass},         {"drag_coeff", base.projectile.drag_coeff},
                                {"ref_area", base.projectile.ref_area}, {"muzzle_speed", base.projectile.muzzle_speed},
                                {"gravity", base.environment.gravity},  {"air_density", base.environment.air_density}};
    }
    for (const auto &[k, v] : parse_key_values(is)) {
        if (std::ranges::find(allowed, k) == allowed.end()) throw ConfigError("unknown profile key: " + k);
        rc.set(k, v);
    }
    return {rc.resolved_profile(), rc.resolved_sim()};
}

} // namespace trajnet
