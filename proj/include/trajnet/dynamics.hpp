// Point-mass projectile under gravity and quadratic drag in the vertical firing plane.
//
// All functions are pure; every simulation starts at the origin with speed
// `muzzle_speed` along the requested elevation angle.
#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "trajnet/error.hpp"
#include "trajnet/trajectory.hpp"
#include "trajnet/vec.hpp"

namespace trajnet {

struct ProjectileParams {
    double mass = 0.042;          // kg
    double drag_coeff = 0.295;    // dimensionless
    double ref_area = 0.02641;    // m^2
    double muzzle_speed = 853.0;  // m/s

    void validate() const {
        require(std::isfinite(mass) && mass > 0.0, "mass must be positive");
        require(std::isfinite(muzzle_speed) && muzzle_speed > 0.0, "muzzle_speed must be positive");
        require(std::isfinite(drag_coeff) && drag_coeff >= 0.0, "drag_coeff must be non-negative");
        require(std::isfinite(ref_area) && ref_area >= 0.0, "ref_area must be non-negative");
    }
    friend bool operator==(const ProjectileParams &, const ProjectileParams &) = default;
};

struct Environment {
    double gravity = 9.81;       // m/s^2
    double air_density = 1.225;  // kg/m^3

    void validate() const {
        require(std::isfinite(gravity) && gravity > 0.0, "gravity must be positive");
        require(std::isfinite(air_density) && air_density >= 0.0, "air_density must be non-negative");
    }
    friend bool operator==(const Environment &, const Environment &) = default;
};

struct Profile {
    std::string name;
    ProjectileParams projectile;
    Environment environment;
};

namespace profiles {

/// Constants exactly as published. The reference area is large enough that
/// drag decelerates the projectile at ~8e4 m/s^2 at the muzzle.
inline Profile paper_verbatim() { return {"paper-verbatim", {}, {}}; }

/// Same constants with the cross-section of a 7.62 mm bullet.
inline Profile plausible_rifle() {
    Profile p{"plausible-rifle", {}, {}};
    p.projectile.ref_area = 4.8e-5;
    return p;
}

/// Plausible rifle with drag switched off.
inline Profile vacuum() {
    Profile p = plausible_rifle();
    p.name = "vacuum";
    p.projectile.drag_coeff = 0.0;
    p.environment.air_density = 0.0;
    return p;
}

inline Profile by_name(const std::string &name) {
    if (name == "paper-verbatim") return paper_verbatim();
    if (name == "plausible-rifle") return plausible_rifle();
    if (name == "vacuum") return vacuum();
    throw ConfigError("unknown profile: " + name +
                      " (expected paper-verbatim, plausible-rifle or vacuum)");
}

} // namespace profiles

enum class Integrator : std::uint8_t { explicit_euler, semi_implicit_euler };

struct SimConfig {
    std::uint32_t angular_density = 500;
    double max_radius = 2000.0;
    double dt = 1e-4;
    std::uint64_t max_steps = 10'000'000;
    std::string profile_name = "plausible-rifle";
    Integrator integrator = Integrator::explicit_euler;

    void validate() const {
        require(angular_density >= 2, "angular_density must be >= 2");
        require(std::isfinite(dt) && dt > 0.0, "dt must be positive");
        require(std::isfinite(max_radius) && max_radius > 0.0, "max_radius must be positive");
        require(max_steps >= 1, "max_steps must be >= 1");
    }
};

struct State2 {
    Vec2 position;
    Vec2 velocity;
    double time = 0.0;
};

/// Quadratic drag: -(rho * Cd * A / 2m) * |v| * v.
inline Vec2 drag_acceleration(const Vec2 &velocity, const Environment &env, const ProjectileParams &proj) {
    const double k = 0.5 * env.air_density * proj.drag_coeff * proj.ref_area / proj.mass;
    const double speed = norm(velocity);
    return velocity * (-k * speed);
}

inline Vec2 acceleration(const Vec2 &velocity, const Environment &env, const ProjectileParams &proj) {
    return drag_acceleration(velocity, env, proj) + Vec2{0.0, -env.gravity};
}

/// One explicit Euler step: position advances with the old velocity.
inline State2 step(const State2 &s, double dt, const Environment &env, const ProjectileParams &proj) {
    return {s.position + s.velocity * dt, s.velocity + acceleration(s.velocity, env, proj) * dt, s.time + dt};
}

/// Symplectic variant: velocity first, then position with the new velocity.
inline State2 step_semi_implicit(const State2 &s, double dt, const Environment &env,
                                 const ProjectileParams &proj) {
    const Vec2 v = s.velocity + acceleration(s.velocity, env, proj) * dt;
    return {s.position + v * dt, v, s.time + dt};
}

/// Mechanical energy per unit mass.
inline double specific_energy(const State2 &s, const Environment &env) {
    return 0.5 * squared_norm(s.velocity) + env.gravity * s.position.y;
}

/// Launch velocity; angles past vertical are mirrored so that pi gives an
/// exactly horizontal shot and theta, pi - theta are exact x-mirrors.
inline Vec2 launch_velocity(double elevation_angle, double speed) {
    if (elevation_angle > std::numbers::pi / 2) {
        const double mirrored = std::numbers::pi - elevation_angle;
        return {-speed * std::cos(mirrored), speed * std::sin(mirrored)};
    }
    return {speed * std::cos(elevation_angle), speed * std::sin(elevation_angle)};
}

/// Integrates one launch from the origin and records every step's position.
///
/// Stops at the first recorded point with |p| >= max_radius, when the
/// projectile drops below y = 0 after having risen above it, or after
/// max_steps steps. Launches that never rise (exactly horizontal) are only
/// stopped by the radius or the step cap, so flat shots still reach the rim.
inline Trajectory simulate(double elevation_angle, const SimConfig &cfg, const Environment &env,
                           const ProjectileParams &proj) {
    if (!(elevation_angle >= 0.0 && elevation_angle <= std::numbers::pi))
        throw ConfigError("elevation angle must lie in [0, pi]");
    cfg.validate();
    env.validate();
    proj.validate();

    Trajectory traj;
    traj.initial_angle = elevation_angle;
    State2 s{{0.0, 0.0}, launch_velocity(elevation_angle, proj.muzzle_speed), 0.0};
    traj.points.push_back(s.position);

    const double r2 = cfg.max_radius * cfg.max_radius;
    bool risen = false;
    for (std::uint64_t n = 0;; ++n) {
        if (n == cfg.max_steps) {
            traj.termination = Termination::step_cap;
            break;
        }
        s = cfg.integrator == Integrator::explicit_euler ? step(s, cfg.dt, env, proj)
                                                         : step_semi_implicit(s, cfg.dt, env, proj);
        if (!is_finite(s.position) || !is_finite(s.velocity))
            throw NumericError("simulation diverged at t=" + std::to_string(s.time));
        traj.points.push_back(s.position);
        if (squared_norm(s.position) >= r2) {
            traj.termination = Termination::radius;
            break;
        }
        if (s.position.y > 0.0) risen = true;
        else if (risen && s.position.y < 0.0) {
            traj.termination = Termination::ground;
            break;
        }
    }
    return traj;
}

inline Trajectory simulate(double elevation_angle, const SimConfig &cfg, const Profile &profile) {
    return simulate(elevation_angle, cfg, profile.environment, profile.projectile);
}

struct PlanarTarget {
    Vec2 point;      // (horizontal range, height)
    double azimuth;  // radians
};

/// (X, Y, Z) -> ((hypot(X, Y), Z), atan2(Y, X)). The z-axis maps to azimuth 0.
inline PlanarTarget map_3d_to_2d(const Vec3 &p) {
    const double range = std::hypot(p.x, p.y);
    const double azimuth = (p.x == 0.0 && p.y == 0.0) ? 0.0 : std::atan2(p.y, p.x);
    return {{range, p.z}, azimuth};
}

inline Vec3 map_2d_to_3d(const Vec2 &p, double azimuth) {
    if (!(p.x >= 0.0)) throw ConfigError("in-plane range component must be non-negative");
    return {p.x * std::cos(azimuth), p.x * std::sin(azimuth), p.y};
}

} // namespace trajnet
