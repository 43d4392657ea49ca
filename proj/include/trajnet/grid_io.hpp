// TGRD binary grid format (little-endian):
//   "TGRD" | version u32 | angular_density u32 | mass, drag_coeff, ref_area,
//   muzzle_speed, gravity, air_density (6 x f64) | dt f64 | max_radius f64 |
//   subsampled u8 | per trajectory: angle f64, termination u8, count u64,
//   count x (x f64, y f64)
#pragma once

#include <cstdint>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <string>

#include "trajnet/binary_io.hpp"
#include "trajnet/grid.hpp"

namespace trajnet {

inline constexpr std::uint32_t kGridFormatVersion = 1;

inline void write_grid(std::ostream &os, const GridBundle &grid) {
    io::write_magic(os, "TGRD");
    io::write_le<std::uint32_t>(os, kGridFormatVersion);
    io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(grid.trajectories.size()));
    const auto &p = grid.profile.projectile;
    const auto &e = grid.profile.environment;
    for (double v : {p.mass, p.drag_coeff, p.ref_area, p.muzzle_speed, e.gravity, e.air_density})
        io::write_le<double>(os, v);
    io::write_le<double>(os, grid.sim_config.dt);
    io::write_le<double>(os, grid.sim_config.max_radius);
    io::write_le<std::uint8_t>(os, grid.subsampled ? 1 : 0);
    for (const auto &t : grid.trajectories) {
        io::write_le<double>(os, t.initial_angle);
        io::write_le<std::uint8_t>(os, static_cast<std::uint8_t>(t.termination));
        io::write_le<std::uint64_t>(os, t.points.size());
        for (const auto &pt : t.points) {
            io::write_le<double>(os, pt.x);
            io::write_le<double>(os, pt.y);
        }
    }
}

namespace detail {

inline std::string identify_profile(const Profile &p) {
    for (const auto &known : {profiles::paper_verbatim(), profiles::plausible_rifle(), profiles::vacuum()})
        if (known.projectile == p.projectile && known.environment == p.environment) return known.name;
    return "custom";
}

} // namespace detail

/// Reads a grid and recomputes its last-point spacing statistics (final
/// points survive subsampling, so the statistics are the baked ones).
inline GridBundle read_grid(std::istream &is) {
    io::expect_magic(is, "TGRD");
    io::expect_version(is, kGridFormatVersion);
    GridBundle grid;
    const auto density = io::read_le<std::uint32_t>(is);
    if (density < 2) throw FormatError("grid density must be >= 2");
    auto &p = grid.profile.projectile;
    auto &e = grid.profile.environment;
    for (double *v : {&p.mass, &p.drag_coeff, &p.ref_area, &p.muzzle_speed, &e.gravity, &e.air_density})
        *v = io::read_le<double>(is);
    grid.profile.name = detail::identify_profile(grid.profile);
    grid.sim_config.angular_density = density;
    grid.sim_config.dt = io::read_le<double>(is);
    grid.sim_config.max_radius = io::read_le<double>(is);
    grid.sim_config.profile_name = grid.profile.name;
    grid.subsampled = io::read_le<std::uint8_t>(is) != 0;
    grid.trajectories.resize(density);
    for (std::uint32_t k = 0; k < density; ++k) {
        auto &t = grid.trajectories[k];
        t.angle_index = k;
        t.initial_angle = io::read_le<double>(is);
        const auto term = io::read_le<std::uint8_t>(is);
        if (term > 2) throw FormatError("bad termination code");
        t.termination = static_cast<Termination>(term);
        const auto count = io::read_le<std::uint64_t>(is);
        if (count == 0 || count > (std::uint64_t{1} << 40)) throw FormatError("bad point count");
        t.points.resize(count);
        for (auto &pt : t.points) {
            pt.x = io::read_le<double>(is);
            pt.y = io::read_le<double>(is);
        }
    }
    try {
        grid.sim_config.validate();
        grid.profile.projectile.validate();
        grid.profile.environment.validate();
    } catch (const ConfigError &err) {
        throw FormatError(std::string("invalid grid header: ") + err.what());
    }
    const auto stats = last_point_spacing_stats(grid);
    grid.spacing_mean = stats.mean;
    grid.spacing_variance = stats.variance;
    return grid;
}

inline void save_grid(const std::string &path, const GridBundle &grid) {
    auto os = io::open_out(path);
    write_grid(os, grid);
    io::finish_write(os, path);
}

inline GridBundle load_grid(const std::string &path) {
    auto is = io::open_in(path);
    return read_grid(is);
}

/// Lossless (max_digits10) CSV: angle_index,point_index,x,y
inline void write_grid_csv(std::ostream &os, const GridBundle &grid) {
    os << "angle_index,point_index,x,y\n";
    os << std::setprecision(std::numeric_limits<double>::max_digits10);
    for (const auto &t : grid.trajectories)
        for (std::size_t i = 0; i < t.points.size(); ++i)
            os << t.angle_index << ',' << i << ',' << t.points[i].x << ',' << t.points[i].y << '\n';
}

} // namespace trajnet
