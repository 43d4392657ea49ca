// Lookup baseline: map a 3D target into the firing plane and take the launch
// angle of the closest baked grid point.
#pragma once

#include <cmath>
#include <optional>
#include <string_view>

#include "trajnet/dynamics.hpp"
#include "trajnet/spatial_index.hpp"

namespace trajnet {

enum class SolveStatus { hit, miss, out_of_envelope };

constexpr std::string_view to_string(SolveStatus s) {
    switch (s) {
    case SolveStatus::hit: return "hit";
    case SolveStatus::miss: return "miss";
    case SolveStatus::out_of_envelope: return "out_of_envelope";
    }
    return "unknown";
}

struct InitialConditions {
    double elevation_angle = 0.0;  // radians
    double azimuth = 0.0;          // radians
    double speed = 0.0;            // m/s
    double miss_distance = 0.0;    // to the polyline around the winning point
    double point_distance = 0.0;   // to the winning grid point itself
    GridPointRef ref;
    SolveStatus status = SolveStatus::miss;
};

/// Targets farther than the baked radius plus one integration step are
/// outside the grid's envelope.
inline bool in_envelope(const GridBundle &grid, const Vec2 &target2) {
    const double overshoot = grid.profile.projectile.muzzle_speed * grid.sim_config.dt;
    return norm(target2) <= grid.sim_config.max_radius + overshoot;
}

/// `threshold` defaults to the grid's last-point spacing mean.
inline InitialConditions solve_initial_conditions(const SpatialIndex &index, const GridBundle &grid,
                                                  const Vec3 &target3,
                                                  std::optional<double> threshold = std::nullopt) {
    require(is_finite(target3), "target must be finite");
    const double limit = threshold.value_or(grid.spacing_mean);
    const auto planar = map_3d_to_2d(target3);
    const auto nearest = index.nearest(planar.point);
    const auto &traj = grid.trajectories.at(nearest.ref.angle_index);
    const auto &pts = traj.points;
    const std::size_t i = nearest.ref.point_index;

    double miss = nearest.distance;
    if (i > 0) miss = std::min(miss, point_segment_distance(planar.point, pts[i - 1], pts[i]));
    if (i + 1 < pts.size()) miss = std::min(miss, point_segment_distance(planar.point, pts[i], pts[i + 1]));

    InitialConditions ic;
    ic.elevation_angle = traj.initial_angle;
    ic.azimuth = planar.azimuth;
    ic.speed = grid.profile.projectile.muzzle_speed;
    ic.miss_distance = miss;
    ic.point_distance = nearest.distance;
    ic.ref = nearest.ref;
    if (!in_envelope(grid, planar.point)) ic.status = SolveStatus::out_of_envelope;
    else ic.status = miss <= limit ? SolveStatus::hit : SolveStatus::miss;
    return ic;
}

} // namespace trajnet
