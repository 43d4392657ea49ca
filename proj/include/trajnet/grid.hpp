// Baked grids of trajectories over uniformly spaced elevation angles.
#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <vector>

#include "trajnet/dynamics.hpp"
#include "trajnet/parallel.hpp"
#include "trajnet/trajectory.hpp"

namespace trajnet {

struct SpacingStats {
    double mean = 0.0;
    double variance = 0.0;  // population variance
};

struct GridBundle {
    SimConfig sim_config;
    Profile profile;
    std::vector<Trajectory> trajectories;  // ordered by angle_index
    double spacing_mean = 0.0;
    double spacing_variance = 0.0;
    bool subsampled = false;

    std::size_t density() const { return trajectories.size(); }
    std::size_t total_points() const {
        std::size_t n = 0;
        for (const auto &t : trajectories) n += t.size();
        return n;
    }
};

/// k-th of s angles spanning [0, pi] with both endpoints included.
inline double grid_angle(std::size_t k, std::size_t density) {
    if (k + 1 == density) return std::numbers::pi;
    return std::numbers::pi * static_cast<double>(k) / static_cast<double>(density - 1);
}

/// Mean and population variance of the distance between the final points
/// of angle-adjacent trajectories.
inline SpacingStats last_point_spacing_stats(const std::vector<Trajectory> &trajectories) {
    require(trajectories.size() >= 2, "spacing statistics need at least 2 trajectories");
    const std::size_t pairs = trajectories.size() - 1;
    std::vector<double> d(pairs);
    double sum = 0.0;
    for (std::size_t i = 0; i < pairs; ++i) {
        d[i] = distance(trajectories[i].last(), trajectories[i + 1].last());
        sum += d[i];
    }
    const double mean = sum / static_cast<double>(pairs);
    double ss = 0.0;
    for (double v : d) ss += (v - mean) * (v - mean);
    return {mean, ss / static_cast<double>(pairs)};
}

inline SpacingStats last_point_spacing_stats(const GridBundle &grid) {
    return last_point_spacing_stats(grid.trajectories);
}

/// Simulates every angle of the grid. `threads` = 0 uses all cores; the
/// result does not depend on the thread count.
inline GridBundle bake_grid(const SimConfig &cfg, const Profile &profile, unsigned threads = 0) {
    cfg.validate();
    GridBundle grid;
    grid.sim_config = cfg;
    grid.sim_config.profile_name = profile.name;
    grid.profile = profile;
    grid.trajectories.resize(cfg.angular_density);
    parallel_for(cfg.angular_density, threads, [&](std::size_t k) {
        Trajectory t = simulate(grid_angle(k, cfg.angular_density), cfg, profile);
        t.angle_index = static_cast<std::uint32_t>(k);
        grid.trajectories[k] = std::move(t);
    });
    for (const auto &t : grid.trajectories)
        if (t.size() < 2)
            throw NumericError("trajectory " + std::to_string(t.angle_index) + " has fewer than 2 points");
    const auto stats = last_point_spacing_stats(grid);
    grid.spacing_mean = stats.mean;
    grid.spacing_variance = stats.variance;
    return grid;
}

namespace detail {

inline bool stride_ok(const std::vector<Vec2> &pts, std::size_t stride, double max_spacing) {
    const std::size_t last = pts.size() - 1;
    std::size_t i = 0;
    for (; i + stride <= last; i += stride)
        if (distance(pts[i], pts[i + stride]) > max_spacing) return false;
    return i == last || distance(pts[i], pts[last]) <= max_spacing;
}

} // namespace detail

/// Keeps every k-th point for the largest k whose retained neighbours are all
/// within `max_spacing`; the final point is always kept. If a single native
/// step already exceeds the bound the trajectory is returned unchanged with
/// `unsatisfiable` set.
inline Trajectory subsample_trajectory(const Trajectory &traj, double max_spacing) {
    require(max_spacing > 0.0, "max_spacing must be positive");
    require(!traj.points.empty(), "cannot subsample an empty trajectory");
    Trajectory out = traj;
    out.unsatisfiable = false;
    const auto &pts = traj.points;
    if (pts.size() <= 2) return out;
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
        if (distance(pts[i], pts[i + 1]) > max_spacing) {
            out.unsatisfiable = true;
            return out;
        }
    }
    // Largest valid stride; a downward scan costs O(N log N) overall.
    std::size_t stride = pts.size() - 1;
    while (stride > 1 && !detail::stride_ok(pts, stride, max_spacing)) --stride;

    out.points.clear();
    const std::size_t last = pts.size() - 1;
    for (std::size_t i = 0; i <= last; i += stride) out.points.push_back(pts[i]);
    if (last % stride != 0) out.points.push_back(pts[last]);
    return out;
}

struct SubsampleSummary {
    std::size_t unsatisfiable = 0;
    std::size_t points_before = 0;
    std::size_t points_after = 0;
};

/// Subsamples every trajectory with the grid's own last-point spacing mean.
inline GridBundle subsample_grid(const GridBundle &grid, SubsampleSummary *summary = nullptr,
                                 unsigned threads = 0) {
    require(!grid.subsampled, "grid is already subsampled");
    require(grid.spacing_mean > 0.0, "grid has no spacing statistics");
    GridBundle out;
    out.sim_config = grid.sim_config;
    out.profile = grid.profile;
    out.spacing_mean = grid.spacing_mean;
    out.spacing_variance = grid.spacing_variance;
    out.subsampled = true;
    out.trajectories.resize(grid.trajectories.size());
    parallel_for(grid.trajectories.size(), threads, [&](std::size_t i) {
        out.trajectories[i] = subsample_trajectory(grid.trajectories[i], grid.spacing_mean);
    });
    if (summary) {
        *summary = {};
        summary->points_before = grid.total_points();
        summary->points_after = out.total_points();
        for (const auto &t : out.trajectories) summary->unsatisfiable += t.unsatisfiable ? 1 : 0;
    }
    return out;
}

} // namespace trajnet
