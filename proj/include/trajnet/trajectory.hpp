#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

#include "trajnet/vec.hpp"

namespace trajnet {

enum class Termination : std::uint8_t { radius = 0, ground = 1, step_cap = 2 };

constexpr std::string_view to_string(Termination t) {
    switch (t) {
    case Termination::radius: return "radius";
    case Termination::ground: return "ground";
    case Termination::step_cap: return "step_cap";
    }
    return "unknown";
}

/// Positions t_0 .. t_{N-1} of one launch, starting at the origin.
struct Trajectory {
    double initial_angle = 0.0;
    std::uint32_t angle_index = 0;
    std::vector<Vec2> points;
    Termination termination = Termination::radius;
    /// Set by subsampling when a native step already exceeds the spacing bound.
    bool unsatisfiable = false;

    std::size_t size() const { return points.size(); }
    const Vec2 &last() const { return points.back(); }
};

} // namespace trajnet
