// Static 2D k-d tree over grid points with a total, deterministic tie-break.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <tuple>
#include <vector>

#include "trajnet/grid.hpp"

namespace trajnet {

struct GridPointRef {
    std::uint32_t angle_index = 0;
    std::uint32_t point_index = 0;
    friend auto operator<=>(const GridPointRef &, const GridPointRef &) = default;
};

struct NearestResult {
    GridPointRef ref;
    double distance = std::numeric_limits<double>::infinity();
    friend bool operator==(const NearestResult &, const NearestResult &) = default;
};

namespace detail {

inline double squared_distance(const Vec2 &a, const Vec2 &b) {
    const double dx = a.x - b.x;
    const double dy = a.y - b.y;
    return dx * dx + dy * dy;
}

/// Strict ordering on (squared distance, angle_index, point_index).
inline bool closer(double d2, const GridPointRef &ref, double best_d2, const GridPointRef &best) {
    return std::tie(d2, ref) < std::tie(best_d2, best);
}

} // namespace detail

class SpatialIndex {
  public:
    struct Entry {
        Vec2 point;
        GridPointRef ref;
    };

    SpatialIndex() = default;

    explicit SpatialIndex(const GridBundle &grid) {
        for (const auto &t : grid.trajectories)
            for (std::size_t i = 0; i < t.points.size(); ++i)
                entries_.push_back({t.points[i], {t.angle_index, static_cast<std::uint32_t>(i)}});
        require(!entries_.empty(), "cannot index an empty grid");
        axis_.assign(entries_.size(), 0);
        build(0, entries_.size());
    }

    std::size_t size() const { return entries_.size(); }
    const std::vector<Entry> &entries() const { return entries_; }

    NearestResult nearest(const Vec2 &target) const {
        double best_d2 = std::numeric_limits<double>::infinity();
        GridPointRef best{std::numeric_limits<std::uint32_t>::max(), std::numeric_limits<std::uint32_t>::max()};
        search(0, entries_.size(), target, best_d2, best);
        return {best, std::sqrt(best_d2)};
    }

  private:
    // Node for range [lo, hi) is its median element; axis_ stores the split axis.
    void build(std::size_t lo, std::size_t hi) {
        if (hi - lo <= 1) return;
        double min_x = std::numeric_limits<double>::infinity(), max_x = -min_x;
        double min_y = min_x, max_y = -min_x;
        for (std::size_t i = lo; i < hi; ++i) {
            min_x = std::min(min_x, entries_[i].point.x);
            max_x = std::max(max_x, entries_[i].point.x);
            min_y = std::min(min_y, entries_[i].point.y);
            max_y = std::max(max_y, entries_[i].point.y);
        }
        const std::uint8_t axis = (max_y - min_y) > (max_x - min_x) ? 1 : 0;
        const std::size_t mid = lo + (hi - lo) / 2;
        std::nth_element(entries_.begin() + static_cast<std::ptrdiff_t>(lo),
                         entries_.begin() + static_cast<std::ptrdiff_t>(mid),
                         entries_.begin() + static_cast<std::ptrdiff_t>(hi), [axis](const Entry &a, const Entry &b) {
                             const double ka = axis ? a.point.y : a.point.x;
                             const double kb = axis ? b.point.y : b.point.x;
                             return std::tie(ka, a.ref) < std::tie(kb, b.ref);
                         });
        axis_[mid] = axis;
        build(lo, mid);
        build(mid + 1, hi);
    }

    void search(std::size_t lo, std::size_t hi, const Vec2 &target, double &best_d2, GridPointRef &best) const {
        if (lo >= hi) return;
        const std::size_t mid = lo + (hi - lo) / 2;
        const Entry &e = entries_[mid];
        const double d2 = detail::squared_distance(e.point, target);
        if (detail::closer(d2, e.ref, best_d2, best)) {
            best_d2 = d2;
            best = e.ref;
        }
        if (hi - lo == 1) return;
        const double diff = axis_[mid] ? target.y - e.point.y : target.x - e.point.x;
        const bool left_first = diff <= 0.0;
        if (left_first) search(lo, mid, target, best_d2, best);
        else search(mid + 1, hi, target, best_d2, best);
        // Equal bounds are still explored so exact ties resolve identically to a scan.
        if (diff * diff <= best_d2) {
            if (left_first) search(mid + 1, hi, target, best_d2, best);
            else search(lo, mid, target, best_d2, best);
        }
    }

    std::vector<Entry> entries_;
    std::vector<std::uint8_t> axis_;
};

inline SpatialIndex build_index(const GridBundle &grid) { return SpatialIndex(grid); }

inline NearestResult nearest_segment(const SpatialIndex &index, const Vec2 &target) {
    return index.nearest(target);
}

/// Linear scan with the same tie-break as the index.
inline NearestResult nearest_segment_bruteforce(const GridBundle &grid, const Vec2 &target) {
    double best_d2 = std::numeric_limits<double>::infinity();
    GridPointRef best{std::numeric_limits<std::uint32_t>::max(), std::numeric_limits<std::uint32_t>::max()};
    for (const auto &t : grid.trajectories) {
        for (std::size_t i = 0; i < t.points.size(); ++i) {
            const GridPointRef ref{t.angle_index, static_cast<std::uint32_t>(i)};
            const double d2 = detail::squared_distance(t.points[i], target);
            if (detail::closer(d2, ref, best_d2, best)) {
                best_d2 = d2;
                best = ref;
            }
        }
    }
    require(best_d2 < std::numeric_limits<double>::infinity(), "cannot search an empty grid");
    return {best, std::sqrt(best_d2)};
}

} // namespace trajnet
