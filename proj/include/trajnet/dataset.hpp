// Training samples derived from a subsampled grid.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <iomanip>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <random>
#include <string>
#include <tuple>
#include <vector>

#include "trajnet/binary_io.hpp"
#include "trajnet/grid.hpp"

namespace trajnet {

inline constexpr std::size_t kFeatureCount = 6;
using Features = std::array<double, kFeatureCount>;

struct DatasetSample {
    Features features{};
    double label = 0.0;  // initial elevation angle / pi
    std::uint32_t angle_index = 0;
    std::uint32_t point_index = 0;  // position within the retained trajectory
};

struct Dataset {
    std::vector<DatasetSample> samples;
    double r_max = 0.0;
    std::uint32_t density = 0;
    std::uint64_t grid_digest = 0;

    std::size_t size() const { return samples.size(); }
    bool empty() const { return samples.empty(); }
};

/// (x/R, y/R, |p|/R, x/|p|, y/|p|, atan2(y, x)/pi)
inline Features features_for_point(const Vec2 &p, double r_max) {
    require(is_finite(p), "point must be finite");
    require(r_max > 0.0, "r_max must be positive");
    const double r = norm(p);
    require(r > 0.0, "features are undefined at the origin");
    return {p.x / r_max, p.y / r_max, r / r_max, p.x / r, p.y / r, std::atan2(p.y, p.x) / std::numbers::pi};
}

inline double label_for_angle(double theta) {
    require(theta >= 0.0 && theta <= std::numbers::pi, "angle must lie in [0, pi]");
    return theta / std::numbers::pi;
}

/// FNV-1a over the grid's points; identifies the source of a dataset.
inline std::uint64_t grid_digest(const GridBundle &grid) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](double v) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, sizeof bits);
        for (int i = 0; i < 8; ++i) {
            h ^= (bits >> (8 * i)) & 0xffu;
            h *= 0x100000001b3ULL;
        }
    };
    for (const auto &t : grid.trajectories) {
        mix(t.initial_angle);
        for (const auto &p : t.points) {
            mix(p.x);
            mix(p.y);
        }
    }
    return h;
}

/// True for points that become samples: everything except the launch point
/// and points below the horizon (possible only for near-flat launches).
inline bool is_sample_point(const Vec2 &p) { return p.y >= 0.0 && squared_norm(p) > 0.0; }

/// One sample per retained point, ordered by angle index then point order.
inline Dataset build_dataset(const GridBundle &grid, double r_max) {
    require(!grid.trajectories.empty(), "cannot build a dataset from an empty grid");
    require(grid.subsampled, "dataset requires a subsampled grid");
    require(r_max > 0.0, "r_max must be positive");
    Dataset ds;
    ds.r_max = r_max;
    ds.density = static_cast<std::uint32_t>(grid.trajectories.size());
    ds.grid_digest = grid_digest(grid);
    for (const auto &t : grid.trajectories) {
        const double label = label_for_angle(t.initial_angle);
        for (std::size_t i = 1; i < t.points.size(); ++i) {
            if (!is_sample_point(t.points[i])) continue;
            ds.samples.push_back({features_for_point(t.points[i], r_max), label, t.angle_index,
                                  static_cast<std::uint32_t>(i)});
        }
    }
    return ds;
}

/// Fisher-Yates with mt19937_64; the permutation depends only on the seed.
template <typename T>
void seeded_shuffle(std::vector<T> &v, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    for (std::size_t i = v.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng() % i);
        std::swap(v[i - 1], v[j]);
    }
}

inline Dataset shuffle(Dataset ds, std::uint64_t seed) {
    seeded_shuffle(ds.samples, seed);
    return ds;
}

inline void sort_by_provenance(Dataset &ds) {
    std::ranges::sort(ds.samples, [](const DatasetSample &a, const DatasetSample &b) {
        return std::tie(a.angle_index, a.point_index) < std::tie(b.angle_index, b.point_index);
    });
}

// TDST binary format (little-endian):
//   "TDST" | version u32 | density u32 | r_max f64 | count u64 |
//   per sample: 6 features f32, label f32, angle_index u32
inline constexpr std::uint32_t kDatasetFormatVersion = 1;

inline void write_dataset(std::ostream &os, const Dataset &ds) {
    io::write_magic(os, "TDST");
    io::write_le<std::uint32_t>(os, kDatasetFormatVersion);
    io::write_le<std::uint32_t>(os, ds.density);
    io::write_le<double>(os, ds.r_max);
    io::write_le<std::uint64_t>(os, ds.samples.size());
    for (const auto &s : ds.samples) {
        for (double f : s.features) io::write_le<float>(os, static_cast<float>(f));
        io::write_le<float>(os, static_cast<float>(s.label));
        io::write_le<std::uint32_t>(os, s.angle_index);
    }
}

/// Features and labels come back rounded to f32. Point indices are not
/// stored and are reassigned as running positions within each angle.
inline Dataset read_dataset(std::istream &is) {
    io::expect_magic(is, "TDST");
    io::expect_version(is, kDatasetFormatVersion);
    Dataset ds;
    ds.density = io::read_le<std::uint32_t>(is);
    ds.r_max = io::read_le<double>(is);
    if (ds.density < 2 || !(ds.r_max > 0.0)) throw FormatError("invalid dataset header");
    const auto count = io::read_le<std::uint64_t>(is);
    if (count > (std::uint64_t{1} << 36)) throw FormatError("implausible sample count");
    ds.samples.resize(count);
    std::uint32_t prev_angle = std::numeric_limits<std::uint32_t>::max();
    std::uint32_t running = 0;
    for (auto &s : ds.samples) {
        for (double &f : s.features) f = io::read_le<float>(is);
        s.label = io::read_le<float>(is);
        s.angle_index = io::read_le<std::uint32_t>(is);
        if (s.angle_index >= ds.density) throw FormatError("angle_index out of range");
        running = s.angle_index == prev_angle ? running + 1 : 0;
        prev_angle = s.angle_index;
        s.point_index = running;
    }
    return ds;
}

inline void save_dataset(const std::string &path, const Dataset &ds) {
    auto os = io::open_out(path);
    write_dataset(os, ds);
    io::finish_write(os, path);
}

inline Dataset load_dataset(const std::string &path) {
    auto is = io::open_in(path);
    return read_dataset(is);
}

inline void write_dataset_csv(std::ostream &os, const Dataset &ds) {
    os << "x_norm,y_norm,r_norm,x_dir,y_dir,angle_norm,label,angle_index\n";
    os << std::setprecision(std::numeric_limits<float>::max_digits10);
    for (const auto &s : ds.samples) {
        for (double f : s.features) os << static_cast<float>(f) << ',';
        os << static_cast<float>(s.label) << ',' << s.angle_index << '\n';
    }
}

} // namespace trajnet
