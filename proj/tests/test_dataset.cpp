#include <cmath>
#include <numbers>
#include <sstream>

#include <gtest/gtest.h>

#include "trajnet/dataset.hpp"

using namespace trajnet;

namespace {

GridBundle small_grid(std::uint32_t density, double radius) {
    SimConfig cfg;
    cfg.angular_density = density;
    cfg.max_radius = radius;
    return subsample_grid(bake_grid(cfg, profiles::plausible_rifle()));
}

GridBundle hand_grid() {
    GridBundle g;
    g.sim_config.angular_density = 2;
    g.subsampled = true;
    Trajectory a, b;
    a.angle_index = 0;
    a.initial_angle = 0.0;
    a.points = {{0, 0}, {1, 0}, {2, 0}, {3, 0}};
    b.angle_index = 1;
    b.initial_angle = std::numbers::pi / 3;
    b.points = {{0, 0}, {1, 1}, {2, 2}, {3, 3}, {4, 4}, {5, 5}};
    g.trajectories = {a, b};
    return g;
}

} // namespace

TEST(Features, AxisPoint) {
    const auto f = features_for_point({100.0, 0.0}, 200.0);
    const Features expected{0.5, 0.0, 0.5, 1.0, 0.0, 0.0};
    for (std::size_t i = 0; i < kFeatureCount; ++i) EXPECT_DOUBLE_EQ(f[i], expected[i]);
}

TEST(Features, ThreeFourFive) {
    const auto f = features_for_point({-3.0, 4.0}, 10.0);
    EXPECT_DOUBLE_EQ(f[0], -0.3);
    EXPECT_DOUBLE_EQ(f[1], 0.4);
    EXPECT_DOUBLE_EQ(f[2], 0.5);
    EXPECT_DOUBLE_EQ(f[3], -0.6);
    EXPECT_DOUBLE_EQ(f[4], 0.8);
    EXPECT_NEAR(f[5], 0.7048327646991335, 1e-15);
}

TEST(Features, OriginAndBadRadiusRejected) {
    EXPECT_THROW(features_for_point({0.0, 0.0}, 1.0), ConfigError);
    EXPECT_THROW(features_for_point({1.0, 0.0}, 0.0), ConfigError);
}

TEST(Labels, Normalization) {
    EXPECT_EQ(label_for_angle(0.0), 0.0);
    EXPECT_EQ(label_for_angle(std::numbers::pi), 1.0);
    EXPECT_NEAR(label_for_angle(std::numbers::pi / 3), 1.0 / 3.0, 1e-15);
    EXPECT_THROW(label_for_angle(-1e-9), ConfigError);
    EXPECT_THROW(label_for_angle(3.2), ConfigError);
}

TEST(BuildDataset, OriginExclusionArithmetic) {
    const auto ds = build_dataset(hand_grid(), 10.0);
    ASSERT_EQ(ds.size(), 8u);
    EXPECT_EQ(ds.samples[0].angle_index, 0u);
    EXPECT_EQ(ds.samples[0].point_index, 1u);
    EXPECT_EQ(ds.samples[3].angle_index, 1u);
    EXPECT_NEAR(ds.samples[3].label, 1.0 / 3.0, 1e-15);
}

TEST(BuildDataset, RequiresSubsampledGrid) {
    auto g = hand_grid();
    g.subsampled = false;
    EXPECT_THROW(build_dataset(g, 10.0), ConfigError);
    GridBundle empty;
    empty.subsampled = true;
    EXPECT_THROW(build_dataset(empty, 10.0), ConfigError);
}

TEST(BuildDataset, SampleInvariants) {
    const auto g = small_grid(60, 120.0);
    const auto ds = build_dataset(g, 120.0);
    ASSERT_FALSE(ds.empty());
    const double overshoot = g.profile.projectile.muzzle_speed * g.sim_config.dt / 120.0;
    for (const auto &s : ds.samples) {
        const auto &f = s.features;
        for (double v : f) ASSERT_TRUE(std::isfinite(v));
        EXPECT_NEAR(f[0] * f[0] + f[1] * f[1], f[2] * f[2], 1e-12);
        EXPECT_NEAR(f[3] * f[3] + f[4] * f[4], 1.0, 1e-12);
        EXPECT_LE(f[2], 1.0 + overshoot + 1e-12);
        EXPECT_GE(f[1], 0.0);
        EXPECT_EQ(s.label, g.trajectories[s.angle_index].initial_angle / std::numbers::pi);
        EXPECT_DOUBLE_EQ(s.label * std::numbers::pi, g.trajectories[s.angle_index].initial_angle);
        const auto &p = g.trajectories[s.angle_index].points[s.point_index];
        EXPECT_EQ(f[0], p.x / 120.0);
    }
}

TEST(BuildDataset, CountGrowsQuadraticallyWithDensity) {
    const auto a = build_dataset(small_grid(250, 200.0), 200.0);
    const auto b = build_dataset(small_grid(500, 200.0), 200.0);
    const double ratio = static_cast<double>(b.size()) / static_cast<double>(a.size());
    EXPECT_NEAR(ratio, 4.0, 4.0 * 0.3);
}

TEST(Shuffle, DeterministicAndInvertible) {
    const auto ds = build_dataset(small_grid(30, 80.0), 80.0);
    const auto a = shuffle(ds, 11);
    const auto b = shuffle(ds, 11);
    const auto c = shuffle(ds, 12);
    ASSERT_EQ(a.size(), ds.size());
    bool same_ab = true, same_ac = true;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        same_ab = same_ab && a.samples[i].features == b.samples[i].features;
        same_ac = same_ac && a.samples[i].features == c.samples[i].features;
    }
    EXPECT_TRUE(same_ab);
    EXPECT_FALSE(same_ac);

    auto sorted = a;
    sort_by_provenance(sorted);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        EXPECT_EQ(sorted.samples[i].features, ds.samples[i].features);
        EXPECT_EQ(sorted.samples[i].label, ds.samples[i].label);
    }
}

TEST(Shuffle, KnownPermutationIsStable) {
    std::vector<int> v{0, 1, 2, 3, 4, 5, 6, 7};
    seeded_shuffle(v, 42);
    auto w = std::vector<int>{0, 1, 2, 3, 4, 5, 6, 7};
    seeded_shuffle(w, 42);
    EXPECT_EQ(v, w);
    std::ranges::sort(v);
    EXPECT_EQ(v, (std::vector<int>{0, 1, 2, 3, 4, 5, 6, 7}));
}

TEST(DatasetIo, RoundTripAtSinglePrecision) {
    const auto ds = build_dataset(small_grid(20, 60.0), 60.0);
    std::stringstream ss;
    write_dataset(ss, ds);
    const std::string bytes = ss.str();
    EXPECT_EQ(bytes.substr(0, 4), "TDST");
    EXPECT_EQ(bytes.size(), 4 + 4 + 4 + 8 + 8 + ds.size() * (7 * 4 + 4));
    const auto back = read_dataset(ss);
    ASSERT_EQ(back.size(), ds.size());
    EXPECT_EQ(back.density, 20u);
    EXPECT_EQ(back.r_max, 60.0);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        for (std::size_t k = 0; k < kFeatureCount; ++k)
            EXPECT_EQ(back.samples[i].features[k], static_cast<double>(static_cast<float>(ds.samples[i].features[k])));
        EXPECT_EQ(back.samples[i].label, static_cast<double>(static_cast<float>(ds.samples[i].label)));
        EXPECT_EQ(back.samples[i].angle_index, ds.samples[i].angle_index);
    }
    std::stringstream again;
    write_dataset(again, back);
    EXPECT_EQ(again.str(), bytes);
}

TEST(DatasetIo, RejectsCorruptInput) {
    const auto ds = build_dataset(hand_grid(), 10.0);
    std::stringstream ss;
    write_dataset(ss, ds);
    const std::string bytes = ss.str();
    std::stringstream truncated(bytes.substr(0, bytes.size() - 3));
    EXPECT_THROW(read_dataset(truncated), FormatError);
    std::stringstream wrong("TGRD");
    EXPECT_THROW(read_dataset(wrong), FormatError);
    std::string bad_index = bytes;
    bad_index[bad_index.size() - 4] = 7;  // last angle_index >= density
    std::stringstream bi(bad_index);
    EXPECT_THROW(read_dataset(bi), FormatError);
}

TEST(DatasetIo, CsvHeaderAndRows) {
    const auto ds = build_dataset(hand_grid(), 10.0);
    std::ostringstream os;
    write_dataset_csv(os, ds);
    std::istringstream is(os.str());
    std::string line;
    std::getline(is, line);
    EXPECT_EQ(line, "x_norm,y_norm,r_norm,x_dir,y_dir,angle_norm,label,angle_index");
    std::size_t rows = 0;
    while (std::getline(is, line)) ++rows;
    EXPECT_EQ(rows, ds.size());
}
